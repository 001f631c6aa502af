use std::sync::Arc;

use rand::Rng;

use super::{Batch, ModelConfig};
use crate::biostats::FamInitWeights;
use crate::datamodel::Period;
use crate::diffcore::{Graph, Gru, Mlp, ParamId, ParamStore, Var};
use crate::error::{Error, Result};
use crate::features::{block_key, N_BLOCKS};
use crate::matrix::Matrix;
use crate::signal::N_OTF;

/// Temporal fusion of summary statistics and biomarker slots for one
/// (period, substance).
#[derive(Clone, Debug)]
pub struct Tfm {
    pub otf: Mlp,
    pub dtf: Mlp,
    /// Per (channel, slot) attention weights and the MLP applied after them.
    pub fam: Option<(ParamId, Mlp)>,
    pub fuse: Mlp,
    pub k: usize,
    pub d_k: usize,
}

impl Tfm {
    fn new(
        store: &mut ParamStore<f64>,
        name: &str,
        cfg: &ModelConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let d = cfg.d_k;
        let otf = Mlp::new(store, &format!("{name}.otf"), N_OTF, d, rng)?;
        let dtf = Mlp::new(store, &format!("{name}.dtf"), 3, d, rng)?;
        let fam = if cfg.fam_enabled {
            let w = store.add(
                format!("{name}.fam.weight"),
                crate::diffcore::Tensor::zeros(&[cfg.channels, cfg.k]),
            )?;
            store.get_mut(w).data_mut().fill(1.0);
            Some((w, Mlp::new(store, &format!("{name}.fam.mlp"), d, d, rng)?))
        } else {
            None
        };
        let fuse = Mlp::new(store, &format!("{name}.fuse"), (1 + cfg.k) * d, d, rng)?;
        Ok(Self {
            otf,
            dtf,
            fam,
            fuse,
            k: cfg.k,
            d_k: d,
        })
    }

    /// Slot embeddings with positional encoding and, when enabled, FAM;
    /// `(batch * channels * k) x d_k`.
    pub fn slot_embeddings(
        &self,
        g: &mut Graph<f64>,
        store: &ParamStore<f64>,
        dtf: Var,
        pe: Var,
    ) -> Result<Var> {
        let h = self.dtf.forward(g, store, dtf)?;
        let h = g.add(h, pe)?;
        match &self.fam {
            Some((w, mlp)) => {
                let w = g.param(store, *w);
                let scaled = g.scale_rows_tiled(h, w)?;
                mlp.forward(g, store, scaled)
            }
            None => Ok(h),
        }
    }

    /// Channel embeddings, `(batch * channels) x d_k`.
    pub fn forward(
        &self,
        g: &mut Graph<f64>,
        store: &ParamStore<f64>,
        otf: Var,
        dtf: Var,
        pe: Var,
    ) -> Result<Var> {
        let fo = self.otf.forward(g, store, otf)?;
        let fd = self.slot_embeddings(g, store, dtf, pe)?;
        let rows = g.value(fo).rows();
        let fd = g.reshape(fd, rows, self.k * self.d_k)?;
        let cat = g.concat_cols(&[fo, fd])?;
        self.fuse.forward(g, store, cat)
    }
}

/// `F <- MLP(A F W)`.
#[derive(Clone, Copy, Debug)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub mlp: Mlp,
}

#[derive(Clone, Debug)]
pub struct GcnStack {
    pub layers: Vec<GcnLayer>,
}

impl GcnStack {
    pub fn new(
        store: &mut ParamStore<f64>,
        name: &str,
        d: usize,
        layers: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let layers = (0..layers)
            .map(|l| {
                Ok(GcnLayer {
                    weight: store.add_uniform(
                        format!("{name}.layer{l}.weight"),
                        &[d, d],
                        d,
                        rng,
                    )?,
                    mlp: Mlp::new(store, &format!("{name}.layer{l}.mlp"), d, d, rng)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    /// `features` holds consecutive blocks of `adjacency.rows()` nodes.
    pub fn forward(
        &self,
        g: &mut Graph<f64>,
        store: &ParamStore<f64>,
        adjacency: &Arc<Matrix<f64>>,
        features: Var,
    ) -> Result<Var> {
        let mut f = features;
        for layer in &self.layers {
            let agg = g.aggregate(adjacency.clone(), f)?;
            let w = g.param(store, layer.weight);
            let h = g.matmul(agg, w)?;
            f = layer.mlp.forward(g, store, h)?;
        }
        Ok(f)
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    /// One per block, `period * 3 + substance`.
    pub tfms: Vec<Tfm>,
    /// Correlation and coherence stacks per block.
    pub gcns: Vec<[GcnStack; 2]>,
    pub gru: Gru,
    pub head: Mlp,
}

impl Model {
    /// Registers all parameters in `store`, drawing weights from `rng`.
    pub fn new(
        config: &ModelConfig,
        store: &mut ParamStore<f64>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        let mut tfms = Vec::with_capacity(N_BLOCKS);
        let mut gcns = Vec::with_capacity(N_BLOCKS);
        for b in 0..N_BLOCKS {
            let (p, s) = block_key(b);
            let name = format!("{}.{}", p.name(), s.name());
            tfms.push(Tfm::new(store, &format!("tfm.{name}"), config, rng)?);
            gcns.push([
                GcnStack::new(
                    store,
                    &format!("gcn.{name}.corr"),
                    config.d_k,
                    config.gcn_layers,
                    rng,
                )?,
                GcnStack::new(
                    store,
                    &format!("gcn.{name}.cohe"),
                    config.d_k,
                    config.gcn_layers,
                    rng,
                )?,
            ]);
        }
        let gru = Gru::new(
            store,
            "gru",
            6 * config.d_k,
            config.gru_hidden,
            config.gru_layers,
            rng,
        )?;
        let head = Mlp::new(store, "head", config.gru_hidden, 2, rng)?;
        Ok(Self {
            config: config.clone(),
            tfms,
            gcns,
            gru,
            head,
        })
    }

    /// Sets the FAM weights from training-fold screening.
    pub fn init_fam(&self, store: &mut ParamStore<f64>, init: &FamInitWeights) -> Result<()> {
        for (tfm, w0) in self.tfms.iter().zip(&init.weights) {
            let Some((w, _)) = tfm.fam else { continue };
            let (c, k) = (self.config.channels, self.config.k);
            if w0.rows() != c || w0.cols() < k {
                return Err(Error::Shape(format!(
                    "FAM init is {}x{}, model needs {c}x{k}",
                    w0.rows(),
                    w0.cols()
                )));
            }
            let data = store.get_mut(w).data_mut();
            for ch in 0..c {
                data[ch * k..(ch + 1) * k].copy_from_slice(&w0.row(ch)[..k]);
            }
        }
        Ok(())
    }

    /// Parameters of one period's TFM and GCN branches.
    pub fn period_params(&self, store: &ParamStore<f64>, period: Period) -> Vec<ParamId> {
        let prefixes = [
            format!("tfm.{}.", period.name()),
            format!("gcn.{}.", period.name()),
        ];
        store
            .iter()
            .filter(|(_, n, _)| prefixes.iter().any(|p| n.starts_with(p.as_str())))
            .map(|(id, _, _)| id)
            .collect()
    }

    fn check_batch(&self, batch: &Batch, adjacency: &[[Arc<Matrix<f64>>; 2]]) -> Result<()> {
        if batch.channels != self.config.channels || batch.k != self.config.k {
            return Err(Error::Shape(format!(
                "batch has {} channels and k = {}, model expects {} and {}",
                batch.channels, batch.k, self.config.channels, self.config.k
            )));
        }
        if adjacency.len() != N_BLOCKS {
            return Err(Error::Shape(format!(
                "{} adjacency pairs, expected {N_BLOCKS}",
                adjacency.len()
            )));
        }
        Ok(())
    }

    /// The three `(batch * channels) x 6d_k` period embeddings.
    pub fn period_embeddings(
        &self,
        g: &mut Graph<f64>,
        store: &ParamStore<f64>,
        batch: &Batch,
        adjacency: &[[Arc<Matrix<f64>>; 2]],
    ) -> Result<[Var; 3]> {
        self.check_batch(batch, adjacency)?;
        let mut out = Vec::with_capacity(3);
        for period in Period::ALL {
            let mut parts = Vec::with_capacity(6);
            for s in 0..3 {
                let b = period.index() * 3 + s;
                let otf = g.constant(batch.otf[b].clone());
                let dtf = g.constant(batch.dtf[b].clone());
                let pe = g.constant(batch.pe[b].clone());
                let f = self.tfms[b].forward(g, store, otf, dtf, pe)?;
                for (stack, adj) in self.gcns[b].iter().zip(&adjacency[b]) {
                    parts.push(stack.forward(g, store, adj, f)?);
                }
            }
            let e = g.concat_cols(&parts)?;
            g.check_finite(e, &format!("{} embedding", period.name()))?;
            out.push(e);
        }
        Ok([out[0], out[1], out[2]])
    }

    /// Class probabilities, `batch x 2`.
    pub fn forward(
        &self,
        g: &mut Graph<f64>,
        store: &ParamStore<f64>,
        batch: &Batch,
        adjacency: &[[Arc<Matrix<f64>>; 2]],
    ) -> Result<Var> {
        let seq = self.period_embeddings(g, store, batch, adjacency)?;
        let h = self.gru.forward(g, store, &seq)?;
        g.check_finite(h, "gru")?;
        let pooled = g.mean_blocks(h, batch.channels)?;
        let logits = self.head.forward(g, store, pooled)?;
        g.check_finite(logits, "head")?;
        Ok(g.softmax_rows(logits))
    }

    pub fn predict(
        &self,
        store: &ParamStore<f64>,
        batch: &Batch,
        adjacency: &[[Arc<Matrix<f64>>; 2]],
    ) -> Result<Vec<[f64; 2]>> {
        let mut g = Graph::new();
        let p = self.forward(&mut g, store, batch, adjacency)?;
        Ok(g.value(p).data().chunks(2).map(|r| [r[0], r[1]]).collect())
    }
}

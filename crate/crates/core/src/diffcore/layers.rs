//! Linear, ELU-activated MLP and GRU layers built on the tape.

use rand::Rng;

use super::{Graph, ParamId, ParamStore, Var};
use crate::error::Result;
use crate::scalar::Real;

/// `x W + b` for a batch of rows.
pub fn linear<R: Real>(g: &mut Graph<R>, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = g.matmul(x, w)?;
    g.add_row(xw, b)
}

/// ELU with alpha = 1 applied to one value.
pub fn elu<R: Real>(x: R) -> R {
    super::tape::elu_scalar(x)
}

pub fn sigmoid<R: Real>(x: R) -> R {
    super::tape::sigmoid_scalar(x)
}

/// Numerically stable softmax of one vector.
pub fn softmax<R: Real>(logits: &[R]) -> Vec<R> {
    super::tape::softmax_slice(logits)
}

#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Real>(
        store: &mut ParamStore<R>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let weight =
            store.add_uniform(format!("{name}.weight"), &[in_dim, out_dim], in_dim, rng)?;
        let bias = store.add_zeros(format!("{name}.bias"), &[out_dim])?;
        Ok(Self {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    pub fn forward<R: Real>(&self, g: &mut Graph<R>, store: &ParamStore<R>, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        linear(g, x, w, b)
    }

    pub fn num_params(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// A linear layer followed by ELU.
#[derive(Clone, Copy, Debug)]
pub struct Mlp(pub Linear);

impl Mlp {
    pub fn new<R: Real>(
        store: &mut ParamStore<R>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Linear::new(store, name, in_dim, out_dim, rng).map(Self)
    }

    pub fn forward<R: Real>(&self, g: &mut Graph<R>, store: &ParamStore<R>, x: Var) -> Result<Var> {
        let y = self.0.forward(g, store, x)?;
        Ok(g.elu(y))
    }
}

/// One GRU layer. Gate weights are fused column-wise in the order
/// update, reset, candidate.
///
/// `z = σ(x Wz + h Uz + bz)`, `r = σ(x Wr + h Ur + br)`,
/// `n = tanh(x Wn + (r ⊙ h) Un + bn)`, `h' = h + z ⊙ (n − h)`.
#[derive(Clone, Copy, Debug)]
pub struct GruCell {
    /// `in x 3h`
    pub input_weight: ParamId,
    /// `h x 2h` for the update and reset gates.
    pub gate_weight: ParamId,
    /// `h x h` for the candidate.
    pub candidate_weight: ParamId,
    /// `3h`
    pub bias: ParamId,
    pub in_dim: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<R: Real>(
        store: &mut ParamStore<R>,
        name: &str,
        in_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Self {
            input_weight: store.add_uniform(
                format!("{name}.input_weight"),
                &[in_dim, 3 * hidden],
                in_dim,
                rng,
            )?,
            gate_weight: store.add_uniform(
                format!("{name}.gate_weight"),
                &[hidden, 2 * hidden],
                hidden,
                rng,
            )?,
            candidate_weight: store.add_uniform(
                format!("{name}.candidate_weight"),
                &[hidden, hidden],
                hidden,
                rng,
            )?,
            bias: store.add_zeros(format!("{name}.bias"), &[3 * hidden])?,
            in_dim,
            hidden,
        })
    }

    pub fn num_params(&self) -> usize {
        let h = self.hidden;
        self.in_dim * 3 * h + h * 2 * h + h * h + 3 * h
    }

    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        store: &ParamStore<R>,
        x: Var,
        h: Var,
    ) -> Result<Var> {
        let hd = self.hidden;
        let wx = g.param(store, self.input_weight);
        let uzr = g.param(store, self.gate_weight);
        let un = g.param(store, self.candidate_weight);
        let b = g.param(store, self.bias);
        let xw = g.matmul(x, wx)?;
        let xw = g.add_row(xw, b)?;
        let hu = g.matmul(h, uzr)?;
        let xzr = g.slice_cols(xw, 0, 2 * hd)?;
        let zr = g.add(xzr, hu)?;
        let zr = g.sigmoid(zr);
        let z = g.slice_cols(zr, 0, hd)?;
        let r = g.slice_cols(zr, hd, hd)?;
        let rh = g.mul(r, h)?;
        let rhu = g.matmul(rh, un)?;
        let xn = g.slice_cols(xw, 2 * hd, hd)?;
        let n = g.add(xn, rhu)?;
        let n = g.tanh(n);
        let diff = g.sub(n, h)?;
        let step = g.mul(z, diff)?;
        g.add(h, step)
    }
}

/// GRU step on a batch; free-function form of [`GruCell::forward`].
pub fn gru_cell<R: Real>(
    g: &mut Graph<R>,
    store: &ParamStore<R>,
    cell: &GruCell,
    x: Var,
    h: Var,
) -> Result<Var> {
    cell.forward(g, store, x, h)
}

/// Stacked GRU run over a sequence, batch along rows.
#[derive(Clone, Debug)]
pub struct Gru {
    pub layers: Vec<GruCell>,
}

impl Gru {
    pub fn new<R: Real>(
        store: &mut ParamStore<R>,
        name: &str,
        in_dim: usize,
        hidden: usize,
        num_layers: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let layers = (0..num_layers)
            .map(|l| {
                GruCell::new(
                    store,
                    &format!("{name}.layer{l}"),
                    if l == 0 { in_dim } else { hidden },
                    hidden,
                    rng,
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn hidden(&self) -> usize {
        self.layers.last().map_or(0, |c| c.hidden)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(GruCell::num_params).sum()
    }

    /// Runs the sequence from zero state; returns the top layer's final state.
    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        store: &ParamStore<R>,
        inputs: &[Var],
    ) -> Result<Var> {
        let rows = match inputs.first() {
            Some(&x) => g.value(x).rows(),
            None => return Err(crate::Error::Shape("GRU needs at least one step".into())),
        };
        let mut state: Vec<Var> = self
            .layers
            .iter()
            .map(|c| g.constant_matrix(rows, c.hidden, vec![R::zero(); rows * c.hidden]))
            .collect();
        for &x in inputs {
            let mut inp = x;
            for (cell, h) in self.layers.iter().zip(state.iter_mut()) {
                *h = cell.forward(g, store, inp, *h)?;
                inp = *h;
            }
        }
        Ok(*state.last().expect("at least one layer"))
    }
}

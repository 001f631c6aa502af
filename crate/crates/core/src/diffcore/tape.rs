//! Reverse-mode differentiation over 2-D tensors.
//!
//! A [`Graph`] records every operation as it is evaluated. Calling
//! [`Graph::backward`] walks the record in reverse and accumulates parameter
//! gradients into the [`ParamStore`]. Nodes that do not depend on a parameter
//! are never differentiated.

use std::collections::HashMap;
use std::sync::Arc;

use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<R> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    ScaleRowsTiled(Var, Var),
    Elu(Var),
    Sigmoid(Var),
    Tanh(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    Reshape(Var),
    Aggregate(Arc<Matrix<R>>, Var),
    MeanBlocks(Var, usize),
    SoftmaxRows(Var),
    Focal {
        probs: Var,
        labels: Vec<usize>,
        gamma: R,
        omega: R,
    },
}

struct Node<R> {
    value: Tensor<R>,
    op: Op<R>,
    needs_grad: bool,
}

/// Probability floor applied before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

pub struct Graph<R: Real> {
    nodes: Vec<Node<R>>,
    params: HashMap<ParamId, Var>,
    clamped: usize,
}

impl<R: Real> Default for Graph<R> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err<T>(op: &str, detail: String) -> Result<T> {
    Err(Error::Shape(format!("{op}: {detail}")))
}

impl<R: Real> Graph<R> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
            clamped: 0,
        }
    }

    fn push(&mut self, value: Tensor<R>, op: Op<R>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<R> {
        &self.nodes[v.0].value
    }

    /// Number of probabilities that hit [`PROB_FLOOR`] in loss nodes.
    pub fn clamped_probabilities(&self) -> usize {
        self.clamped
    }

    pub fn constant(&mut self, t: Tensor<R>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn constant_matrix(&mut self, rows: usize, cols: usize, data: Vec<R>) -> Var {
        self.constant(Tensor::matrix(rows, cols, data))
    }

    /// A parameter as a node. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore<R>, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let t = store.get(id);
        let value =
            Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("stored tensor is valid");
        let v = self.push(value, Op::Param(id), true);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((m, k), (k2, n)) = (self.dims(a), self.dims(b));
        if k != k2 {
            return shape_err("matmul", format!("{m}x{k} times {k2}x{n}"));
        }
        let mut out = vec![R::zero(); m * n];
        R::gemm(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            R::zero(),
            &mut out,
        );
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::matrix(m, n, out), Op::MatMul(a, b), ng))
    }

    /// `a + bias`, with `bias` (one row) broadcast down the rows of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let ((m, n), bn) = (self.dims(a), self.value(bias).numel());
        if bn != n {
            return shape_err("add_row", format!("{m}x{n} plus bias of {bn}"));
        }
        let b = self.value(bias).data();
        let out: Vec<R> = self
            .value(a)
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(b).map(|(&x, &y)| x + y))
            .collect();
        let ng = self.needs(a) || self.needs(bias);
        Ok(self.push(Tensor::matrix(m, n, out), Op::AddRow(a, bias), ng))
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &str,
        f: impl Fn(R, R) -> R,
        op: Op<R>,
    ) -> Result<Var> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return shape_err(name, format!("{da:?} vs {db:?}"));
        }
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::matrix(da.0, da.1, out), op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Row `r` of `a` scaled by `w[r % len(w)]`; `w` is tiled down the rows.
    pub fn scale_rows_tiled(&mut self, a: Var, w: Var) -> Result<Var> {
        let ((m, n), wl) = (self.dims(a), self.value(w).numel());
        if wl == 0 || m % wl != 0 {
            return shape_err(
                "scale_rows_tiled",
                format!("{m} rows not a multiple of {wl} weights"),
            );
        }
        let wd = self.value(w).data();
        let out = self
            .value(a)
            .data()
            .chunks(n)
            .enumerate()
            .flat_map(|(r, row)| {
                let s = wd[r % wl];
                row.iter().map(move |&x| x * s)
            })
            .collect();
        let ng = self.needs(a) || self.needs(w);
        Ok(self.push(Tensor::matrix(m, n, out), Op::ScaleRowsTiled(a, w), ng))
    }

    fn unary(&mut self, a: Var, f: impl Fn(R) -> R, op: Op<R>) -> Var {
        let (m, n) = self.dims(a);
        let out = self.value(a).data().iter().map(|&x| f(x)).collect();
        let ng = self.needs(a);
        self.push(Tensor::matrix(m, n, out), op, ng)
    }

    /// ELU with alpha = 1.
    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(a, elu_scalar, Op::Elu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid_scalar, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.dims(a);
        if start + len > n || len == 0 {
            return shape_err(
                "slice_cols",
                format!("[{start}, {}) of {n} columns", start + len),
            );
        }
        let out = self
            .value(a)
            .data()
            .chunks(n)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let ng = self.needs(a);
        Ok(self.push(Tensor::matrix(m, len, out), Op::SliceCols(a, start), ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let m = match parts.first() {
            Some(&p) => self.dims(p).0,
            None => return shape_err("concat_cols", "no inputs".into()),
        };
        if let Some(&p) = parts.iter().find(|&&p| self.dims(p).0 != m) {
            return shape_err("concat_cols", format!("{} rows vs {m}", self.dims(p).0));
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.dims(p).1).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            Tensor::matrix(m, total, out),
            Op::ConcatCols(parts.to_vec()),
            ng,
        ))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let n = self.value(a).numel();
        if rows * cols != n {
            return shape_err("reshape", format!("{n} values into {rows}x{cols}"));
        }
        let out = self.value(a).data().to_vec();
        let ng = self.needs(a);
        Ok(self.push(Tensor::matrix(rows, cols, out), Op::Reshape(a), ng))
    }

    /// Block-diagonal propagation: rows of `f` form consecutive blocks of
    /// `adj.rows()` nodes and each block is left-multiplied by `adj`.
    pub fn aggregate(&mut self, adj: Arc<Matrix<R>>, f: Var) -> Result<Var> {
        let (m, d) = self.dims(f);
        let n = adj.rows();
        if adj.cols() != n || n == 0 || m % n != 0 {
            return shape_err(
                "aggregate",
                format!(
                    "{m}x{d} features against {}x{} adjacency",
                    adj.rows(),
                    adj.cols()
                ),
            );
        }
        let mut out = vec![R::zero(); m * d];
        let fd = self.value(f).data();
        for b in 0..m / n {
            let span = b * n * d..(b + 1) * n * d;
            R::gemm(
                n,
                n,
                d,
                adj.as_slice(),
                false,
                &fd[span.clone()],
                false,
                R::zero(),
                &mut out[span],
            );
        }
        let ng = self.needs(f);
        Ok(self.push(Tensor::matrix(m, d, out), Op::Aggregate(adj, f), ng))
    }

    /// Mean over consecutive blocks of `block` rows.
    pub fn mean_blocks(&mut self, a: Var, block: usize) -> Result<Var> {
        let (m, n) = self.dims(a);
        if block == 0 || m % block != 0 {
            return shape_err("mean_blocks", format!("{m} rows in blocks of {block}"));
        }
        let inv = R::one() / R::from_usize_lossy(block);
        let ad = self.value(a).data();
        let mut out = vec![R::zero(); (m / block) * n];
        for r in 0..m {
            let o = (r / block) * n;
            for c in 0..n {
                out[o + c] = out[o + c] + ad[r * n + c] * inv;
            }
        }
        let ng = self.needs(a);
        Ok(self.push(
            Tensor::matrix(m / block, n, out),
            Op::MeanBlocks(a, block),
            ng,
        ))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (m, n) = self.dims(a);
        let out = self
            .value(a)
            .data()
            .chunks(n)
            .flat_map(softmax_slice)
            .collect();
        let ng = self.needs(a);
        self.push(Tensor::matrix(m, n, out), Op::SoftmaxRows(a), ng)
    }

    /// Mean focal loss over rows of a probability matrix.
    pub fn focal_loss(&mut self, probs: Var, labels: &[usize], gamma: R, omega: R) -> Result<Var> {
        let (m, n) = self.dims(probs);
        if labels.len() != m || labels.iter().any(|&l| l >= n) {
            return shape_err(
                "focal_loss",
                format!("{} labels for {m}x{n} probabilities", labels.len()),
            );
        }
        let pd = self.value(probs).data();
        let mut total = R::zero();
        let mut clamped = 0;
        for (r, &l) in labels.iter().enumerate() {
            let f = super::loss::focal_loss_scalar(pd[r * n + l], gamma, omega);
            clamped += usize::from(f.degenerate);
            total = total + f.value;
        }
        self.clamped += clamped;
        let value = total / R::from_usize_lossy(m);
        let ng = self.needs(probs);
        Ok(self.push(
            Tensor::matrix(1, 1, vec![value]),
            Op::Focal {
                probs,
                labels: labels.to_vec(),
                gamma,
                omega,
            },
            ng,
        ))
    }

    /// Fails with `label` in the message if any value of `v` is not finite.
    pub fn check_finite(&self, v: Var, label: &str) -> Result<()> {
        if self.value(v).data().iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric(format!("non-finite values after {label}")))
        }
    }

    /// Accumulates d(loss)/d(param) into each parameter's gradient buffer.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<R>) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return shape_err(
                "backward",
                format!("loss has {} values", self.value(loss).numel()),
            );
        }
        let mut grads: Vec<Option<Vec<R>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![R::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads, store);
        }
        Ok(())
    }

    fn propagate(
        &self,
        node: &Node<R>,
        g: &[R],
        grads: &mut [Option<Vec<R>>],
        store: &mut ParamStore<R>,
    ) {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => {
                for (a, &b) in store.get_mut(*id).grad_mut().iter_mut().zip(g) {
                    *a = *a + b;
                }
            }
            Op::MatMul(a, b) => {
                let ((m, k), n) = (self.dims(*a), out.cols());
                if self.needs(*a) {
                    let buf = self.grad_buf(grads, *a);
                    R::gemm(
                        m,
                        n,
                        k,
                        g,
                        false,
                        self.value(*b).data(),
                        true,
                        R::one(),
                        buf,
                    );
                }
                if self.needs(*b) {
                    let buf = self.grad_buf(grads, *b);
                    R::gemm(
                        k,
                        m,
                        n,
                        self.value(*a).data(),
                        true,
                        g,
                        false,
                        R::one(),
                        buf,
                    );
                }
            }
            Op::AddRow(a, bias) => {
                let n = out.cols();
                if self.needs(*a) {
                    add_into(self.grad_buf(grads, *a), g);
                }
                if self.needs(*bias) {
                    let buf = self.grad_buf(grads, *bias);
                    for row in g.chunks(n) {
                        add_into(buf, row);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.needs(v) {
                        add_into(self.grad_buf(grads, v), g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if self.needs(*a) {
                    add_into(self.grad_buf(grads, *a), g);
                }
                if self.needs(*b) {
                    for (x, &y) in self.grad_buf(grads, *b).iter_mut().zip(g) {
                        *x = *x - y;
                    }
                }
            }
            Op::Mul(a, b) => {
                for (v, other) in [(*a, *b), (*b, *a)] {
                    if self.needs(v) {
                        let od = self.value(other).data();
                        for ((x, &y), &o) in self.grad_buf(grads, v).iter_mut().zip(g).zip(od) {
                            *x = *x + y * o;
                        }
                    }
                }
            }
            Op::ScaleRowsTiled(a, w) => {
                let n = out.cols();
                let wd = self.value(*w).data();
                let wl = wd.len();
                if self.needs(*a) {
                    let buf = self.grad_buf(grads, *a);
                    for (r, (brow, grow)) in buf.chunks_mut(n).zip(g.chunks(n)).enumerate() {
                        let s = wd[r % wl];
                        for (x, &y) in brow.iter_mut().zip(grow) {
                            *x = *x + y * s;
                        }
                    }
                }
                if self.needs(*w) {
                    let ad = self.value(*a).data();
                    let buf = self.grad_buf(grads, *w);
                    for (r, (arow, grow)) in ad.chunks(n).zip(g.chunks(n)).enumerate() {
                        let dot: R = arow.iter().zip(grow).map(|(&x, &y)| x * y).sum();
                        buf[r % wl] = buf[r % wl] + dot;
                    }
                }
            }
            Op::Elu(a) => {
                let xd = self.value(*a).data();
                for ((x, &y), &inp) in self.grad_buf(grads, *a).iter_mut().zip(g).zip(xd) {
                    let d = if inp > R::zero() { R::one() } else { inp.exp() };
                    *x = *x + y * d;
                }
            }
            Op::Sigmoid(a) => {
                for ((x, &y), &s) in self.grad_buf(grads, *a).iter_mut().zip(g).zip(out.data()) {
                    *x = *x + y * s * (R::one() - s);
                }
            }
            Op::Tanh(a) => {
                for ((x, &y), &t) in self.grad_buf(grads, *a).iter_mut().zip(g).zip(out.data()) {
                    *x = *x + y * (R::one() - t * t);
                }
            }
            Op::SliceCols(a, start) => {
                let (len, n) = (out.cols(), self.dims(*a).1);
                let buf = self.grad_buf(grads, *a);
                for (brow, grow) in buf.chunks_mut(n).zip(g.chunks(len)) {
                    add_into(&mut brow[*start..*start + len], grow);
                }
            }
            Op::ConcatCols(parts) => {
                let total = out.cols();
                let mut off = 0;
                for &p in parts {
                    let w = self.dims(p).1;
                    if self.needs(p) {
                        let buf = self.grad_buf(grads, p);
                        for (brow, grow) in buf.chunks_mut(w).zip(g.chunks(total)) {
                            add_into(brow, &grow[off..off + w]);
                        }
                    }
                    off += w;
                }
            }
            Op::Reshape(a) => add_into(self.grad_buf(grads, *a), g),
            Op::Aggregate(adj, f) => {
                let (m, d) = self.dims(*f);
                let n = adj.rows();
                let buf = self.grad_buf(grads, *f);
                for b in 0..m / n {
                    let span = b * n * d..(b + 1) * n * d;
                    R::gemm(
                        n,
                        n,
                        d,
                        adj.as_slice(),
                        true,
                        &g[span.clone()],
                        false,
                        R::one(),
                        &mut buf[span],
                    );
                }
            }
            Op::MeanBlocks(a, block) => {
                let n = out.cols();
                let inv = R::one() / R::from_usize_lossy(*block);
                let buf = self.grad_buf(grads, *a);
                for (r, brow) in buf.chunks_mut(n).enumerate() {
                    let grow = &g[(r / block) * n..(r / block + 1) * n];
                    for (x, &y) in brow.iter_mut().zip(grow) {
                        *x = *x + y * inv;
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                let n = out.cols();
                let buf = self.grad_buf(grads, *a);
                for ((brow, grow), yrow) in
                    buf.chunks_mut(n).zip(g.chunks(n)).zip(out.data().chunks(n))
                {
                    let dot: R = grow.iter().zip(yrow).map(|(&x, &y)| x * y).sum();
                    for ((x, &gy), &y) in brow.iter_mut().zip(grow).zip(yrow) {
                        *x = *x + y * (gy - dot);
                    }
                }
            }
            Op::Focal {
                probs,
                labels,
                gamma,
                omega,
            } => {
                let n = self.dims(*probs).1;
                let pd = self.value(*probs).data();
                let scale = g[0] / R::from_usize_lossy(labels.len());
                let buf = self.grad_buf(grads, *probs);
                for (r, &l) in labels.iter().enumerate() {
                    let d = super::loss::focal_loss_derivative(pd[r * n + l], *gamma, *omega);
                    buf[r * n + l] = buf[r * n + l] + scale * d;
                }
            }
        }
    }

    #[allow(clippy::mut_from_ref)]
    fn grad_buf<'g>(&self, grads: &'g mut [Option<Vec<R>>], v: Var) -> &'g mut [R] {
        let n = self.value(v).numel();
        grads[v.0].get_or_insert_with(|| vec![R::zero(); n])
    }
}

fn add_into<R: Real>(dst: &mut [R], src: &[R]) {
    for (x, &y) in dst.iter_mut().zip(src) {
        *x = *x + y;
    }
}

pub(crate) fn elu_scalar<R: Real>(x: R) -> R {
    if x > R::zero() {
        x
    } else {
        x.exp_m1()
    }
}

pub(crate) fn sigmoid_scalar<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

/// Max-subtracted softmax of one row.
pub fn softmax_slice<R: Real>(x: &[R]) -> Vec<R> {
    let mx = x.iter().copied().fold(R::neg_infinity(), R::max);
    let e: Vec<R> = x.iter().map(|&v| (v - mx).exp()).collect();
    let s: R = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

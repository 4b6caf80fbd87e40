//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] owns every value produced during a forward pass. Operations
//! append nodes in creation order, so node ids already form a topological
//! order and [`Tape::backward`] is a single reverse sweep. A tape supports
//! exactly one backward pass; build a fresh tape for every forward.
//!
//! Kernels route their row loops through [`Exec`], so the same tape code runs
//! sequentially or on the rayon pool with bit-identical results.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::{Exec, REDUCE_CHUNK};

use super::matrix::Matrix;
use super::segment::SegmentIndex;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tensor {
    id: usize,
    rows: usize,
    cols: usize,
}

impl Tensor {
    #[inline]
    pub fn id(self) -> usize {
        self.id
    }

    #[inline]
    pub fn rows(self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Tensor, Tensor),
    Add(Tensor, Tensor),
    AddBias(Tensor, Tensor),
    Scale(Tensor, f64),
    Relu(Tensor),
    LeakyRelu(Tensor, f64),
    SoftmaxRows(Tensor),
    LogSoftmaxRows(Tensor),
    L2Normalize(Tensor, f64),
    GatherRows(Tensor, Arc<[usize]>),
    ConcatRows(Vec<Tensor>),
    Reshape(Tensor),
    SegmentMean(Tensor, Arc<SegmentIndex>),
    SegmentWeightedSum(Tensor, Arc<SegmentIndex>, Tensor),
    ClusterMean {
        lower: Tensor,
        upper: Tensor,
        idx: Arc<SegmentIndex>,
    },
    PairDot(Tensor, Arc<[(usize, usize)]>),
    Sum(Tensor),
    CrossEntropy {
        logits: Tensor,
        targets: Arc<[usize]>,
        mask: Arc<[usize]>,
    },
    BceWithLogits(Tensor, Arc<[f64]>),
}

#[derive(Debug)]
struct Node {
    value: Arc<Matrix>,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
    exec: Exec,
    consumed: bool,
}

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite input to {what}")))
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Tape {
    pub fn new(exec: Exec) -> Self {
        Self {
            exec,
            ..Self::default()
        }
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push_shared(&mut self, value: Arc<Matrix>, op: Op, requires_grad: bool) -> Tensor {
        let t = Tensor {
            id: self.nodes.len(),
            rows: value.rows(),
            cols: value.cols(),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        t
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Tensor {
        self.push_shared(Arc::new(value), op, requires_grad)
    }

    #[inline]
    fn rg(&self, t: Tensor) -> bool {
        self.nodes[t.id].requires_grad
    }

    #[inline]
    pub fn value(&self, t: Tensor) -> &Matrix {
        &self.nodes[t.id].value
    }

    /// Gradient of the last backward target with respect to `t`, if any
    /// gradient reached it.
    pub fn grad(&self, t: Tensor) -> Option<&Matrix> {
        self.grads.get(t.id).and_then(Option::as_ref)
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.rg(t)
    }

    /// Records a leaf value.
    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Tensor {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Records a constant leaf without copying its storage.
    pub fn constant(&mut self, value: Arc<Matrix>) -> Tensor {
        self.push_shared(value, Op::Leaf, false)
    }

    /// `A · B`. Zero entries of `A` are skipped, which keeps one-hot and
    /// bag-of-words feature inputs cheap without a separate sparse type.
    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        if a.cols != b.rows {
            return Err(Error::Shape(format!(
                "matmul {}x{} by {}x{}",
                a.rows, a.cols, b.rows, b.cols
            )));
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = Matrix::zeros(a.rows, b.cols);
        self.exec
            .for_each_row(out.as_mut_slice(), b.cols, |i, row| {
                for (k, &x) in av.row(i).iter().enumerate() {
                    if x != 0.0 {
                        axpy(row, x, bv.row(k));
                    }
                }
            });
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        if a.shape() != b.shape() {
            return Err(Error::Shape(format!(
                "add {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// Adds a `1 x cols` row to every row of `x`.
    pub fn add_bias(&mut self, x: Tensor, bias: Tensor) -> Result<Tensor> {
        if bias.rows != 1 || bias.cols != x.cols {
            return Err(Error::Shape(format!(
                "bias {:?} for input {:?}",
                bias.shape(),
                x.shape()
            )));
        }
        let mut out = self.value(x).clone();
        let b = self.value(bias).as_slice();
        for r in 0..out.rows() {
            for (o, bi) in out.row_mut(r).iter_mut().zip(b) {
                *o += bi;
            }
        }
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(out, Op::AddBias(x, bias), rg))
    }

    pub fn scale(&mut self, x: Tensor, factor: f64) -> Tensor {
        let mut out = self.value(x).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        let rg = self.rg(x);
        self.push(out, Op::Scale(x, factor), rg)
    }

    pub fn relu(&mut self, x: Tensor) -> Result<Tensor> {
        check_finite(self.value(x), "relu")?;
        let mut out = self.value(x).clone();
        out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        let rg = self.rg(x);
        Ok(self.push(out, Op::Relu(x), rg))
    }

    pub fn leaky_relu(&mut self, x: Tensor, slope: f64) -> Result<Tensor> {
        check_finite(self.value(x), "leaky_relu")?;
        let mut out = self.value(x).clone();
        out.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = if *v > 0.0 { *v } else { slope * *v });
        let rg = self.rg(x);
        Ok(self.push(out, Op::LeakyRelu(x, slope), rg))
    }

    pub fn softmax_rows(&mut self, x: Tensor) -> Result<Tensor> {
        let xv = self.value(x);
        check_finite(xv, "softmax_rows")?;
        let mut out = Matrix::zeros(x.rows, x.cols);
        self.exec
            .for_each_row(out.as_mut_slice(), x.cols, |r, row| {
                let src = xv.row(r);
                let lse = log_sum_exp(src);
                for (o, v) in row.iter_mut().zip(src) {
                    *o = (v - lse).exp();
                }
            });
        let rg = self.rg(x);
        Ok(self.push(out, Op::SoftmaxRows(x), rg))
    }

    pub fn log_softmax_rows(&mut self, x: Tensor) -> Result<Tensor> {
        let xv = self.value(x);
        check_finite(xv, "log_softmax_rows")?;
        let mut out = Matrix::zeros(x.rows, x.cols);
        self.exec
            .for_each_row(out.as_mut_slice(), x.cols, |r, row| {
                let src = xv.row(r);
                let lse = log_sum_exp(src);
                for (o, v) in row.iter_mut().zip(src) {
                    *o = v - lse;
                }
            });
        let rg = self.rg(x);
        Ok(self.push(out, Op::LogSoftmaxRows(x), rg))
    }

    /// Divides each row by `max(‖row‖₂, eps)`.
    pub fn l2_normalize_rows(&mut self, x: Tensor, eps: f64) -> Result<Tensor> {
        let xv = self.value(x);
        check_finite(xv, "l2_normalize_rows")?;
        let mut out = Matrix::zeros(x.rows, x.cols);
        self.exec
            .for_each_row(out.as_mut_slice(), x.cols, |r, row| {
                let src = xv.row(r);
                let norm = dot(src, src).sqrt().max(eps);
                for (o, v) in row.iter_mut().zip(src) {
                    *o = v / norm;
                }
            });
        let rg = self.rg(x);
        Ok(self.push(out, Op::L2Normalize(x, eps), rg))
    }

    pub fn gather_rows(&mut self, x: Tensor, idx: Arc<[usize]>) -> Result<Tensor> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows) {
            return Err(Error::Index(format!(
                "gather row {bad} from {} rows",
                x.rows
            )));
        }
        let out = self.value(x).select_rows(&idx);
        let rg = self.rg(x);
        Ok(self.push(out, Op::GatherRows(x, idx), rg))
    }

    pub fn concat_rows(&mut self, parts: &[Tensor]) -> Result<Tensor> {
        let cols = parts.first().map_or(0, |p| p.cols);
        if parts.iter().any(|p| p.cols != cols) {
            return Err(Error::Shape(
                "concat_rows with differing column counts".into(),
            ));
        }
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.rows * cols).sum());
        for p in parts {
            data.extend_from_slice(self.value(*p).as_slice());
        }
        let rows = parts.iter().map(|p| p.rows).sum();
        let out = Matrix::from_vec(rows, cols, data)?;
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), rg))
    }

    pub fn reshape(&mut self, x: Tensor, rows: usize, cols: usize) -> Result<Tensor> {
        if rows * cols != x.rows * x.cols {
            return Err(Error::Shape(format!(
                "reshape {:?} to ({rows}, {cols})",
                x.shape()
            )));
        }
        let out = Matrix::from_vec(rows, cols, self.value(x).as_slice().to_vec())?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    /// Row `g` of the output is the mean of the rows of `x` in segment `g`.
    pub fn segment_mean(&mut self, x: Tensor, idx: Arc<SegmentIndex>) -> Result<Tensor> {
        if idx.num_inputs() != x.rows {
            return Err(Error::Shape(format!(
                "segment index over {} rows applied to {} rows",
                idx.num_inputs(),
                x.rows
            )));
        }
        if let Some(g) = idx.first_empty_segment() {
            return Err(Error::Index(format!("segment {g} is empty")));
        }
        let xv = self.value(x);
        let mut out = Matrix::zeros(idx.num_segments(), x.cols);
        self.exec
            .for_each_row(out.as_mut_slice(), x.cols, |g, row| {
                let seg = idx.segment(g);
                for &m in seg {
                    axpy(row, 1.0, xv.row(m));
                }
                let inv = 1.0 / seg.len() as f64;
                row.iter_mut().for_each(|v| *v *= inv);
            });
        let rg = self.rg(x);
        Ok(self.push(out, Op::SegmentMean(x, idx), rg))
    }

    /// Row `g` of the output is `Σ_p weights[p] · x[member_p]` over the
    /// entries `p` of segment `g`; `weights` is a column with one entry per
    /// (segment, member) pair.
    pub fn segment_weighted_sum(
        &mut self,
        x: Tensor,
        idx: Arc<SegmentIndex>,
        weights: Tensor,
    ) -> Result<Tensor> {
        if idx.num_inputs() != x.rows {
            return Err(Error::Shape(format!(
                "segment index over {} rows applied to {} rows",
                idx.num_inputs(),
                x.rows
            )));
        }
        if weights.cols != 1 || weights.rows != idx.num_entries() {
            return Err(Error::Shape(format!(
                "{:?} weights for {} segment entries",
                weights.shape(),
                idx.num_entries()
            )));
        }
        let xv = self.value(x);
        let wv = self.value(weights).as_slice();
        let members = idx.members();
        let mut out = Matrix::zeros(idx.num_segments(), x.cols);
        self.exec
            .for_each_row(out.as_mut_slice(), x.cols, |g, row| {
                for p in idx.entry_range(g) {
                    axpy(row, wv[p], xv.row(members[p]));
                }
            });
        let rg = self.rg(x) || self.rg(weights);
        Ok(self.push(out, Op::SegmentWeightedSum(x, idx, weights), rg))
    }

    /// Parent-cluster averaging: row `c` is the mean of `upper[c]` together
    /// with the rows of `lower` that `idx` lists as children of `c`.
    pub fn cluster_mean(
        &mut self,
        lower: Tensor,
        upper: Tensor,
        idx: Arc<SegmentIndex>,
    ) -> Result<Tensor> {
        if lower.cols != upper.cols
            || idx.num_inputs() != lower.rows
            || idx.num_segments() != upper.rows
        {
            return Err(Error::Shape(format!(
                "cluster mean of lower {:?} / upper {:?} with {} segments over {} rows",
                lower.shape(),
                upper.shape(),
                idx.num_segments(),
                idx.num_inputs()
            )));
        }
        if let Some(g) = idx.first_empty_segment() {
            return Err(Error::Hierarchy(format!("cluster {g} has no children")));
        }
        let lv = self.value(lower);
        let uv = self.value(upper);
        let mut out = Matrix::zeros(upper.rows, upper.cols);
        self.exec
            .for_each_row(out.as_mut_slice(), upper.cols, |c, row| {
                let seg = idx.segment(c);
                for &m in seg {
                    axpy(row, 1.0, lv.row(m));
                }
                axpy(row, 1.0, uv.row(c));
                let inv = 1.0 / (seg.len() + 1) as f64;
                row.iter_mut().for_each(|v| *v *= inv);
            });
        let rg = self.rg(lower) || self.rg(upper);
        Ok(self.push(out, Op::ClusterMean { lower, upper, idx }, rg))
    }

    /// Column of inner products `z[a] · z[b]` for each pair.
    pub fn pair_dot(&mut self, z: Tensor, pairs: Arc<[(usize, usize)]>) -> Result<Tensor> {
        if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= z.rows || b >= z.rows) {
            return Err(Error::Index(format!(
                "pair ({a}, {b}) out of range for {} rows",
                z.rows
            )));
        }
        let zv = self.value(z);
        let mut out = Matrix::zeros(pairs.len(), 1);
        self.exec.for_each_row(out.as_mut_slice(), 1, |p, o| {
            let (a, b) = pairs[p];
            o[0] = dot(zv.row(a), zv.row(b));
        });
        let rg = self.rg(z);
        Ok(self.push(out, Op::PairDot(z, pairs), rg))
    }

    pub fn sum(&mut self, x: Tensor) -> Tensor {
        let s = self.value(x).as_slice().iter().sum();
        let rg = self.rg(x);
        self.push(Matrix::scalar(s), Op::Sum(x), rg)
    }

    /// Mean over `mask` of `-log softmax(logits[v])[targets[v]]`.
    pub fn cross_entropy(
        &mut self,
        logits: Tensor,
        targets: Arc<[usize]>,
        mask: Arc<[usize]>,
    ) -> Result<Tensor> {
        if mask.is_empty() {
            return Err(Error::Usage("cross entropy over an empty mask".into()));
        }
        let lv = self.value(logits);
        check_finite(lv, "cross_entropy")?;
        let mut total = 0.0;
        for &v in mask.iter() {
            if v >= logits.rows || v >= targets.len() {
                return Err(Error::Index(format!("mask row {v} out of range")));
            }
            let y = targets[v];
            if y >= logits.cols {
                return Err(Error::Index(format!(
                    "target class {y} out of range for {} classes",
                    logits.cols
                )));
            }
            let row = lv.row(v);
            total += log_sum_exp(row) - row[y];
        }
        let loss = total / mask.len() as f64;
        let rg = self.rg(logits);
        Ok(self.push(
            Matrix::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets,
                mask,
            },
            rg,
        ))
    }

    /// Mean binary cross entropy of `sigmoid(scores)` against 0/1 labels.
    pub fn bce_with_logits(&mut self, scores: Tensor, labels: Arc<[f64]>) -> Result<Tensor> {
        let sv = self.value(scores);
        if sv.as_slice().len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} scores for {} labels",
                sv.as_slice().len(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Usage("binary cross entropy over no samples".into()));
        }
        check_finite(sv, "bce_with_logits")?;
        let total: f64 = sv
            .as_slice()
            .iter()
            .zip(labels.iter())
            .map(|(&s, &y)| s.max(0.0) - s * y + (-s.abs()).exp().ln_1p())
            .sum();
        let loss = total / labels.len() as f64;
        let rg = self.rg(scores);
        Ok(self.push(Matrix::scalar(loss), Op::BceWithLogits(scores, labels), rg))
    }

    /// Back-propagates from a scalar `loss`. Gradients are then available
    /// through [`Tape::grad`]. A tape can only be differentiated once.
    pub fn backward(&mut self, loss: Tensor) -> Result<()> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if loss.shape() != (1, 1) {
            return Err(Error::Shape(format!(
                "backward needs a scalar, got {:?}",
                loss.shape()
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        if self.rg(loss) {
            grads[loss.id] = Some(Matrix::scalar(1.0));
        }
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], t: Tensor, contrib: Matrix) {
        if !self.rg(t) {
            return;
        }
        match &mut grads[t.id] {
            Some(g) => g.add_assign(&contrib),
            slot @ None => *slot = Some(contrib),
        }
    }

    fn propagate(&self, id: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let exec = self.exec;
        let node = &self.nodes[id];
        let out = &*node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                if self.rg(*a) {
                    let mut da = Matrix::zeros(a.rows, a.cols);
                    exec.for_each_row(da.as_mut_slice(), a.cols, |i, row| {
                        let gi = g.row(i);
                        for (k, d) in row.iter_mut().enumerate() {
                            *d = dot(gi, bv.row(k));
                        }
                    });
                    self.accumulate(grads, *a, da);
                }
                if self.rg(*b) {
                    let partials = exec.map_chunks(a.rows, REDUCE_CHUNK, |range| {
                        let mut part = Matrix::zeros(b.rows, b.cols);
                        for i in range {
                            let gi = g.row(i);
                            for (k, &x) in av.row(i).iter().enumerate() {
                                if x != 0.0 {
                                    axpy(part.row_mut(k), x, gi);
                                }
                            }
                        }
                        part
                    });
                    let mut db = Matrix::zeros(b.rows, b.cols);
                    for p in &partials {
                        db.add_assign(p);
                    }
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::AddBias(x, bias) => {
                self.accumulate(grads, *x, g.clone());
                if self.rg(*bias) {
                    let mut db = Matrix::zeros(1, bias.cols);
                    for r in 0..g.rows() {
                        axpy(db.as_mut_slice(), 1.0, g.row(r));
                    }
                    self.accumulate(grads, *bias, db);
                }
            }
            Op::Scale(x, factor) => {
                let mut dx = g.clone();
                dx.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
                self.accumulate(grads, *x, dx);
            }
            Op::Relu(x) => {
                let xv = self.value(*x).as_slice();
                let mut dx = g.clone();
                for (d, &v) in dx.as_mut_slice().iter_mut().zip(xv) {
                    if v <= 0.0 {
                        *d = 0.0;
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::LeakyRelu(x, slope) => {
                let xv = self.value(*x).as_slice();
                let mut dx = g.clone();
                for (d, &v) in dx.as_mut_slice().iter_mut().zip(xv) {
                    if v <= 0.0 {
                        *d *= slope;
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::SoftmaxRows(x) => {
                let mut dx = Matrix::zeros(x.rows, x.cols);
                exec.for_each_row(dx.as_mut_slice(), x.cols, |r, row| {
                    let y = out.row(r);
                    let gy = g.row(r);
                    let s = dot(y, gy);
                    for ((d, yi), gi) in row.iter_mut().zip(y).zip(gy) {
                        *d = yi * (gi - s);
                    }
                });
                self.accumulate(grads, *x, dx);
            }
            Op::LogSoftmaxRows(x) => {
                let mut dx = Matrix::zeros(x.rows, x.cols);
                exec.for_each_row(dx.as_mut_slice(), x.cols, |r, row| {
                    let y = out.row(r);
                    let gy = g.row(r);
                    let s: f64 = gy.iter().sum();
                    for ((d, yi), gi) in row.iter_mut().zip(y).zip(gy) {
                        *d = gi - yi.exp() * s;
                    }
                });
                self.accumulate(grads, *x, dx);
            }
            Op::L2Normalize(x, eps) => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(x.rows, x.cols);
                exec.for_each_row(dx.as_mut_slice(), x.cols, |r, row| {
                    let src = xv.row(r);
                    let norm = dot(src, src).sqrt();
                    let gy = g.row(r);
                    if norm > *eps {
                        let y = out.row(r);
                        let s = dot(y, gy);
                        for ((d, yi), gi) in row.iter_mut().zip(y).zip(gy) {
                            *d = (gi - yi * s) / norm;
                        }
                    } else {
                        for (d, gi) in row.iter_mut().zip(gy) {
                            *d = gi / eps;
                        }
                    }
                });
                self.accumulate(grads, *x, dx);
            }
            Op::GatherRows(x, idx) => {
                if self.rg(*x) {
                    let mut dx = Matrix::zeros(x.rows, x.cols);
                    for (r, &i) in idx.iter().enumerate() {
                        axpy(dx.row_mut(i), 1.0, g.row(r));
                    }
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = p.rows * p.cols;
                    if self.rg(*p) {
                        let slice = g.as_slice()[offset..offset + len].to_vec();
                        let dp =
                            Matrix::from_vec(p.rows, p.cols, slice).expect("concat part shape");
                        self.accumulate(grads, *p, dp);
                    }
                    offset += len;
                }
            }
            Op::Reshape(x) => {
                let dx =
                    Matrix::from_vec(x.rows, x.cols, g.as_slice().to_vec()).expect("reshape shape");
                self.accumulate(grads, *x, dx);
            }
            Op::SegmentMean(x, idx) => {
                if self.rg(*x) {
                    let members = idx.members();
                    let mut dx = Matrix::zeros(x.rows, x.cols);
                    exec.for_each_row(dx.as_mut_slice(), x.cols, |i, row| {
                        for &p in idx.entries_of_input(i) {
                            let s = idx.segment_of_entry(p);
                            let len = idx.entry_range(s).len() as f64;
                            debug_assert_eq!(members[p], i);
                            axpy(row, 1.0 / len, g.row(s));
                        }
                    });
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::SegmentWeightedSum(x, idx, w) => {
                let xv = self.value(*x);
                let wv = self.value(*w).as_slice();
                if self.rg(*x) {
                    let mut dx = Matrix::zeros(x.rows, x.cols);
                    exec.for_each_row(dx.as_mut_slice(), x.cols, |i, row| {
                        for &p in idx.entries_of_input(i) {
                            axpy(row, wv[p], g.row(idx.segment_of_entry(p)));
                        }
                    });
                    self.accumulate(grads, *x, dx);
                }
                if self.rg(*w) {
                    let members = idx.members();
                    let mut dw = Matrix::zeros(w.rows, 1);
                    exec.for_each_row(dw.as_mut_slice(), 1, |p, d| {
                        d[0] = dot(g.row(idx.segment_of_entry(p)), xv.row(members[p]));
                    });
                    self.accumulate(grads, *w, dw);
                }
            }
            Op::ClusterMean { lower, upper, idx } => {
                if self.rg(*lower) {
                    let mut dl = Matrix::zeros(lower.rows, lower.cols);
                    exec.for_each_row(dl.as_mut_slice(), lower.cols, |i, row| {
                        for &p in idx.entries_of_input(i) {
                            let c = idx.segment_of_entry(p);
                            let inv = 1.0 / (idx.entry_range(c).len() + 1) as f64;
                            axpy(row, inv, g.row(c));
                        }
                    });
                    self.accumulate(grads, *lower, dl);
                }
                if self.rg(*upper) {
                    let mut du = g.clone();
                    for c in 0..upper.rows {
                        let inv = 1.0 / (idx.entry_range(c).len() + 1) as f64;
                        du.row_mut(c).iter_mut().for_each(|v| *v *= inv);
                    }
                    self.accumulate(grads, *upper, du);
                }
            }
            Op::PairDot(z, pairs) => {
                if self.rg(*z) {
                    let zv = self.value(*z);
                    let mut dz = Matrix::zeros(z.rows, z.cols);
                    for (p, &(a, b)) in pairs.iter().enumerate() {
                        let gp = g.as_slice()[p];
                        let (ra, rb) = (zv.row(a).to_vec(), zv.row(b).to_vec());
                        axpy(dz.row_mut(a), gp, &rb);
                        axpy(dz.row_mut(b), gp, &ra);
                    }
                    self.accumulate(grads, *z, dz);
                }
            }
            Op::Sum(x) => {
                self.accumulate(grads, *x, Matrix::filled(x.rows, x.cols, g.item()));
            }
            Op::CrossEntropy {
                logits,
                targets,
                mask,
            } => {
                let lv = self.value(*logits);
                let scale = g.item() / mask.len() as f64;
                let mut dl = Matrix::zeros(logits.rows, logits.cols);
                for &v in mask.iter() {
                    let row = lv.row(v);
                    let lse = log_sum_exp(row);
                    let drow = dl.row_mut(v);
                    for (d, x) in drow.iter_mut().zip(row) {
                        *d += (x - lse).exp() * scale;
                    }
                    drow[targets[v]] -= scale;
                }
                self.accumulate(grads, *logits, dl);
            }
            Op::BceWithLogits(scores, labels) => {
                let sv = self.value(*scores);
                let scale = g.item() / labels.len() as f64;
                let data = sv
                    .as_slice()
                    .iter()
                    .zip(labels.iter())
                    .map(|(&s, &y)| (sigmoid(s) - y) * scale)
                    .collect();
                let ds = Matrix::from_vec(scores.rows, scores.cols, data).expect("bce shape");
                self.accumulate(grads, *scores, ds);
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::tensor::{Matrix, SegmentIndex, Tape, Tensor};

use super::{HcGnnModel, HierarchyPlan};

/// Parameters of one layer recorded on a tape.
#[derive(Debug, Clone)]
pub struct BoundLayer {
    pub w_within: Vec<Tensor>,
    pub w_topdown: Tensor,
    pub att: Tensor,
    att_self: Tensor,
    att_other: Tensor,
}

impl BoundLayer {
    /// Within-level weight for level `k`.
    fn within(&self, k: usize) -> Result<Tensor> {
        match self.w_within.len() {
            1 => Ok(self.w_within[0]),
            n if k < n => Ok(self.w_within[k]),
            n => Err(Error::Shape(format!(
                "model has within-level weights for {n} levels, hierarchy needs level {}",
                k + 1
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundModel {
    pub layers: Vec<BoundLayer>,
    slope: f64,
    eps: f64,
}

impl BoundModel {
    pub(super) fn new(model: &HcGnnModel, tape: &mut Tape, trainable: bool) -> Result<Self> {
        let d = model.embed_dim();
        let first: Arc<[usize]> = (0..d).collect();
        let second: Arc<[usize]> = (d..2 * d).collect();
        let mut layers = Vec::with_capacity(model.layers.len());
        for l in &model.layers {
            let w_within = l
                .w_within
                .iter()
                .map(|w| tape.leaf(w.clone(), trainable))
                .collect();
            let w_topdown = tape.leaf(l.w_topdown.clone(), trainable);
            let att = tape.leaf(l.att.clone(), trainable);
            let att_self = tape.gather_rows(att, first.clone())?;
            let att_other = tape.gather_rows(att, second.clone())?;
            layers.push(BoundLayer {
                w_within,
                w_topdown,
                att,
                att_self,
                att_other,
            });
        }
        Ok(Self {
            layers,
            slope: model.config.leaky_slope,
            eps: model.config.norm_eps,
        })
    }

    /// Tensors in [`HcGnnModel::params`] order.
    pub fn params(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.w_within.iter().copied());
            out.push(l.w_topdown);
            out.push(l.att);
        }
        out
    }
}

/// Initial state of every level: features for base nodes, zero rows of the
/// same width for clusters.
#[derive(Debug, Clone)]
pub struct LevelState {
    pub levels: Vec<Arc<Matrix>>,
}

pub fn init_states(features: &Arc<Matrix>, plan: &HierarchyPlan) -> Result<LevelState> {
    if features.rows() != plan.num_nodes() {
        return Err(Error::Shape(format!(
            "{} feature rows for a hierarchy over {} nodes",
            features.rows(),
            plan.num_nodes()
        )));
    }
    let pi = features.cols();
    let mut levels = vec![features.clone()];
    levels.extend(
        plan.level_sizes()[1..]
            .iter()
            .map(|&s| Arc::new(Matrix::zeros(s, pi))),
    );
    Ok(LevelState { levels })
}

/// Bottom-up step. Level 0 passes through; each higher level averages its
/// children (already updated) with its own previous state.
pub fn bottom_up(tape: &mut Tape, plan: &HierarchyPlan, h: &[Tensor]) -> Result<Vec<Tensor>> {
    if h.len() != plan.num_levels() {
        return Err(Error::Shape(format!(
            "{} level states for {} levels",
            h.len(),
            plan.num_levels()
        )));
    }
    let mut a = Vec::with_capacity(h.len());
    a.push(h[0]);
    for k in 1..h.len() {
        let next = tape.cluster_mean(a[k - 1], h[k], plan.children(k).clone())?;
        a.push(next);
    }
    Ok(a)
}

/// Within-level step: closed-neighborhood mean followed by the level's
/// weight. The projection is applied first, which is equivalent and cheaper
/// for wide inputs.
pub fn within_level(
    tape: &mut Tape,
    plan: &HierarchyPlan,
    a: &[Tensor],
    layer: &BoundLayer,
) -> Result<Vec<Tensor>> {
    a.iter()
        .enumerate()
        .map(|(k, &ak)| {
            let p = tape.matmul(ak, layer.within(k)?)?;
            tape.segment_mean(p, plan.neighborhoods(k).clone())
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct TopDown {
    /// Base-node output, after the activation.
    pub out: Tensor,
    /// Attention weights, one row per base node over itself then its
    /// ancestors from the lowest level up.
    pub attention: Tensor,
}

/// Top-down step: attention over each base node and its ancestors, weighted
/// sum of their projected states, then ReLU (hidden layers) or row-wise L2
/// normalization (last layer).
pub fn top_down(
    tape: &mut Tape,
    plan: &HierarchyPlan,
    b: &[Tensor],
    layer: &BoundLayer,
    slope: f64,
    eps: f64,
    is_last: bool,
) -> Result<TopDown> {
    let k = plan.num_levels();
    if b.len() != k {
        return Err(Error::Hierarchy(format!(
            "{} level states for attention over {k} levels",
            b.len()
        )));
    }
    let y: Vec<Tensor> = b
        .iter()
        .map(|&bk| tape.matmul(bk, layer.w_topdown))
        .collect::<Result<_>>()?;
    let stacked = if k == 1 { y[0] } else { tape.concat_rows(&y)? };
    let n = plan.num_nodes();

    let s_self = tape.matmul(y[0], layer.att_self)?;
    let s_other = tape.matmul(stacked, layer.att_other)?;
    let idx = plan.attention();
    let members: Arc<[usize]> = idx.members().into();
    let lhs = tape.gather_rows(s_self, plan.owners().clone())?;
    let rhs = tape.gather_rows(s_other, members)?;
    let raw = tape.add(lhs, rhs)?;
    let scores = tape.leaky_relu(raw, slope)?;
    let grid = tape.reshape(scores, n, k)?;
    let alpha = tape.softmax_rows(grid)?;
    let weights = tape.reshape(alpha, n * k, 1)?;
    let mixed = tape.segment_weighted_sum(stacked, idx.clone(), weights)?;
    let out = if is_last {
        tape.l2_normalize_rows(mixed, eps)?
    } else {
        tape.relu(mixed)?
    };
    Ok(TopDown {
        out,
        attention: alpha,
    })
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Unit-norm base-node embeddings.
    pub z: Tensor,
    /// Unit-norm cluster embeddings for levels `1..K`.
    pub clusters: Vec<Tensor>,
    /// Attention matrix of every layer.
    pub attention: Vec<Tensor>,
}

pub fn forward(
    tape: &mut Tape,
    bound: &BoundModel,
    plan: &HierarchyPlan,
    features: &Arc<Matrix>,
) -> Result<ForwardOutput> {
    let state = init_states(features, plan)?;
    let mut h: Vec<Tensor> = state.levels.into_iter().map(|m| tape.constant(m)).collect();
    let mut attention = Vec::with_capacity(bound.layers.len());
    let mut last_b = Vec::new();
    let num_layers = bound.layers.len();
    for (l, layer) in bound.layers.iter().enumerate() {
        if tape.value(h[0]).cols() != tape.value(layer.w_within[0]).rows() {
            return Err(Error::Shape(format!(
                "layer {l} expects width {}, got {}",
                tape.value(layer.w_within[0]).rows(),
                tape.value(h[0]).cols()
            )));
        }
        let a = bottom_up(tape, plan, &h)?;
        let b = within_level(tape, plan, &a, layer)?;
        let td = top_down(
            tape,
            plan,
            &b,
            layer,
            bound.slope,
            bound.eps,
            l + 1 == num_layers,
        )?;
        attention.push(td.attention);
        h = std::iter::once(td.out)
            .chain(b[1..].iter().copied())
            .collect();
        last_b = b;
    }
    let clusters = last_b[1..]
        .iter()
        .map(|&bk| tape.l2_normalize_rows(bk, bound.eps))
        .collect::<Result<_>>()?;
    Ok(ForwardOutput {
        z: h[0],
        clusters,
        attention,
    })
}

/// Flat stack on the input graph only: closed-neighborhood mean, both
/// linear maps, ReLU between layers and L2 normalization at the end.
pub fn flat_baseline_forward(
    tape: &mut Tape,
    bound: &BoundModel,
    neighborhoods: &Arc<SegmentIndex>,
    features: &Arc<Matrix>,
) -> Result<Tensor> {
    if features.rows() != neighborhoods.num_segments() {
        return Err(Error::Shape("feature rows do not match the graph".into()));
    }
    let mut h = tape.constant(features.clone());
    let num_layers = bound.layers.len();
    for (l, layer) in bound.layers.iter().enumerate() {
        let p = tape.matmul(h, layer.within(0)?)?;
        let b = tape.segment_mean(p, neighborhoods.clone())?;
        let y = tape.matmul(b, layer.w_topdown)?;
        h = if l + 1 == num_layers {
            tape.l2_normalize_rows(y, bound.eps)?
        } else {
            tape.relu(y)?
        };
    }
    Ok(h)
}

/// Plain matrices from an inference-only forward pass.
#[derive(Debug, Clone)]
pub struct Embeddings {
    pub z: Matrix,
    pub clusters: Vec<Matrix>,
    pub attention: Vec<Matrix>,
}

impl HcGnnModel {
    pub fn embed(
        &self,
        plan: &HierarchyPlan,
        features: &Arc<Matrix>,
        exec: Exec,
    ) -> Result<Embeddings> {
        let mut tape = Tape::new(exec);
        let bound = self.bind(&mut tape, false)?;
        let out = forward(&mut tape, &bound, plan, features)?;
        Ok(Embeddings {
            z: tape.value(out.z).clone(),
            clusters: out
                .clusters
                .iter()
                .map(|&t| tape.value(t).clone())
                .collect(),
            attention: out
                .attention
                .iter()
                .map(|&t| tape.value(t).clone())
                .collect(),
        })
    }
}

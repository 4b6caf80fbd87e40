//! Training loops and evaluation for node classification, link prediction,
//! community detection and inductive multi-graph learning.
//!
//! All loops are full-batch. The metrics recorded for epoch `e` are computed
//! with the parameters *before* that epoch's update, and the parameters of
//! the best validation epoch (earliest on ties) are kept for testing.

mod inductive;
mod link;
pub mod metrics;
mod node;

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::graph::seeded_rng;
use crate::model::HcGnnModel;
use crate::tensor::{glorot_uniform, AdamConfig, Matrix};

pub use inductive::{train_inductive, InductiveGraph};
pub use link::{link_scores, train_link_prediction};
pub use metrics::{accuracy, auc, micro_macro_f1, multilabel_f1, nmi};
pub use node::{predict_logits, train_community_detection, train_node_classification};

const HEAD_STREAM: u64 = 0x41;

#[derive(Debug, Clone, Copy)]
pub struct RunContext {
    pub seed: u64,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub exec: Exec,
}

impl RunContext {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            epochs: 200,
            adam: AdamConfig::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    NodeClass,
    LinkPred,
    Community,
    Inductive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
}

/// Test-set metrics; fields that do not apply to a task are `null`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub micro_f1: Option<f64>,
    pub macro_f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    pub nmi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub task: TaskKind,
    pub seed: u64,
    /// Name of the validation metric used for model selection.
    pub val_metric: String,
    pub epochs: Vec<EpochRecord>,
    pub selected_epoch: usize,
    pub best_val: f64,
    pub test: TestMetrics,
    /// Node count per hierarchy level, per graph.
    pub level_sizes: Vec<Vec<usize>>,
    /// Set when the labels make the task trivial (a single class).
    pub degenerate: bool,
    /// Excluded from serialization so reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// Linear classification layer applied to the final embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub w: Matrix,
    pub b: Matrix,
}

impl ClassifierHead {
    pub fn new(dim: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, HEAD_STREAM);
        Self {
            w: glorot_uniform(dim, outputs, &mut rng),
            b: Matrix::zeros(1, outputs),
        }
    }
}

/// Report plus the selected parameters.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: HcGnnModel,
    pub head: Option<ClassifierHead>,
}

/// Tracks the best validation epoch.
struct Selection<T> {
    best: Option<(usize, f64, T)>,
}

impl<T> Selection<T> {
    fn new() -> Self {
        Self { best: None }
    }

    /// Keeps `snapshot()` when `val` beats every earlier epoch.
    fn offer(&mut self, epoch: usize, val: f64, snapshot: impl FnOnce() -> T) {
        let better = match &self.best {
            None => true,
            Some((_, b, _)) => val > *b,
        };
        if better {
            self.best = Some((epoch, val, snapshot()));
        }
    }

    fn take(self) -> Option<(usize, f64, T)> {
        self.best
    }
}

fn check_epochs(ctx: &RunContext) -> crate::Result<()> {
    if ctx.epochs == 0 {
        return Err(crate::Error::Usage("at least one epoch is required".into()));
    }
    Ok(())
}

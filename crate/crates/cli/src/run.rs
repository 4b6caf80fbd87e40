//! Dataset loading and single-seed runs.

use hcgnn::graph::{
    generate_grid, load_graph_files, load_multi_graph, one_hot_features, remove_edges,
    sample_semi_supervised, sample_supervised_fraction, split_links, AttributedGraph, NodeSplit,
    RemovalMode,
};
use hcgnn::hierarchy::{build_hierarchy, Hierarchy, HierarchyConfig};
use hcgnn::model::{HcGnnModel, HierarchyPlan};
use hcgnn::tasks::{
    train_community_detection, train_inductive, train_link_prediction, train_node_classification,
    InductiveGraph, RunContext, TrainOutcome, TrainReport,
};
use hcgnn::{Error, Exec};
use serde::{Deserialize, Serialize};

use crate::config::{DatasetConfig, ExperimentConfig, SplitMode, Task};
use crate::error::CliError;

#[derive(Debug, Clone)]
pub enum Dataset {
    Single(AttributedGraph),
    Multi(Vec<(AttributedGraph, hcgnn::graph::GraphRole)>),
}

impl Dataset {
    pub fn single(&self) -> Result<&AttributedGraph, CliError> {
        match self {
            Dataset::Single(g) => Ok(g),
            Dataset::Multi(_) => Err(Error::Usage("expected a single-graph dataset".into()).into()),
        }
    }
}

fn with_features(g: AttributedGraph) -> hcgnn::Result<AttributedGraph> {
    if g.features().is_some() {
        Ok(g)
    } else {
        one_hot_features(g)
    }
}

pub fn load_dataset(cfg: &DatasetConfig) -> Result<Dataset, CliError> {
    Ok(match cfg {
        DatasetConfig::Grid { rows, cols } => {
            Dataset::Single(with_features(generate_grid(*rows, *cols)?)?)
        }
        DatasetConfig::Files {
            edges,
            features,
            labels,
            one_based,
        } => {
            let g = load_graph_files(edges, features.as_deref(), labels.as_deref(), *one_based)?;
            Dataset::Single(with_features(g)?)
        }
        DatasetConfig::Manifest { path, one_based } => {
            Dataset::Multi(load_multi_graph(path, *one_based)?.graphs)
        }
    })
}

/// What a run writes to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub method: String,
    pub levels_used: Option<usize>,
    pub removal: Option<(RemovalMode, f64)>,
    /// Girvan-Newman stopped before reaching the requested depth.
    pub hierarchy_incomplete: bool,
    /// The node split was reduced to fit the labeled nodes.
    pub split_shrunk: bool,
    pub report: TrainReport,
}

/// One training run and the objects needed to replay it.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub record: RunRecord,
    pub outcome: TrainOutcome,
    pub hierarchy: Option<Hierarchy>,
}

fn node_split(cfg: &ExperimentConfig, g: &AttributedGraph, seed: u64) -> hcgnn::Result<NodeSplit> {
    let s = &cfg.split;
    match s.mode {
        SplitMode::SemiSupervised => {
            sample_semi_supervised(g, s.per_class, s.val, s.test, seed, s.allow_shrink)
        }
        SplitMode::Supervised => sample_supervised_fraction(g, s.train_fraction, seed),
    }
}

fn plan_for(
    g: &AttributedGraph,
    hcfg: &HierarchyConfig,
    seed: u64,
) -> hcgnn::Result<(Hierarchy, HierarchyPlan)> {
    let h = build_hierarchy(g, hcfg, seed)?;
    let plan = HierarchyPlan::new(&h)?;
    Ok((h, plan))
}

/// Trains one seed. `removal` drops edges from the input graph first; node
/// splits and link splits are drawn after removal.
pub fn run_seed(
    cfg: &ExperimentConfig,
    data: &Dataset,
    seed: u64,
    removal: Option<(RemovalMode, f64)>,
    exec: Exec,
) -> Result<RunResult, CliError> {
    let ctx = RunContext {
        seed,
        epochs: cfg.train.epochs,
        adam: hcgnn::tensor::AdamConfig {
            lr: cfg.train.lr,
            ..Default::default()
        },
        exec,
    };
    let mut split_shrunk = false;
    let (outcome, hierarchy) = match cfg.task {
        Task::Inductive => {
            let Dataset::Multi(graphs) = data else {
                return Err(Error::Usage("the inductive task needs a manifest".into()).into());
            };
            let mut prepared = Vec::with_capacity(graphs.len());
            for (g, role) in graphs {
                let (_, plan) = plan_for(g, &cfg.hierarchy, seed)?;
                prepared.push(InductiveGraph {
                    graph: g.clone(),
                    role: *role,
                    plan,
                });
            }
            let input = prepared
                .first()
                .and_then(|p| p.graph.feature_dim())
                .ok_or_else(|| Error::Usage("manifest lists no graphs".into()))?;
            let levels = prepared
                .iter()
                .map(|p| p.plan.num_levels())
                .max()
                .unwrap_or(1);
            let model = HcGnnModel::new(&cfg.model, input, levels, seed)?;
            (train_inductive(model, &prepared, &ctx)?, None)
        }
        task => {
            let full = data.single()?;
            let graph = match removal {
                Some((mode, f)) => remove_edges(full, f, mode, seed)?,
                None => full.clone(),
            };
            let input = graph.feature_dim().expect("features attached at load");
            if task == Task::LinkPred {
                let split = split_links(&graph, seed)?;
                let (h, plan) = plan_for(&split.residual, &cfg.hierarchy, seed)?;
                let model = HcGnnModel::new(&cfg.model, input, h.num_levels(), seed)?;
                (train_link_prediction(model, &split, &plan, &ctx)?, Some(h))
            } else {
                let split = node_split(cfg, &graph, seed)?;
                split_shrunk = split.shrunk;
                let (h, plan) = plan_for(&graph, &cfg.hierarchy, seed)?;
                let model = HcGnnModel::new(&cfg.model, input, h.num_levels(), seed)?;
                let out = if task == Task::Community {
                    train_community_detection(model, &graph, &plan, &split, &ctx)?
                } else {
                    train_node_classification(model, &graph, &plan, &split, &ctx)?
                };
                (out, Some(h))
            }
        }
    };
    let record = RunRecord {
        config_hash: cfg.hash(),
        seed,
        method: cfg.hierarchy.method.to_string(),
        levels_used: cfg.hierarchy.levels_used,
        removal,
        hierarchy_incomplete: hierarchy.as_ref().is_some_and(Hierarchy::incomplete),
        split_shrunk,
        report: outcome.report.clone(),
    };
    Ok(RunResult {
        record,
        outcome,
        hierarchy,
    })
}

/// Headline metric of a report for `task`.
pub fn headline(task: Task, report: &TrainReport) -> Option<f64> {
    let t = &report.test;
    match task {
        Task::NodeClass | Task::Inductive => t.micro_f1,
        Task::LinkPred => t.auc,
        Task::Community => t.nmi,
    }
}

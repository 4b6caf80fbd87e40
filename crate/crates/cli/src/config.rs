//! Experiment configuration: one JSON document, validated before any work.

use std::path::{Path, PathBuf};

use hcgnn::graph::RemovalMode;
use hcgnn::hierarchy::HierarchyConfig;
use hcgnn::model::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    NodeClass,
    LinkPred,
    Community,
    Inductive,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::NodeClass => "node-class",
            Task::LinkPred => "link-pred",
            Task::Community => "community",
            Task::Inductive => "inductive",
        }
    }

    /// Column of the report used as the headline metric.
    pub fn metric(self) -> &'static str {
        match self {
            Task::NodeClass | Task::Inductive => "micro_f1",
            Task::LinkPred => "auc",
            Task::Community => "nmi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Synthetic `rows x cols` lattice with one-hot features.
    Grid { rows: usize, cols: usize },
    /// Edge list plus optional feature and label files. Graphs without
    /// features get one-hot identity features.
    Files {
        edges: PathBuf,
        #[serde(default)]
        features: Option<PathBuf>,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default)]
        one_based: bool,
    },
    /// Manifest listing several graphs with their roles.
    Manifest {
        path: PathBuf,
        #[serde(default)]
        one_based: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seeds: Vec<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 200,
            seeds: (0..10).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// A fixed number of training nodes per class, then fixed val/test counts.
    SemiSupervised,
    /// A fraction of all nodes for training; the rest split evenly.
    Supervised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub mode: SplitMode,
    pub per_class: usize,
    pub val: usize,
    pub test: usize,
    pub train_fraction: f64,
    pub allow_shrink: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            mode: SplitMode::SemiSupervised,
            per_class: 20,
            val: 500,
            test: 1000,
            train_fraction: 0.8,
            allow_shrink: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparsityConfig {
    pub modes: Vec<RemovalMode>,
    pub fractions: Vec<f64>,
}

impl Default for SparsityConfig {
    fn default() -> Self {
        Self {
            modes: vec![RemovalMode::Global, RemovalMode::PerNode],
            fractions: vec![0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub hierarchy: HierarchyConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub sparsity: Option<SparsityConfig>,
}

fn field(name: &str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        field: name.into(),
        msg: msg.into(),
    }
}

fn check_file(name: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(field(name, format!("{} does not exist", path.display())))
    }
}

impl ExperimentConfig {
    /// Parses a config file. Relative dataset paths are resolved against
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| field("config", format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| field("config", format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetConfig::Grid { .. } => {}
            DatasetConfig::Files {
                edges,
                features,
                labels,
                ..
            } => {
                fix(edges);
                features.as_mut().map(fix);
                labels.as_mut().map(fix);
            }
            DatasetConfig::Manifest { path, .. } => fix(path),
        }
    }

    /// Checks every field. Runs before any data is loaded.
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.dataset {
            DatasetConfig::Grid { rows, cols } => {
                if *rows == 0 || *cols == 0 {
                    return Err(field("dataset.rows", "grid dimensions must be positive"));
                }
                if matches!(self.task, Task::NodeClass | Task::Community) {
                    return Err(field("task", "the grid dataset has no labels"));
                }
            }
            DatasetConfig::Files {
                edges,
                features,
                labels,
                ..
            } => {
                check_file("dataset.edges", edges)?;
                if let Some(p) = features {
                    check_file("dataset.features", p)?;
                }
                if let Some(p) = labels {
                    check_file("dataset.labels", p)?;
                }
                if matches!(self.task, Task::NodeClass | Task::Community) && labels.is_none() {
                    return Err(field("dataset.labels", "required for this task"));
                }
            }
            DatasetConfig::Manifest { path, .. } => check_file("dataset.path", path)?,
        }
        let multi = matches!(self.dataset, DatasetConfig::Manifest { .. });
        if multi != (self.task == Task::Inductive) {
            return Err(field(
                "dataset.source",
                "the inductive task needs a manifest and only it accepts one",
            ));
        }
        self.hierarchy
            .rule()
            .validate()
            .map_err(|e| field("hierarchy.lambda", e.to_string()))?;
        if self.hierarchy.gn_levels < 2 {
            return Err(field("hierarchy.gn_levels", "must be at least 2"));
        }
        if self.hierarchy.levels_used == Some(0) {
            return Err(field("hierarchy.levels_used", "must be at least 1"));
        }
        self.model
            .validate()
            .map_err(|e| field("model", e.to_string()))?;
        if !(self.train.lr > 0.0 && self.train.lr.is_finite()) {
            return Err(field("train.lr", "must be positive"));
        }
        if self.train.epochs == 0 {
            return Err(field("train.epochs", "must be positive"));
        }
        if self.train.seeds.is_empty() {
            return Err(field("train.seeds", "at least one seed is required"));
        }
        let mut seeds = self.train.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.train.seeds.len() {
            return Err(field("train.seeds", "seeds must be distinct"));
        }
        match self.split.mode {
            SplitMode::SemiSupervised => {
                if self.split.per_class == 0 || self.split.val == 0 || self.split.test == 0 {
                    return Err(field("split", "per_class, val and test must be positive"));
                }
            }
            SplitMode::Supervised => {
                let f = self.split.train_fraction;
                if !(f > 0.0 && f < 1.0) {
                    return Err(field("split.train_fraction", "must lie in (0, 1)"));
                }
            }
        }
        if let Some(s) = &self.sparsity {
            if s.modes.is_empty() || s.fractions.is_empty() {
                return Err(field("sparsity", "modes and fractions must be nonempty"));
            }
            if let Some(f) = s.fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
                return Err(field(
                    "sparsity.fractions",
                    format!("{f} is outside [0, 1)"),
                ));
            }
            if self.task == Task::Inductive {
                return Err(field("sparsity", "not supported for the inductive task"));
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub layers: Option<usize>,
    pub method: Option<hcgnn::hierarchy::HierarchyMethod>,
    pub levels_used: Option<usize>,
    pub lambda: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = &self.seeds {
            cfg.train.seeds = s.clone();
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(lr) = self.lr {
            cfg.train.lr = lr;
        }
        if let Some(l) = self.layers {
            cfg.model.num_layers = l;
        }
        if let Some(m) = self.method {
            cfg.hierarchy.method = m;
        }
        if let Some(l) = self.levels_used {
            cfg.hierarchy.levels_used = Some(l);
        }
        if let Some(l) = self.lambda {
            cfg.hierarchy.lambda = l;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> ExperimentConfig {
        serde_json::from_str(
            r#"{"task": "link-pred", "dataset": {"source": "grid", "rows": 4, "cols": 5}}"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = grid();
        assert_eq!(cfg.train.seeds.len(), 10);
        assert_eq!(cfg.model.dim, 32);
        assert_eq!(cfg.train.lr, 1e-3);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_rejected() {
        let r: Result<ExperimentConfig, _> = serde_json::from_str(
            r#"{"task": "link-pred", "dataset": {"source": "grid", "rows": 4, "cols": 5}, "lr": 1}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn field_level_messages() {
        let mut cfg = grid();
        cfg.train.seeds.clear();
        match cfg.validate() {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "train.seeds"),
            other => panic!("{other:?}"),
        }
        let mut cfg = grid();
        cfg.task = Task::NodeClass;
        assert!(cfg.validate().is_err());
        let mut cfg = grid();
        cfg.hierarchy.lambda = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = grid();
        let mut b = grid();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        b.train.epochs = 3;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = grid();
        Overrides {
            seeds: Some(vec![7]),
            epochs: Some(5),
            ..Default::default()
        }
        .apply(&mut cfg);
        assert_eq!(cfg.train.seeds, vec![7]);
        assert_eq!(cfg.train.epochs, 5);
    }
}

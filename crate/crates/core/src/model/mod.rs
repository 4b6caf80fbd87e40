//! Hierarchical message-passing layers.
//!
//! Each layer runs three steps over a [`HierarchyPlan`]:
//!
//! 1. bottom-up: every cluster averages its children with its own state;
//! 2. within-level: closed-neighborhood mean in every level's graph, then a
//!    shared linear map;
//! 3. top-down: every base node attends over itself and its ancestors.
//!
//! Weights do not depend on the hierarchy, so a trained model can run on
//! another graph by building a new plan.

mod forward;
mod plan;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::seeded_rng;
use crate::hierarchy::HierarchyConfig;
use crate::tensor::{glorot_uniform, load_checkpoint, save_checkpoint, Matrix, Tape};

pub use forward::{
    bottom_up, flat_baseline_forward, forward, init_states, top_down, within_level, BoundLayer,
    BoundModel, Embeddings, ForwardOutput, LevelState, TopDown,
};
pub use plan::HierarchyPlan;

const INIT_STREAM: u64 = 0x31;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub dim: usize,
    /// Separate within-level weights for every level instead of one shared
    /// matrix per layer.
    pub per_level_weights: bool,
    pub leaky_slope: f64,
    pub norm_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            dim: 32,
            per_level_weights: false,
            leaky_slope: 0.2,
            norm_eps: 1e-12,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.num_layers) {
            return Err(Error::Argument(format!(
                "num_layers must be 1, 2 or 3, got {}",
                self.num_layers
            )));
        }
        if self.dim == 0 {
            return Err(Error::Argument("dim must be positive".into()));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Argument("leaky_slope must lie in [0, 1)".into()));
        }
        if self.norm_eps.is_nan() || self.norm_eps <= 0.0 {
            return Err(Error::Argument("norm_eps must be positive".into()));
        }
        Ok(())
    }
}

/// Parameters of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HcGnnLayer {
    /// One matrix shared by all levels, or one per level.
    pub w_within: Vec<Matrix>,
    pub w_topdown: Matrix,
    /// Scoring vector, `2 * d_out` rows: the first half scores the node, the
    /// second half the candidate.
    pub att: Matrix,
}

impl HcGnnLayer {
    pub fn input_dim(&self) -> usize {
        self.w_within[0].rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w_topdown.cols()
    }

    fn validate(&self) -> Result<()> {
        let (d_in, d) = (self.input_dim(), self.output_dim());
        let ok = !self.w_within.is_empty()
            && self.w_within.iter().all(|w| w.shape() == (d_in, d))
            && self.w_topdown.shape() == (d, d)
            && self.att.shape() == (2 * d, 1);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("inconsistent layer parameter shapes".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HcGnnModel {
    config: ModelConfig,
    input_dim: usize,
    layers: Vec<HcGnnLayer>,
}

impl HcGnnModel {
    /// Glorot-initialized model. `num_levels` only matters with per-level
    /// weights, where it fixes how many levels the model can consume.
    pub fn new(
        config: &ModelConfig,
        input_dim: usize,
        num_levels: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Argument("input dimension must be positive".into()));
        }
        let mut rng = seeded_rng(seed, INIT_STREAM);
        let copies = if config.per_level_weights {
            num_levels.max(1)
        } else {
            1
        };
        let d = config.dim;
        let layers = (0..config.num_layers)
            .map(|l| {
                let d_in = if l == 0 { input_dim } else { d };
                HcGnnLayer {
                    w_within: (0..copies)
                        .map(|_| glorot_uniform(d_in, d, &mut rng))
                        .collect(),
                    w_topdown: glorot_uniform(d, d, &mut rng),
                    att: glorot_uniform(2 * d, 1, &mut rng),
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            input_dim,
            layers,
        })
    }

    pub fn from_layers(config: &ModelConfig, layers: Vec<HcGnnLayer>) -> Result<Self> {
        config.validate()?;
        if layers.len() != config.num_layers {
            return Err(Error::Shape(format!(
                "{} layers for num_layers = {}",
                layers.len(),
                config.num_layers
            )));
        }
        let copies = layers[0].w_within.len();
        for (l, layer) in layers.iter().enumerate() {
            layer.validate()?;
            if layer.output_dim() != config.dim || layer.w_within.len() != copies {
                return Err(Error::Shape(format!("layer {l} does not match the config")));
            }
            if l > 0 && layer.input_dim() != config.dim {
                return Err(Error::Shape(format!(
                    "layer {l} input is not {}",
                    config.dim
                )));
            }
        }
        if !config.per_level_weights && copies != 1 {
            return Err(Error::Shape(
                "per-level weights given for a shared model".into(),
            ));
        }
        Ok(Self {
            config: config.clone(),
            input_dim: layers[0].input_dim(),
            layers,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.config.dim
    }

    pub fn layers(&self) -> &[HcGnnLayer] {
        &self.layers
    }

    /// Number of levels the within-level weights cover; `None` when shared.
    pub fn weight_levels(&self) -> Option<usize> {
        self.config
            .per_level_weights
            .then(|| self.layers[0].w_within.len())
    }

    /// Parameters in a fixed order: per layer, the within-level matrices, the
    /// top-down matrix, then the scoring vector.
    pub fn params(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.w_within.iter());
            out.push(&l.w_topdown);
            out.push(&l.att);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend(l.w_within.iter_mut());
            out.push(&mut l.w_topdown);
            out.push(&mut l.att);
        }
        out
    }

    /// Records the parameters on `tape`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<BoundModel> {
        BoundModel::new(self, tape, trainable)
    }

    /// Writes `model.ckpt` (parameters followed by `extra`) and
    /// `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path, extra: &[&Matrix], meta: &ManifestMeta) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut all = self.params();
        all.extend_from_slice(extra);
        save_checkpoint(&dir.join("model.ckpt"), &all)?;
        let manifest = ModelManifest {
            model: self.config.clone(),
            input_dim: self.input_dim,
            weight_levels: self.layers[0].w_within.len(),
            extra_tensors: extra.len(),
            hierarchy: meta.hierarchy.clone(),
            seed: meta.seed,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let path = dir.join("manifest.json");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Inverse of [`HcGnnModel::save`]. Returns the model, the extra tensors
    /// and the manifest.
    pub fn load(dir: &Path) -> Result<(Self, Vec<Matrix>, ModelManifest)> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: ModelManifest =
            serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut tensors = load_checkpoint(&dir.join("model.ckpt"))?.into_iter();
        let per_layer = manifest.weight_levels + 2;
        let expected = manifest.model.num_layers * per_layer + manifest.extra_tensors;
        if tensors.len() != expected {
            return Err(Error::Checkpoint(format!(
                "{} tensors, manifest implies {expected}",
                tensors.len()
            )));
        }
        let mut layers = Vec::with_capacity(manifest.model.num_layers);
        for _ in 0..manifest.model.num_layers {
            let w_within = tensors.by_ref().take(manifest.weight_levels).collect();
            let w_topdown = tensors.next().expect("counted");
            let att = tensors.next().expect("counted");
            layers.push(HcGnnLayer {
                w_within,
                w_topdown,
                att,
            });
        }
        let model = Self::from_layers(&manifest.model, layers)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if model.input_dim != manifest.input_dim {
            return Err(Error::Checkpoint(
                "input dimension disagrees with manifest".into(),
            ));
        }
        Ok((model, tensors.collect(), manifest))
    }
}

/// Provenance stored next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMeta {
    pub hierarchy: HierarchyConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub model: ModelConfig,
    pub input_dim: usize,
    pub weight_levels: usize,
    pub extra_tensors: usize,
    pub hierarchy: HierarchyConfig,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_chain() {
        let cfg = ModelConfig {
            num_layers: 3,
            dim: 8,
            ..Default::default()
        };
        let m = HcGnnModel::new(&cfg, 5, 3, 0).unwrap();
        assert_eq!(m.layers()[0].w_within[0].shape(), (5, 8));
        assert_eq!(m.layers()[2].w_within[0].shape(), (8, 8));
        assert_eq!(m.layers()[1].att.shape(), (16, 1));
        assert_eq!(m.params().len(), 9);
        assert_eq!(m.weight_levels(), None);
    }

    #[test]
    fn layer_count_bounds() {
        for l in [0, 4] {
            let cfg = ModelConfig {
                num_layers: l,
                ..Default::default()
            };
            assert!(matches!(
                HcGnnModel::new(&cfg, 3, 1, 0),
                Err(Error::Argument(_))
            ));
        }
    }

    #[test]
    fn seeded_init() {
        let cfg = ModelConfig::default();
        assert_eq!(
            HcGnnModel::new(&cfg, 4, 2, 7).unwrap(),
            HcGnnModel::new(&cfg, 4, 2, 7).unwrap()
        );
        assert_ne!(
            HcGnnModel::new(&cfg, 4, 2, 7).unwrap(),
            HcGnnModel::new(&cfg, 4, 2, 8).unwrap()
        );
    }

    #[test]
    fn save_load_round_trip() {
        let cfg = ModelConfig {
            per_level_weights: true,
            ..Default::default()
        };
        let m = HcGnnModel::new(&cfg, 6, 3, 1).unwrap();
        let head = Matrix::filled(32, 4, 0.5);
        let dir = tempfile::tempdir().unwrap();
        let meta = ManifestMeta {
            hierarchy: HierarchyConfig::default(),
            seed: 1,
        };
        m.save(dir.path(), &[&head], &meta).unwrap();
        let (back, extra, manifest) = HcGnnModel::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(extra, vec![head]);
        assert_eq!(manifest.weight_levels, 3);
        assert_eq!(manifest.hierarchy.lambda, 1);
    }
}

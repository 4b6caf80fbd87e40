use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hcgnn::graph::{generate_grid, AttributedGraph, RemovalMode};
use hcgnn::hierarchy::{build_hierarchy, modularity, write_hierarchy, HierarchyMethod};
use hcgnn::Exec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::results::{aggregate_csv, mean_std, run_dir, write_file, write_json};
use crate::run::{headline, load_dataset, run_seed, Dataset, RunRecord, RunResult};

/// Worker pool settings shared by every command.
#[derive(Debug, Clone)]
pub struct Env {
    pub root: PathBuf,
    pub jobs: usize,
}

impl Env {
    /// Kernels run multi-threaded only when runs themselves are not fanned out.
    fn exec(&self) -> Exec {
        if self.jobs > 1 {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    /// Maps `f` over `items` on a pool of `jobs` threads, keeping order.
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Result<Vec<R>, CliError>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> Result<R, CliError> + Sync + Send,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .expect("thread pool");
        pool.install(|| items.into_par_iter().map(f).collect())
    }
}

fn first_graph(data: &Dataset) -> &AttributedGraph {
    match data {
        Dataset::Single(g) => g,
        Dataset::Multi(gs) => &gs[0].0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySummary {
    pub method: String,
    pub seed: u64,
    pub levels: usize,
    pub level_sizes: Vec<usize>,
    pub level_edges: Vec<usize>,
    /// Modularity on the input graph of the partition each level induces;
    /// `null` where undefined (no edges).
    pub modularity: Vec<Option<f64>>,
    pub incomplete: bool,
    pub notes: Vec<String>,
}

/// Builds the hierarchy for the first seed, writes `hierarchy.txt` and
/// `summary.json`, and returns the summary.
pub fn cmd_hierarchy(cfg: &ExperimentConfig, env: &Env) -> Result<HierarchySummary, CliError> {
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset)?;
    let g = first_graph(&data);
    let seed = cfg.train.seeds[0];
    let h = build_hierarchy(g, &cfg.hierarchy, seed)?;
    let modularity = (0..h.num_levels())
        .map(|k| modularity(g.topology(), &h.flat_partition(k)).ok())
        .collect();
    let mut notes = Vec::new();
    if h.incomplete() {
        notes.push("girvan-newman produced fewer levels than requested".to_string());
    }
    if h.levels()[1..]
        .iter()
        .any(|l| l.num_nodes() > 1 && l.num_edges() == 0)
    {
        log::warn!(
            "some upper levels have no edges under lambda {}",
            cfg.hierarchy.lambda
        );
        notes.push("upper levels without edges".to_string());
    }
    if cfg.hierarchy.method == HierarchyMethod::Random {
        let mut base_cfg = cfg.hierarchy.clone();
        base_cfg.method = HierarchyMethod::Louvain;
        let base = build_hierarchy(g, &base_cfg, seed)?;
        let profile = |h: &hcgnn::hierarchy::Hierarchy| -> Vec<Vec<usize>> {
            h.parents()
                .iter()
                .map(|p| {
                    let mut s = p.sizes();
                    s.sort_unstable();
                    s
                })
                .collect()
        };
        if profile(&base) == profile(&h) {
            notes.push("cluster size profile identical to the louvain base".to_string());
        } else {
            notes.push("cluster size profile differs from the louvain base".to_string());
        }
    }
    let summary = HierarchySummary {
        method: cfg.hierarchy.method.to_string(),
        seed,
        levels: h.num_levels(),
        level_sizes: h.level_sizes(),
        level_edges: h.levels().iter().map(|l| l.num_edges()).collect(),
        modularity,
        incomplete: h.incomplete(),
        notes,
    };
    let dir = run_dir(&env.root, &cfg.hash());
    write_file(&dir.join("hierarchy.txt"), &write_hierarchy(&h))?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn run_all(
    cfg: &ExperimentConfig,
    data: &Dataset,
    env: &Env,
    removal: Option<(RemovalMode, f64)>,
) -> Result<Vec<RunResult>, CliError> {
    let exec = env.exec();
    env.map(cfg.train.seeds.clone(), |seed| {
        run_seed(cfg, data, seed, removal, exec)
    })
}

#[derive(Debug, Serialize)]
struct Timing {
    wall_clock_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub dir: PathBuf,
    pub records: Vec<RunRecord>,
    pub aggregate: String,
}

/// Trains every seed and writes one report per seed plus the aggregate.
pub fn cmd_train(cfg: &ExperimentConfig, env: &Env) -> Result<TrainSummary, CliError> {
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset)?;
    let runs = run_all(cfg, &data, env, None)?;
    let dir = run_dir(&env.root, &cfg.hash());
    write_json(&dir.join("config.json"), cfg)?;
    for r in &runs {
        let seed_dir = dir.join(r.record.seed.to_string());
        write_json(&seed_dir.join("report.json"), &r.record)?;
        write_json(
            &seed_dir.join("timing.json"),
            &Timing {
                wall_clock_secs: r.outcome.report.wall_clock_secs,
            },
        )?;
        let extra: Vec<&hcgnn::tensor::Matrix> = r
            .outcome
            .head
            .as_ref()
            .map(|h| vec![&h.w, &h.b])
            .unwrap_or_default();
        let model_dir = seed_dir.join("model");
        r.outcome.model.save(
            &model_dir,
            &extra,
            &hcgnn::model::ManifestMeta {
                hierarchy: cfg.hierarchy.clone(),
                seed: r.record.seed,
            },
        )?;
    }
    let tests: Vec<_> = runs.iter().map(|r| &r.record.report.test).collect();
    let aggregate = aggregate_csv(cfg.task.name(), &tests);
    write_file(&dir.join("aggregate.csv"), &aggregate)?;
    Ok(TrainSummary {
        dir,
        records: runs.into_iter().map(|r| r.record).collect(),
        aggregate,
    })
}

/// One row of a levels or hierarchy sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub setting: String,
    pub method: HierarchyMethod,
    pub levels_used: Option<usize>,
    pub values: Vec<f64>,
}

const SWEEP_HEADER: &str = "setting,method,levels_used,runs,metric,mean,std";

fn sweep_csv(metric: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let (m, s) = mean_std(&r.values);
        let lu = r.levels_used.map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{lu},{},{metric},{m},{s}",
            r.setting,
            r.method,
            r.values.len()
        );
    }
    out
}

fn sweep(
    cfg: &ExperimentConfig,
    data: &Dataset,
    env: &Env,
    settings: Vec<(String, HierarchyMethod, Option<usize>)>,
) -> Result<Vec<SweepRow>, CliError> {
    let mut rows = Vec::with_capacity(settings.len());
    for (setting, method, levels_used) in settings {
        let mut c = cfg.clone();
        c.hierarchy.method = method;
        c.hierarchy.levels_used = levels_used;
        let runs = run_all(&c, data, env, None)?;
        let values = runs
            .iter()
            .map(|r| headline(cfg.task, &r.record.report).expect("task metric present"))
            .collect();
        rows.push(SweepRow {
            setting,
            method,
            levels_used,
            values,
        });
    }
    Ok(rows)
}

/// Headline metric for `levels_used = 1..=K` and the flat baseline, where
/// `K` is the depth of the configured hierarchy on the input graph for the
/// first seed. Writes `sweep-levels.csv`.
pub fn cmd_sweep_levels(
    cfg: &ExperimentConfig,
    env: &Env,
) -> Result<(Vec<SweepRow>, String), CliError> {
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset)?;
    let mut base = cfg.hierarchy.clone();
    base.levels_used = None;
    let k = build_hierarchy(first_graph(&data), &base, cfg.train.seeds[0])?.num_levels();
    let mut settings: Vec<_> = (1..=k)
        .map(|j| (format!("levels-{j}"), cfg.hierarchy.method, Some(j)))
        .collect();
    settings.push(("flat".to_string(), HierarchyMethod::Flat, None));
    let rows = sweep(cfg, &data, env, settings)?;
    let csv = sweep_csv(cfg.task.metric(), &rows);
    write_file(
        &run_dir(&env.root, &cfg.hash()).join("sweep-levels.csv"),
        &csv,
    )?;
    Ok((rows, csv))
}

/// Headline metric under each way of building the hierarchy. Writes
/// `sweep-hierarchy.csv`.
pub fn cmd_sweep_hierarchy(
    cfg: &ExperimentConfig,
    env: &Env,
) -> Result<(Vec<SweepRow>, String), CliError> {
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset)?;
    let settings = [
        HierarchyMethod::Louvain,
        HierarchyMethod::GirvanNewman,
        HierarchyMethod::Random,
        HierarchyMethod::Flat,
    ]
    .into_iter()
    .map(|m| (m.to_string(), m, cfg.hierarchy.levels_used))
    .collect();
    let rows = sweep(cfg, &data, env, settings)?;
    let csv = sweep_csv(cfg.task.metric(), &rows);
    write_file(
        &run_dir(&env.root, &cfg.hash()).join("sweep-hierarchy.csv"),
        &csv,
    )?;
    Ok((rows, csv))
}

/// One CSV row per (mode, fraction, seed). Writes `sweep-sparsity.csv`.
pub fn cmd_sweep_sparsity(cfg: &ExperimentConfig, env: &Env) -> Result<String, CliError> {
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset)?;
    let sp = cfg.sparsity.clone().unwrap_or_default();
    let metric = cfg.task.metric();
    let mut csv = String::from("mode,fraction,seed,method,metric,value\n");
    for &mode in &sp.modes {
        for &f in &sp.fractions {
            for r in run_all(cfg, &data, env, Some((mode, f)))? {
                let mode_name = match mode {
                    RemovalMode::Global => "global",
                    RemovalMode::PerNode => "per-node",
                };
                let value = headline(cfg.task, &r.record.report).expect("task metric present");
                let _ = writeln!(
                    csv,
                    "{mode_name},{f},{},{},{metric},{value}",
                    r.record.seed, cfg.hierarchy.method
                );
            }
        }
    }
    write_file(
        &run_dir(&env.root, &cfg.hash()).join("sweep-sparsity.csv"),
        &csv,
    )?;
    Ok(csv)
}

/// Writes a `rows x cols` lattice as a 0-based edge list.
pub fn cmd_gen_grid(rows: usize, cols: usize, out: &Path) -> Result<(), CliError> {
    let g = generate_grid(rows, cols)?;
    let mut text = String::new();
    for &(u, v) in g.edges() {
        let _ = writeln!(text, "{u} {v}");
    }
    write_file(out, &text)
}

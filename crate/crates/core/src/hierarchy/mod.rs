//! Multi-level community hierarchies over a graph.
//!
//! Level 1 is the input graph. Each higher level is a super graph whose nodes
//! are clusters of the level below; two clusters are joined when enough lower
//! level edges cross between them.

mod girvan_newman;
mod louvain;
mod text;

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{seeded_rng, AttributedGraph, Topology};

pub use girvan_newman::{edge_betweenness, girvan_newman, girvan_newman_partitions};
pub use louvain::{louvain, louvain_partitions, modularity};
pub use text::{parse_hierarchy, write_hierarchy};

const RANDOMIZE_STREAM: u64 = 0x21;

/// Assignment of every node to one of `num_clusters` dense cluster ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    num_clusters: usize,
}

impl Partition {
    /// Fails unless every id in `0..num_clusters` is used.
    pub fn new(assignment: Vec<usize>, num_clusters: usize) -> Result<Self> {
        let mut used = vec![false; num_clusters];
        for &c in &assignment {
            if c >= num_clusters {
                return Err(Error::Hierarchy(format!(
                    "cluster id {c} outside [0, {num_clusters})"
                )));
            }
            used[c] = true;
        }
        if let Some(c) = used.iter().position(|&u| !u) {
            return Err(Error::Hierarchy(format!("cluster {c} is empty")));
        }
        Ok(Self {
            assignment,
            num_clusters,
        })
    }

    /// Renumbers arbitrary labels densely in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self {
            assignment,
            num_clusters: map.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            num_clusters: n,
        }
    }

    #[inline]
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    #[inline]
    pub fn cluster_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    #[inline]
    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.assignment.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.num_clusters];
        for &c in &self.assignment {
            s[c] += 1;
        }
        s
    }

    /// Members of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.num_clusters];
        for (v, &c) in self.assignment.iter().enumerate() {
            m[c].push(v);
        }
        m
    }
}

/// Threshold on crossing-edge counts for joining two clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperEdgeRule {
    pub lambda: usize,
    /// Require strictly more than `lambda` crossings instead of at least.
    pub strict: bool,
}

impl Default for SuperEdgeRule {
    fn default() -> Self {
        Self {
            lambda: 1,
            strict: false,
        }
    }
}

impl SuperEdgeRule {
    pub fn admits(&self, crossings: usize) -> bool {
        if self.strict {
            crossings > self.lambda
        } else {
            crossings >= self.lambda
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 1 {
            return Err(Error::Argument("lambda must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of lower-level edges between each pair of distinct clusters, keyed
/// by `(a, b)` with `a < b`.
pub fn crossing_counts(
    lower: &Topology,
    partition: &Partition,
) -> Result<BTreeMap<(usize, usize), usize>> {
    if partition.num_nodes() != lower.num_nodes() {
        return Err(Error::Shape(format!(
            "partition covers {} nodes, graph has {}",
            partition.num_nodes(),
            lower.num_nodes()
        )));
    }
    let mut counts = BTreeMap::new();
    for &(u, v) in lower.edges() {
        let (a, b) = (partition.cluster_of(u), partition.cluster_of(v));
        if a != b {
            *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

pub fn build_super_graph(
    lower: &Topology,
    partition: &Partition,
    rule: SuperEdgeRule,
) -> Result<Topology> {
    rule.validate()?;
    let counts = crossing_counts(lower, partition)?;
    Topology::new(
        partition.num_clusters(),
        counts
            .into_iter()
            .filter(|&(_, c)| rule.admits(c))
            .map(|(e, _)| e),
    )
}

/// Graphs `G_1..G_K` with the parent maps between consecutive levels.
///
/// Levels are indexed from 0 here: `level(0)` is the input graph and
/// `parent(k)` maps nodes of `level(k)` to nodes of `level(k + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    levels: Vec<Topology>,
    parents: Vec<Partition>,
    rule: SuperEdgeRule,
    incomplete: bool,
    ancestors: Vec<Vec<usize>>,
}

impl Hierarchy {
    /// Builds super graphs for a chain of partitions over `base`.
    pub fn from_partitions(
        base: Topology,
        parents: Vec<Partition>,
        rule: SuperEdgeRule,
    ) -> Result<Self> {
        rule.validate()?;
        let mut levels = vec![base];
        for p in &parents {
            let next = build_super_graph(levels.last().unwrap(), p, rule)?;
            levels.push(next);
        }
        Self::from_parts(levels, parents, rule, false)
    }

    pub(crate) fn from_parts(
        levels: Vec<Topology>,
        parents: Vec<Partition>,
        rule: SuperEdgeRule,
        incomplete: bool,
    ) -> Result<Self> {
        if levels.is_empty() || parents.len() + 1 != levels.len() {
            return Err(Error::Hierarchy(format!(
                "{} levels with {} parent maps",
                levels.len(),
                parents.len()
            )));
        }
        for (k, p) in parents.iter().enumerate() {
            if p.num_nodes() != levels[k].num_nodes()
                || p.num_clusters() != levels[k + 1].num_nodes()
            {
                return Err(Error::Hierarchy(format!(
                    "parent map {} does not match level sizes",
                    k + 1
                )));
            }
            if levels[k + 1].num_nodes() >= levels[k].num_nodes() {
                return Err(Error::Hierarchy(format!(
                    "level {} does not coarsen level {}",
                    k + 2,
                    k + 1
                )));
            }
        }
        let n = levels[0].num_nodes();
        let mut ancestors: Vec<Vec<usize>> = Vec::with_capacity(parents.len());
        for (k, p) in parents.iter().enumerate() {
            let row = (0..n)
                .map(|v| {
                    let below = if k == 0 { v } else { ancestors[k - 1][v] };
                    p.cluster_of(below)
                })
                .collect();
            ancestors.push(row);
        }
        Ok(Self {
            levels,
            parents,
            rule,
            incomplete,
            ancestors,
        })
    }

    /// Single-level hierarchy over `base`.
    pub fn flat(base: Topology) -> Self {
        Self::from_parts(vec![base], Vec::new(), SuperEdgeRule::default(), false)
            .expect("flat hierarchy")
    }

    /// Number of levels `K`, counting the input graph.
    #[inline]
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.levels[0].num_nodes()
    }

    #[inline]
    pub fn level(&self, k: usize) -> &Topology {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Topology] {
        &self.levels
    }

    #[inline]
    pub fn parent(&self, k: usize) -> &Partition {
        &self.parents[k]
    }

    pub fn parents(&self) -> &[Partition] {
        &self.parents
    }

    pub fn rule(&self) -> SuperEdgeRule {
        self.rule
    }

    /// True when the detector produced fewer levels than were requested.
    pub fn incomplete(&self) -> bool {
        self.incomplete
    }

    pub(crate) fn mark_incomplete(mut self, incomplete: bool) -> Self {
        self.incomplete = incomplete;
        self
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Topology::num_nodes).collect()
    }

    /// Cluster of base node `v` at each level above the input, lowest first.
    /// Always has `K - 1` entries.
    pub fn ancestors(&self, v: usize) -> Vec<usize> {
        self.ancestors.iter().map(|row| row[v]).collect()
    }

    /// Ancestor of every base node at level `k` (`k >= 1`).
    pub fn ancestors_at(&self, k: usize) -> &[usize] {
        &self.ancestors[k - 1]
    }

    /// Partition of the input nodes induced by level `k`.
    pub fn flat_partition(&self, k: usize) -> Partition {
        if k == 0 {
            return Partition::singletons(self.num_nodes());
        }
        Partition {
            assignment: self.ancestors[k - 1].clone(),
            num_clusters: self.levels[k].num_nodes(),
        }
    }

    /// Keeps only the lowest `levels` levels.
    pub fn truncate(&self, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Argument(
                "at least one hierarchy level is required".into(),
            ));
        }
        let keep = levels.min(self.num_levels());
        Self::from_parts(
            self.levels[..keep].to_vec(),
            self.parents[..keep - 1].to_vec(),
            self.rule,
            self.incomplete,
        )
    }
}

/// Shuffles every level's memberships while keeping cluster sizes, then
/// rebuilds the super graphs.
pub fn randomize_hierarchy(h: &Hierarchy, seed: u64) -> Result<Hierarchy> {
    let mut rng = seeded_rng(seed, RANDOMIZE_STREAM);
    let parents = h
        .parents
        .iter()
        .map(|p| {
            let mut assignment = p.assignment.clone();
            assignment.shuffle(&mut rng);
            Partition {
                assignment,
                num_clusters: p.num_clusters,
            }
        })
        .collect();
    Ok(
        Hierarchy::from_partitions(h.levels[0].clone(), parents, h.rule)?
            .mark_incomplete(h.incomplete),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HierarchyMethod {
    Louvain,
    GirvanNewman,
    Random,
    Flat,
}

impl FromStr for HierarchyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "louvain" => Ok(Self::Louvain),
            "girvan-newman" | "girvan_newman" | "gn" => Ok(Self::GirvanNewman),
            "random" => Ok(Self::Random),
            "flat" => Ok(Self::Flat),
            other => Err(Error::Argument(format!(
                "unknown hierarchy method {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for HierarchyMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Louvain => "louvain",
            Self::GirvanNewman => "girvan-newman",
            Self::Random => "random",
            Self::Flat => "flat",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    pub method: HierarchyMethod,
    pub lambda: usize,
    pub lambda_strict: bool,
    /// Levels requested from Girvan-Newman, counting the input graph.
    pub gn_levels: usize,
    /// Use only the lowest levels for message passing.
    pub levels_used: Option<usize>,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            method: HierarchyMethod::Louvain,
            lambda: 1,
            lambda_strict: false,
            gn_levels: 4,
            levels_used: None,
        }
    }
}

impl HierarchyConfig {
    pub fn rule(&self) -> SuperEdgeRule {
        SuperEdgeRule {
            lambda: self.lambda,
            strict: self.lambda_strict,
        }
    }
}

pub fn build_hierarchy(
    graph: &AttributedGraph,
    config: &HierarchyConfig,
    seed: u64,
) -> Result<Hierarchy> {
    let rule = config.rule();
    rule.validate()?;
    let topo = graph.topology();
    let h = match config.method {
        HierarchyMethod::Flat => Hierarchy::flat(topo.clone()),
        HierarchyMethod::Louvain => {
            Hierarchy::from_partitions(topo.clone(), louvain_partitions(topo, seed), rule)?
        }
        HierarchyMethod::Random => {
            let base =
                Hierarchy::from_partitions(topo.clone(), louvain_partitions(topo, seed), rule)?;
            randomize_hierarchy(&base, seed)?
        }
        HierarchyMethod::GirvanNewman => {
            let (parents, incomplete) = girvan_newman_partitions(topo, config.gn_levels)?;
            Hierarchy::from_partitions(topo.clone(), parents, rule)?.mark_incomplete(incomplete)
        }
    };
    match config.levels_used {
        Some(l) => h.truncate(l),
        None => Ok(h),
    }
}

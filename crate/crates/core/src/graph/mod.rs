//! Undirected graphs with optional node features and labels, plus the
//! loaders, generators and train/validation/test samplers built on them.

mod generate;
mod io;
mod sparsify;
mod split;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub use generate::{complete_graph, generate_grid, one_hot_features, path_graph, star_graph};
pub use io::{
    load_edge_list, load_features, load_features_labels, load_graph_files, load_labels,
    load_manifest, load_multi_graph, GraphRole, ManifestEntry, MultiGraphDataset,
};
pub use sparsify::{remove_edges, RemovalMode};
pub use split::{
    sample_semi_supervised, sample_supervised_fraction, split_links, LinkSplit, NodeSplit,
};

/// Deterministic generator for one purpose (`stream`) under a user seed.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simple undirected graph in CSR form.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted. Neighbor lists are
/// sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Topology {
    /// Builds a topology, collapsing duplicate and reversed edges. Self-loops
    /// and out-of-range endpoints are rejected.
    pub fn new<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut list = Vec::new();
        for (u, v) in edges {
            for id in [u, v] {
                if id >= num_nodes {
                    return Err(Error::Bounds { id, num_nodes });
                }
            }
            if u == v {
                return Err(Error::Argument(format!("self-loop on node {u}")));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self::from_sorted(num_nodes, list))
    }

    fn from_sorted(num_nodes: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut deg = vec![0usize; num_nodes + 1];
        for &(u, v) in &edges {
            deg[u + 1] += 1;
            deg[v + 1] += 1;
        }
        for i in 0..num_nodes {
            deg[i + 1] += deg[i];
        }
        let offsets = deg.clone();
        let mut cursor = deg;
        let mut neighbors = vec![0; 2 * edges.len()];
        for &(u, v) in &edges {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for i in 0..num_nodes {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Self {
            num_nodes,
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn empty(num_nodes: usize) -> Self {
        Self::from_sorted(num_nodes, Vec::new())
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && v < self.num_nodes && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// `N(v) ∪ {v}` for every node, each list sorted.
    pub fn closed_neighborhoods(&self) -> Vec<Vec<usize>> {
        (0..self.num_nodes)
            .map(|v| {
                let mut s = Vec::with_capacity(self.degree(v) + 1);
                s.extend_from_slice(self.neighbors(v));
                let pos = s.partition_point(|&u| u < v);
                s.insert(pos, v);
                s
            })
            .collect()
    }

    /// Connected component id per node, numbered by smallest member.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.num_nodes];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.num_nodes {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &w in self.neighbors(u) {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Keeps only the edges for which `keep` returns true.
    pub fn filter_edges<F: FnMut(usize, (usize, usize)) -> bool>(&self, mut keep: F) -> Self {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|&(i, &e)| keep(i, e))
            .map(|(_, &e)| e)
            .collect();
        Self::from_sorted(self.num_nodes, edges)
    }
}

/// Node labels: one class per node, or a 0/1 target matrix for multi-label
/// data.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Single {
        classes: Arc<[usize]>,
        num_classes: usize,
    },
    Multi(Arc<Matrix>),
}

impl Labels {
    pub fn single(classes: Vec<usize>) -> Self {
        let num_classes = classes.iter().max().map_or(0, |&m| m + 1);
        Labels::Single {
            classes: classes.into(),
            num_classes,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Labels::Single { classes, .. } => classes.len(),
            Labels::Multi(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of classes, or of targets for multi-label data.
    pub fn num_outputs(&self) -> usize {
        match self {
            Labels::Single { num_classes, .. } => *num_classes,
            Labels::Multi(m) => m.cols(),
        }
    }
}

/// A graph together with its optional node features and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    topology: Topology,
    features: Option<Arc<Matrix>>,
    labels: Option<Labels>,
}

impl AttributedGraph {
    pub fn new(topology: Topology) -> Self {
        Self {
            topology,
            features: None,
            labels: None,
        }
    }

    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Ok(Self::new(Topology::new(num_nodes, edges)?))
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.num_nodes() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                self.num_nodes()
            )));
        }
        self.features = Some(Arc::new(features));
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        if labels.len() != self.num_nodes() {
            return Err(Error::Shape(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.num_nodes()
            )));
        }
        if let Labels::Single {
            classes,
            num_classes,
        } = &labels
        {
            if let Some(&bad) = classes.iter().find(|&&c| c >= *num_classes) {
                return Err(Error::Data(format!(
                    "label {bad} outside [0, {num_classes})"
                )));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Same features and labels over a different edge set.
    pub fn with_topology(&self, topology: Topology) -> Result<Self> {
        if topology.num_nodes() != self.num_nodes() {
            return Err(Error::Shape(
                "replacement topology changes node count".into(),
            ));
        }
        Ok(Self {
            topology,
            features: self.features.clone(),
            labels: self.labels.clone(),
        })
    }

    #[inline]
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.topology.num_nodes()
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.topology.num_edges()
    }

    #[inline]
    pub fn edges(&self) -> &[(usize, usize)] {
        self.topology.edges()
    }

    pub fn features(&self) -> Option<&Arc<Matrix>> {
        self.features.as_ref()
    }

    /// Feature dimension, if features are present.
    pub fn feature_dim(&self) -> Option<usize> {
        self.features.as_ref().map(|f| f.cols())
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    /// Class per node for single-label graphs.
    pub fn classes(&self) -> Option<(&[usize], usize)> {
        match &self.labels {
            Some(Labels::Single {
                classes,
                num_classes,
            }) => Some((classes, *num_classes)),
            _ => None,
        }
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(Labels::num_outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn assert_simple(t: &Topology) {
        for v in 0..t.num_nodes() {
            let nb = t.neighbors(v);
            assert!(
                nb.windows(2).all(|w| w[0] < w[1]),
                "duplicate neighbor of {v}"
            );
            for &u in nb {
                assert_ne!(u, v, "self-loop at {v}");
                assert!(t.neighbors(u).contains(&v), "asymmetric {u}-{v}");
            }
        }
        let half: usize = (0..t.num_nodes()).map(|v| t.degree(v)).sum();
        assert_eq!(half, 2 * t.num_edges());
    }

    #[test]
    fn reversed_duplicates_collapse() {
        let t = Topology::new(3, [(0, 1), (1, 0), (2, 1)]).unwrap();
        assert_eq!(t.edges(), &[(0, 1), (1, 2)]);
        assert_simple(&t);
    }

    #[test]
    fn self_loop_and_bounds_rejected() {
        assert!(matches!(
            Topology::new(3, [(1, 1)]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            Topology::new(3, [(0, 3)]),
            Err(Error::Bounds {
                id: 3,
                num_nodes: 3
            })
        ));
    }

    #[test]
    fn closed_neighborhood_includes_self_in_order() {
        let t = Topology::new(4, [(0, 2), (2, 3)]).unwrap();
        let c = t.closed_neighborhoods();
        assert_eq!(c[2], vec![0, 2, 3]);
        assert_eq!(c[1], vec![1]);
    }

    #[test]
    fn components_count_isolated_nodes() {
        let t = Topology::new(5, [(0, 1), (3, 4)]).unwrap();
        let (comp, n) = t.components();
        assert_eq!(n, 3);
        assert_eq!(comp, vec![0, 0, 1, 2, 2]);
    }

    #[test]
    fn feature_and_label_shapes_checked() {
        let g = AttributedGraph::from_edges(3, [(0, 1)]).unwrap();
        assert!(g.clone().with_features(Matrix::zeros(2, 4)).is_err());
        assert!(g.clone().with_labels(Labels::single(vec![0, 1])).is_err());
        let bad = Labels::Single {
            classes: vec![0, 3, 1].into(),
            num_classes: 2,
        };
        assert!(matches!(g.with_labels(bad), Err(Error::Data(_))));
    }
}

use crate::error::{Error, Result};
use crate::tensor::Matrix;

use super::{AttributedGraph, Topology};

/// `rows x cols` lattice with 4-neighborhood edges. Node `(r, c)` has id
/// `r * cols + c`.
pub fn generate_grid(rows: usize, cols: usize) -> Result<AttributedGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::Argument(format!("grid dimensions {rows}x{cols}")));
    }
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    AttributedGraph::from_edges(rows * cols, edges)
}

pub fn complete_graph(n: usize) -> AttributedGraph {
    let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
    AttributedGraph::new(Topology::new(n, edges).expect("complete graph"))
}

/// Node 0 is the center.
pub fn star_graph(leaves: usize) -> AttributedGraph {
    AttributedGraph::new(Topology::new(leaves + 1, (1..=leaves).map(|v| (0, v))).expect("star"))
}

pub fn path_graph(n: usize) -> AttributedGraph {
    let edges = (1..n).map(|v| (v - 1, v));
    AttributedGraph::new(Topology::new(n, edges).expect("path"))
}

/// Identity features for graphs without attributes.
pub fn one_hot_features(graph: AttributedGraph) -> Result<AttributedGraph> {
    if graph.features().is_some() {
        return Err(Error::Usage("graph already has node features".into()));
    }
    let n = graph.num_nodes();
    graph.with_features(Matrix::identity(n))
}

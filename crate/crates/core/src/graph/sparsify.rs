use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{seeded_rng, AttributedGraph};

const REMOVAL_STREAM: u64 = 0x13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalMode {
    /// `floor(f * |E|)` edges chosen uniformly.
    Global,
    /// Each node loses at least `floor(f * deg(v))` of its original edges.
    PerNode,
}

impl FromStr for RemovalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(RemovalMode::Global),
            "per-node" | "per_node" => Ok(RemovalMode::PerNode),
            other => Err(Error::Argument(format!("unknown removal mode {other:?}"))),
        }
    }
}

/// Drops a fraction of edges. Features and labels are kept.
///
/// In per-node mode nodes are visited in random order; each removes just
/// enough of its remaining incident edges to reach its quota, counting edges
/// already removed by earlier neighbors.
pub fn remove_edges(
    graph: &AttributedGraph,
    fraction: f64,
    mode: RemovalMode,
    seed: u64,
) -> Result<AttributedGraph> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Argument(format!(
            "removal fraction {fraction} outside [0, 1)"
        )));
    }
    let topo = graph.topology();
    let m = topo.num_edges();
    let mut rng = seeded_rng(seed, REMOVAL_STREAM);
    let mut removed = vec![false; m];
    match mode {
        RemovalMode::Global => {
            let k = (fraction * m as f64).floor() as usize;
            let mut idx: Vec<usize> = (0..m).collect();
            idx.shuffle(&mut rng);
            for &e in &idx[..k] {
                removed[e] = true;
            }
        }
        RemovalMode::PerNode => {
            let n = topo.num_nodes();
            let mut incident = vec![Vec::new(); n];
            for (i, &(u, v)) in topo.edges().iter().enumerate() {
                incident[u].push(i);
                incident[v].push(i);
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for v in order {
                let quota = (fraction * incident[v].len() as f64).floor() as usize;
                let done = incident[v].iter().filter(|&&e| removed[e]).count();
                let need = quota.saturating_sub(done);
                if need == 0 {
                    continue;
                }
                let mut open: Vec<usize> = incident[v]
                    .iter()
                    .copied()
                    .filter(|&e| !removed[e])
                    .collect();
                open.shuffle(&mut rng);
                for &e in open.iter().take(need) {
                    removed[e] = true;
                }
            }
        }
    }
    graph.with_topology(topo.filter_edges(|i, _| !removed[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_grid, star_graph};

    #[test]
    fn global_count() {
        let g = generate_grid(10, 10).unwrap();
        for f in [0.0, 0.1, 0.35, 0.9] {
            let r = remove_edges(&g, f, RemovalMode::Global, 4).unwrap();
            let k = (f * 180.0f64).floor() as usize;
            assert_eq!(r.num_edges(), 180 - k);
            assert!(r.edges().iter().all(|&(u, v)| g.topology().has_edge(u, v)));
        }
    }

    #[test]
    fn star_per_node() {
        let g = star_graph(4);
        for seed in 0..20 {
            let r = remove_edges(&g, 0.5, RemovalMode::PerNode, seed).unwrap();
            assert_eq!(r.topology().degree(0), 2);
        }
    }

    #[test]
    fn fraction_range() {
        let g = star_graph(3);
        for f in [1.0, -0.1, f64::NAN] {
            assert!(matches!(
                remove_edges(&g, f, RemovalMode::Global, 0),
                Err(Error::Argument(_))
            ));
        }
    }
}

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::{seeded_rng, AttributedGraph, Topology};

use super::{Hierarchy, Partition, SuperEdgeRule};

const LOUVAIN_STREAM: u64 = 0x22;
const MIN_GAIN: f64 = 1e-12;

/// Newman modularity of `partition` on an unweighted graph.
pub fn modularity(graph: &Topology, partition: &Partition) -> Result<f64> {
    if partition.num_nodes() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "partition covers {} nodes, graph has {}",
            partition.num_nodes(),
            graph.num_nodes()
        )));
    }
    let m = graph.num_edges();
    if m == 0 {
        return Err(Error::UndefinedObjective(
            "modularity of an edgeless graph".into(),
        ));
    }
    let two_m = 2.0 * m as f64;
    let mut internal = vec![0.0; partition.num_clusters()];
    let mut tot = vec![0.0; partition.num_clusters()];
    for &(u, v) in graph.edges() {
        let c = partition.cluster_of(u);
        if c == partition.cluster_of(v) {
            internal[c] += 2.0;
        }
    }
    for v in 0..graph.num_nodes() {
        tot[partition.cluster_of(v)] += graph.degree(v) as f64;
    }
    Ok(internal
        .iter()
        .zip(&tot)
        .map(|(&i, &t)| i / two_m - (t / two_m) * (t / two_m))
        .sum())
}

/// Weighted graph used between aggregation passes. `loops[i]` is `A_ii`, so
/// an internal edge of weight `w` contributes `2w`.
struct Weighted {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
}

impl Weighted {
    fn from_topology(t: &Topology) -> Self {
        Self {
            adj: (0..t.num_nodes())
                .map(|v| t.neighbors(v).iter().map(|&u| (u, 1.0)).collect())
                .collect(),
            loops: vec![0.0; t.num_nodes()],
        }
    }

    fn len(&self) -> usize {
        self.loops.len()
    }

    fn strength(&self, i: usize) -> f64 {
        self.loops[i] + self.adj[i].iter().map(|&(_, w)| w).sum::<f64>()
    }

    /// Collapses each community into one node.
    fn aggregate(&self, p: &Partition) -> Self {
        let k = p.num_clusters();
        let mut loops = vec![0.0; k];
        let mut pairs = Vec::new();
        for i in 0..self.len() {
            let ci = p.cluster_of(i);
            loops[ci] += self.loops[i];
            for &(j, w) in &self.adj[i] {
                let cj = p.cluster_of(j);
                if ci == cj {
                    loops[ci] += w;
                } else {
                    pairs.push((ci, cj, w));
                }
            }
        }
        pairs.sort_by_key(|p| (p.0, p.1));
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
        for (ci, cj, w) in pairs {
            match adj[ci].last_mut() {
                Some((last, acc)) if *last == cj => *acc += w,
                _ => adj[ci].push((cj, w)),
            }
        }
        Self { adj, loops }
    }
}

/// Local moving phase. Returns the community of every node.
fn local_moves(g: &Weighted, rng: &mut impl rand::Rng) -> Vec<usize> {
    let n = g.len();
    let k: Vec<f64> = (0..n).map(|i| g.strength(i)).collect();
    let two_m: f64 = k.iter().sum();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = k.clone();
    let mut link = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut touched = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    loop {
        let mut moved = false;
        for &i in &order {
            if g.adj[i].is_empty() {
                continue;
            }
            let ci = comm[i];
            for &(j, w) in &g.adj[i] {
                let c = comm[j];
                if !seen[c] {
                    seen[c] = true;
                    touched.push(c);
                }
                link[c] += w;
            }
            tot[ci] -= k[i];
            let gain = |c: usize| link[c] - tot[c] * k[i] / two_m;
            let stay = gain(ci);
            let mut best = None;
            for &c in &touched {
                if c == ci {
                    continue;
                }
                let g = gain(c);
                best = match best {
                    Some((bc, bg)) if g < bg || (g == bg && c > bc) => Some((bc, bg)),
                    _ => Some((c, g)),
                };
            }
            let target = match best {
                Some((c, g)) if g > stay + MIN_GAIN => c,
                _ => ci,
            };
            tot[target] += k[i];
            if target != ci {
                comm[i] = target;
                moved = true;
            }
            for &c in &touched {
                link[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
        }
        if !moved {
            break;
        }
    }
    comm
}

/// Parent maps from repeated Louvain passes; one entry per pass that merged
/// at least two nodes.
pub fn louvain_partitions(graph: &Topology, seed: u64) -> Vec<Partition> {
    if graph.num_edges() == 0 {
        log::warn!("louvain on an edgeless graph: every node stays a singleton");
        return Vec::new();
    }
    let mut rng = seeded_rng(seed, LOUVAIN_STREAM);
    let mut g = Weighted::from_topology(graph);
    let mut out = Vec::new();
    loop {
        let p = Partition::from_labels(&local_moves(&g, &mut rng));
        if p.num_clusters() == g.len() {
            break;
        }
        g = g.aggregate(&p);
        out.push(p);
    }
    out
}

/// Louvain hierarchy with the default super-edge rule.
pub fn louvain(graph: &AttributedGraph, seed: u64) -> Result<Hierarchy> {
    let t = graph.topology();
    Hierarchy::from_partitions(
        t.clone(),
        louvain_partitions(t, seed),
        SuperEdgeRule::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, generate_grid};

    pub(crate) fn two_cliques() -> Topology {
        let mut e = Vec::new();
        for base in [0, 4] {
            for u in 0..4 {
                for v in u + 1..4 {
                    e.push((base + u, base + v));
                }
            }
        }
        e.push((3, 4));
        Topology::new(8, e).unwrap()
    }

    #[test]
    fn modularity_examples() {
        let t = Topology::new(2, [(0, 1)]).unwrap();
        let q = modularity(&t, &Partition::new(vec![0, 0], 1).unwrap()).unwrap();
        assert!(q.abs() < 1e-15);

        let p = Partition::new(vec![0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        let q = modularity(&two_cliques(), &p).unwrap();
        // each half: 6 internal edges of 13, total degree 13
        assert!((q - 2.0 * (6.0 / 13.0 - 0.25)).abs() < 1e-12);

        let t = complete_graph(5);
        let q = modularity(t.topology(), &Partition::singletons(5)).unwrap();
        assert!((q + 5.0 * 16.0 / 400.0).abs() < 1e-12);
    }

    #[test]
    fn modularity_needs_edges() {
        let t = Topology::empty(3);
        assert!(matches!(
            modularity(&t, &Partition::singletons(3)),
            Err(Error::UndefinedObjective(_))
        ));
    }

    #[test]
    fn two_cliques_split_in_two() {
        for seed in 0..20 {
            let parts = louvain_partitions(&two_cliques(), seed);
            let a = parts[0].assignment();
            assert!(a[..4].iter().all(|&c| c == a[0]));
            assert!(a[4..].iter().all(|&c| c == a[4]));
            assert_ne!(a[0], a[4]);
            assert_eq!(parts.len(), 1);
        }
    }

    #[test]
    fn triangle_collapses() {
        let parts = louvain_partitions(complete_graph(3).topology(), 0);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].assignment(), &[0, 0, 0]);
    }

    #[test]
    fn edgeless_is_flat() {
        assert!(louvain_partitions(&Topology::empty(4), 0).is_empty());
    }

    #[test]
    fn seeded_and_monotone() {
        let g = generate_grid(12, 12).unwrap();
        let a = louvain(&g, 3).unwrap();
        assert_eq!(a, louvain(&g, 3).unwrap());
        let mut prev = f64::NEG_INFINITY;
        for k in 0..a.num_levels() {
            let q = modularity(g.topology(), &a.flat_partition(k)).unwrap();
            assert!(q >= prev - 1e-12);
            prev = q;
        }
    }

    #[test]
    fn aggregated_modularity_matches_flat() {
        let t = generate_grid(7, 7).unwrap().topology().clone();
        let parts = louvain_partitions(&t, 1);
        let w = Weighted::from_topology(&t).aggregate(&parts[0]);
        let two_m: f64 = (0..w.len()).map(|i| w.strength(i)).sum();
        assert_eq!(two_m, 2.0 * t.num_edges() as f64);
        let q_agg: f64 = (0..w.len())
            .map(|c| w.loops[c] / two_m - (w.strength(c) / two_m).powi(2))
            .sum();
        assert!((q_agg - modularity(&t, &parts[0]).unwrap()).abs() < 1e-12);
    }
}

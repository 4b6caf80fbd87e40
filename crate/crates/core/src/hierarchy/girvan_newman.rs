use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Topology};

use super::{Hierarchy, Partition, SuperEdgeRule};

const TIE_TOL: f64 = 1e-9;

/// Mutable adjacency for edge removal.
struct Working {
    adj: Vec<Vec<usize>>,
}

impl Working {
    fn remove(&mut self, u: usize, v: usize) {
        for (a, b) in [(u, v), (v, u)] {
            if let Ok(i) = self.adj[a].binary_search(&b) {
                self.adj[a].remove(i);
            }
        }
    }

    fn reach(&self, s: usize) -> Vec<usize> {
        let mut seen = vec![s];
        let mut queue = VecDeque::from([s]);
        let mut mark = vec![false; self.adj.len()];
        mark[s] = true;
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if !mark[w] {
                    mark[w] = true;
                    seen.push(w);
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Component labels numbered by smallest member.
    fn labels(&self) -> (Vec<usize>, usize) {
        let n = self.adj.len();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for s in 0..n {
            if comp[s] == usize::MAX {
                for v in self.reach(s) {
                    comp[v] = count;
                }
                count += 1;
            }
        }
        (comp, count)
    }

    /// Brandes accumulation from every source in `nodes` (one component).
    fn accumulate(&self, nodes: &[usize], into: &mut BTreeMap<(usize, usize), f64>) {
        let n = self.adj.len();
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![usize::MAX; n];
        let mut delta = vec![0.0f64; n];
        let mut stack = Vec::with_capacity(nodes.len());
        let mut queue = VecDeque::new();
        for &s in nodes {
            for &v in nodes {
                sigma[v] = 0.0;
                dist[v] = usize::MAX;
                delta[v] = 0.0;
            }
            sigma[s] = 1.0;
            dist[s] = 0;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                stack.push(u);
                for &w in &self.adj[u] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                    if dist[w] == dist[u] + 1 {
                        sigma[w] += sigma[u];
                    }
                }
            }
            while let Some(w) = stack.pop() {
                for &u in &self.adj[w] {
                    if dist[u] != usize::MAX && dist[u] + 1 == dist[w] {
                        let c = sigma[u] / sigma[w] * (1.0 + delta[w]);
                        *into.get_mut(&(u.min(w), u.max(w))).expect("live edge") += c;
                        delta[u] += c;
                    }
                }
            }
        }
    }
}

/// Shortest-path edge betweenness, each unordered pair of endpoints counted
/// once.
pub fn edge_betweenness(graph: &Topology) -> BTreeMap<(usize, usize), f64> {
    let w = Working {
        adj: (0..graph.num_nodes())
            .map(|v| graph.neighbors(v).to_vec())
            .collect(),
    };
    let mut b: BTreeMap<_, _> = graph.edges().iter().map(|&e| (e, 0.0)).collect();
    let (comp, count) = w.labels();
    let mut groups = vec![Vec::new(); count];
    for (v, &c) in comp.iter().enumerate() {
        groups[c].push(v);
    }
    for g in &groups {
        w.accumulate(g, &mut b);
    }
    for x in b.values_mut() {
        *x /= 2.0;
    }
    b
}

/// Parent maps from divisive edge-betweenness clustering.
///
/// The coarsest level is the first split of the graph (its components if it is
/// already disconnected). Finer levels are snapshots taken when the component
/// count first reaches `ceil(n / 2^j)`, `j = 1..target_levels - 2`. The flag is
/// set when fewer than `target_levels` distinct levels could be formed.
pub fn girvan_newman_partitions(
    graph: &Topology,
    target_levels: usize,
) -> Result<(Vec<Partition>, bool)> {
    if target_levels < 2 {
        return Err(Error::Argument(format!(
            "girvan-newman needs at least 2 levels, got {target_levels}"
        )));
    }
    let n = graph.num_nodes();
    if graph.num_edges() == 0 {
        log::warn!("girvan-newman on an edgeless graph: no levels above the input");
        return Ok((Vec::new(), true));
    }
    let targets: Vec<usize> = (1..target_levels - 1)
        .map(|j| n.div_ceil(1usize << j.min(63)))
        .collect();

    let mut w = Working {
        adj: (0..n).map(|v| graph.neighbors(v).to_vec()).collect(),
    };
    let mut between: BTreeMap<(usize, usize), f64> =
        graph.edges().iter().map(|&e| (e, 0.0)).collect();
    let (labels, mut count) = w.labels();
    let mut groups = vec![Vec::new(); count];
    for (v, &c) in labels.iter().enumerate() {
        groups[c].push(v);
    }
    for g in &groups {
        w.accumulate(g, &mut between);
    }

    let mut top = (count >= 2).then_some(labels);
    let mut snaps: Vec<Option<Vec<usize>>> = targets
        .iter()
        .map(|&t| (count >= t.max(2)).then(|| w.labels().0))
        .collect();
    let finest = targets.iter().copied().max().unwrap_or(0);

    while !between.is_empty() && (top.is_none() || count < finest) {
        let mut pick = None;
        for (&e, &b) in &between {
            match pick {
                Some((_, best)) if b <= best + TIE_TOL * f64::max(1.0, best) => {}
                _ => pick = Some((e, b)),
            }
        }
        let ((u, v), _) = pick.expect("non-empty");
        between.remove(&(u, v));
        w.remove(u, v);

        let side_u = w.reach(u);
        let split = !side_u.contains(&v);
        let mut affected = vec![side_u];
        if split {
            affected.push(w.reach(v));
            count += 1;
        }
        for g in &affected {
            for &a in g {
                for &b in &w.adj[a] {
                    if a < b {
                        between.insert((a, b), 0.0);
                    }
                }
            }
            w.accumulate(g, &mut between);
        }
        if split {
            if top.is_none() {
                top = Some(w.labels().0);
            }
            for (snap, &t) in snaps.iter_mut().zip(&targets) {
                if snap.is_none() && count >= t {
                    *snap = Some(w.labels().0);
                }
            }
        }
    }

    // finest first, then coarser, ending with the first split
    let mut chain: Vec<Vec<usize>> = snaps.into_iter().flatten().collect();
    chain.extend(top);
    let mut parts: Vec<Partition> = chain.iter().map(|l| Partition::from_labels(l)).collect();
    parts.retain(|p| p.num_clusters() < n);
    parts.dedup_by(|b, a| a.num_clusters() == b.num_clusters());
    let mut out: Vec<Partition> = Vec::with_capacity(parts.len());
    let mut below: Option<&Partition> = None;
    for p in &parts {
        let parent = match below {
            None => p.clone(),
            Some(prev) => {
                let mut map = vec![0; prev.num_clusters()];
                for v in 0..n {
                    map[prev.cluster_of(v)] = p.cluster_of(v);
                }
                Partition::new(map, p.num_clusters())?
            }
        };
        out.push(parent);
        below = Some(p);
    }
    let incomplete = out.len() + 1 < target_levels;
    Ok((out, incomplete))
}

pub fn girvan_newman(graph: &AttributedGraph, target_levels: usize) -> Result<Hierarchy> {
    let t = graph.topology();
    let (parts, incomplete) = girvan_newman_partitions(t, target_levels)?;
    Ok(
        Hierarchy::from_partitions(t.clone(), parts, SuperEdgeRule::default())?
            .mark_incomplete(incomplete),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_grid, path_graph};

    fn barbell() -> Topology {
        Topology::new(6, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5)]).unwrap()
    }

    #[test]
    fn bridge_has_max_betweenness() {
        let b = edge_betweenness(&barbell());
        assert_eq!(b[&(2, 3)], 9.0);
        assert_eq!(b[&(0, 1)], 1.0);
        assert_eq!(b[&(0, 2)], 4.0);
    }

    #[test]
    fn barbell_splits_into_triangles() {
        let (parts, incomplete) = girvan_newman_partitions(&barbell(), 2).unwrap();
        assert!(!incomplete);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].assignment(), &[0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn path_tie_goes_to_smallest_edge() {
        let (parts, _) = girvan_newman_partitions(path_graph(3).topology(), 2).unwrap();
        assert_eq!(parts[0].assignment(), &[0, 1, 1]);
    }

    #[test]
    fn components_are_the_top_level() {
        let t = Topology::new(7, [(0, 1), (1, 2), (3, 4), (5, 6)]).unwrap();
        let (parts, _) = girvan_newman_partitions(&t, 2).unwrap();
        assert_eq!(parts[0].assignment(), &[0, 0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn nested_levels_on_grid() {
        let t = generate_grid(6, 6).unwrap().topology().clone();
        let (parts, incomplete) = girvan_newman_partitions(&t, 4).unwrap();
        assert!(!incomplete);
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[0].num_clusters(), 18);
        assert_eq!(parts[1].num_clusters(), 9);
        assert_eq!(parts[2].num_clusters(), 2);
        let h = Hierarchy::from_partitions(t, parts, SuperEdgeRule::default()).unwrap();
        assert_eq!(h.level_sizes(), vec![36, 18, 9, 2]);
    }

    #[test]
    fn too_many_levels_flagged() {
        let (parts, incomplete) = girvan_newman_partitions(path_graph(4).topology(), 6).unwrap();
        assert!(incomplete);
        let sizes: Vec<_> = parts.iter().map(Partition::num_clusters).collect();
        assert!(sizes.windows(2).all(|w| w[0] > w[1]));
        assert!(matches!(
            girvan_newman_partitions(path_graph(4).topology(), 1),
            Err(Error::Argument(_))
        ));
    }
}

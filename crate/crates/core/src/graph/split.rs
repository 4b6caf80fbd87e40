use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{seeded_rng, AttributedGraph, Labels};

const LINK_STREAM: u64 = 0x11;
const NODE_STREAM: u64 = 0x12;

/// Held-out positive edges plus sampled non-edges, and the residual graph
/// that keeps only the training positives.
#[derive(Debug, Clone)]
pub struct LinkSplit {
    pub residual: AttributedGraph,
    pub train_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

/// 10% validation, 10% test, rest train. Negatives are drawn uniformly from
/// node pairs that are not edges of the original graph: as many as positives
/// for validation and test, twice as many for training.
pub fn split_links(graph: &AttributedGraph, seed: u64) -> Result<LinkSplit> {
    let n = graph.num_nodes();
    let m = graph.num_edges();
    let held = m / 10;
    let train = m - 2 * held;
    let wanted = 2 * held + 2 * train;
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs - m < wanted {
        return Err(Error::Sampling(format!(
            "{wanted} negative pairs requested but only {} non-edges exist",
            pairs - m
        )));
    }
    if m < 10 {
        return Err(Error::Argument(format!(
            "link split needs at least 10 edges, graph has {m}"
        )));
    }

    let mut rng = seeded_rng(seed, LINK_STREAM);
    let mut pos = graph.edges().to_vec();
    pos.shuffle(&mut rng);
    let test_pos = pos.split_off(m - held);
    let val_pos = pos.split_off(train);
    let train_pos = pos;

    let topo = graph.topology();
    let mut seen = HashSet::with_capacity(wanted);
    let mut neg = Vec::with_capacity(wanted);
    let budget = 100 * wanted;
    let mut attempts = 0usize;
    while neg.len() < wanted {
        if attempts == budget {
            return Err(Error::Sampling(format!(
                "negative sampling gave up after {budget} attempts with {} of {wanted}",
                neg.len()
            )));
        }
        attempts += 1;
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v || topo.has_edge(u, v) {
            continue;
        }
        let p = (u.min(v), u.max(v));
        if seen.insert(p) {
            neg.push(p);
        }
    }
    let train_neg = neg.split_off(2 * held);
    let test_neg = neg.split_off(held);
    let val_neg = neg;

    let keep: HashSet<(usize, usize)> = train_pos.iter().copied().collect();
    let residual = graph.with_topology(topo.filter_edges(|_, e| keep.contains(&e)))?;
    Ok(LinkSplit {
        residual,
        train_pos,
        train_neg,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
    })
}

/// Disjoint node index sets, each sorted ascending. `shrunk` records that the
/// requested sizes did not fit and were reduced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub shrunk: bool,
}

/// `per_class` training nodes from every class, then `val` and `test` nodes
/// from the remainder. With `allow_shrink`, oversized requests are reduced
/// (val/test proportionally) instead of failing.
pub fn sample_semi_supervised(
    graph: &AttributedGraph,
    per_class: usize,
    val: usize,
    test: usize,
    seed: u64,
    allow_shrink: bool,
) -> Result<NodeSplit> {
    let (classes, num_classes) = graph
        .classes()
        .ok_or_else(|| Error::Usage("semi-supervised split needs single-label classes".into()))?;
    if per_class == 0 || val == 0 || test == 0 {
        return Err(Error::Argument("split sizes must be positive".into()));
    }
    let mut by_class = vec![Vec::new(); num_classes];
    for (v, &c) in classes.iter().enumerate() {
        by_class[c].push(v);
    }
    let mut shrunk = false;
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::Data(format!("class {c} has no labeled nodes")));
    }
    let smallest = by_class.iter().map(Vec::len).min().unwrap_or(0);
    if smallest < per_class {
        if !allow_shrink {
            return Err(Error::Data(format!(
                "smallest class has {smallest} nodes, {per_class} requested"
            )));
        }
        shrunk = true;
    }

    let mut rng = seeded_rng(seed, NODE_STREAM);
    let mut in_train = vec![false; graph.num_nodes()];
    let mut train = Vec::with_capacity(per_class * num_classes);
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &v in members.iter().take(per_class) {
            in_train[v] = true;
            train.push(v);
        }
    }
    let mut rest: Vec<usize> = (0..graph.num_nodes()).filter(|&v| !in_train[v]).collect();
    rest.shuffle(&mut rng);

    let (mut nv, mut nt) = (val, test);
    if rest.len() < val + test {
        if !allow_shrink {
            return Err(Error::Data(format!(
                "{} nodes left after training selection, {} requested",
                rest.len(),
                val + test
            )));
        }
        shrunk = true;
        nv = rest.len() * val / (val + test);
        nt = rest.len() - nv;
        if nv == 0 || nt == 0 {
            return Err(Error::Data(
                "too few nodes for validation and test sets".into(),
            ));
        }
    }
    let mut val_set = rest[..nv].to_vec();
    let mut test_set = rest[nv..nv + nt].to_vec();
    train.sort_unstable();
    val_set.sort_unstable();
    test_set.sort_unstable();
    Ok(NodeSplit {
        train,
        val: val_set,
        test: test_set,
        shrunk,
    })
}

/// `floor(frac * n)` training nodes; the remainder is halved between
/// validation (rounded down) and test.
pub fn sample_supervised_fraction(
    graph: &AttributedGraph,
    train_frac: f64,
    seed: u64,
) -> Result<NodeSplit> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Argument(format!(
            "training fraction {train_frac} outside (0, 1)"
        )));
    }
    if !matches!(
        graph.labels(),
        Some(Labels::Single { .. } | Labels::Multi(_))
    ) {
        return Err(Error::Usage("supervised split needs node labels".into()));
    }
    let n = graph.num_nodes();
    if n < 10 {
        return Err(Error::Data(format!(
            "{n} nodes is too few for a three-way split"
        )));
    }
    let n_train = ((train_frac * n as f64) + 1e-9).floor() as usize;
    let rest = n - n_train;
    let n_val = rest / 2;
    if n_train == 0 || n_val == 0 || rest == n_val {
        return Err(Error::Data(format!(
            "fraction {train_frac} leaves an empty set for {n} nodes"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed, NODE_STREAM));
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(NodeSplit {
        train,
        val,
        test,
        shrunk: false,
    })
}

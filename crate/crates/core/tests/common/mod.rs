//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hcgnn::graph::{seeded_rng, Topology};
use rand::Rng;

/// Erdős–Rényi style graph; duplicate-free with `u < v`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Topology {
    let mut rng = seeded_rng(seed, 0x99);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Topology::new(n, edges).unwrap()
}

/// Modularity from the pairwise definition, summing over all ordered pairs.
pub fn modularity_pairs(n: usize, edges: &[(usize, usize)], label: &[usize]) -> f64 {
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v) in edges {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if label[i] == label[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Best modularity over every set partition (restricted growth strings).
pub fn best_modularity(n: usize, edges: &[(usize, usize)]) -> f64 {
    fn rec(
        i: usize,
        max: usize,
        label: &mut Vec<usize>,
        n: usize,
        edges: &[(usize, usize)],
        best: &mut f64,
    ) {
        if i == n {
            *best = best.max(modularity_pairs(n, edges, label));
            return;
        }
        for c in 0..=max + 1 {
            label[i] = c;
            rec(i + 1, max.max(c), label, n, edges, best);
        }
    }
    let mut label = vec![0; n];
    let mut best = f64::NEG_INFINITY;
    if n == 0 {
        return 0.0;
    }
    rec(1, 0, &mut label, n, edges, &mut best);
    best
}

/// Crossing counts by looping over all edges.
pub fn crossings_brute(
    edges: &[(usize, usize)],
    label: &[usize],
) -> BTreeMap<(usize, usize), usize> {
    let mut out = BTreeMap::new();
    for &(u, v) in edges {
        let (a, b) = (label[u], label[v]);
        if a != b {
            *out.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    out
}

pub fn rows(m: &hcgnn::tensor::Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn matvec_rows(x: &[Vec<f64>], w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            (0..w[0].len())
                .map(|j| row.iter().zip(w).map(|(a, wr)| a * wr[j]).sum())
                .collect()
        })
        .collect()
}

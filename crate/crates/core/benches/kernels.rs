//! Sequential against data-parallel execution of the hot kernels and of a
//! full forward/backward pass.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hcgnn::graph::{generate_grid, one_hot_features, seeded_rng};
use hcgnn::hierarchy::{build_hierarchy, HierarchyConfig};
use hcgnn::model::{forward, HcGnnModel, HierarchyPlan, ModelConfig};
use hcgnn::tensor::{Matrix, SegmentIndex, Tape};
use hcgnn::Exec;
use rand::Rng;

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn random(r: usize, c: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed, 0);
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for n in [1_000, 10_000] {
        let x = Arc::new(random(n, 128, 1));
        let w = Arc::new(random(128, 32, 2));
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| {
                    let mut t = Tape::new(exec);
                    let (xa, wa) = (t.constant(x.clone()), t.constant(w.clone()));
                    black_box(t.matmul(xa, wa).unwrap());
                })
            });
        }
    }
    group.finish();
}

fn segment_mean(c: &mut Criterion) {
    let mut group = c.benchmark_group("segment_mean");
    for n in [1_000, 20_000] {
        let mut rng = seeded_rng(3, 0);
        let segs: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut s = vec![i];
                s.extend((0..8).map(|_| rng.gen_range(0..n)));
                s
            })
            .collect();
        let idx = Arc::new(SegmentIndex::new(&segs, n).unwrap());
        let x = Arc::new(random(n, 32, 4));
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| {
                    let mut t = Tape::new(exec);
                    let xa = t.constant(x.clone());
                    black_box(t.segment_mean(xa, idx.clone()).unwrap());
                })
            });
        }
    }
    group.finish();
}

fn training_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_backward");
    group.sample_size(20);
    let g = one_hot_features(generate_grid(30, 30).unwrap()).unwrap();
    let h = build_hierarchy(&g, &HierarchyConfig::default(), 0).unwrap();
    let plan = HierarchyPlan::new(&h).unwrap();
    let model = HcGnnModel::new(&ModelConfig::default(), 900, h.num_levels(), 0).unwrap();
    let x = g.features().unwrap().clone();
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "grid-30x30"), |b| {
            b.iter(|| {
                let mut t = Tape::new(exec);
                let bound = model.bind(&mut t, true).unwrap();
                let out = forward(&mut t, &bound, &plan, &x).unwrap();
                let loss = t.sum(out.z);
                t.backward(loss).unwrap();
                black_box(t.grad(bound.params()[0]).cloned());
            })
        });
    }
    group.finish();
}

criterion_group!(benches, matmul, segment_mean, training_step);
criterion_main!(benches);

//! End-to-end training loops on small synthetic graphs, plus metric oracles.

mod common;

use hcgnn::graph::{
    generate_grid, one_hot_features, remove_edges, sample_supervised_fraction, seeded_rng,
    split_links, AttributedGraph, GraphRole, Labels, NodeSplit, RemovalMode,
};
use hcgnn::hierarchy::{build_hierarchy, HierarchyConfig};
use hcgnn::model::{HcGnnModel, HierarchyPlan, ManifestMeta, ModelConfig};
use hcgnn::tasks::{
    accuracy, auc, micro_macro_f1, nmi, predict_logits, train_community_detection, train_inductive,
    train_link_prediction, train_node_classification, InductiveGraph, RunContext,
};
use hcgnn::tensor::Matrix;
use hcgnn::{Error, Exec};
use proptest::prelude::*;
use rand::Rng;

/// `k` cliques of `size` nodes joined in a chain; the class is the clique and
/// the features are a noisy one-hot of it.
fn clique_chain(k: usize, size: usize, seed: u64) -> AttributedGraph {
    let n = k * size;
    let mut edges = Vec::new();
    for c in 0..k {
        let base = c * size;
        for u in base..base + size {
            for v in u + 1..base + size {
                if (u + v) % 3 != 0 {
                    edges.push((u, v));
                }
            }
        }
        if c + 1 < k {
            edges.push((base + size - 1, base + size));
        }
    }
    let mut rng = seeded_rng(seed, 50);
    let classes: Vec<usize> = (0..n).map(|v| v / size).collect();
    let mut x = Matrix::zeros(n, k + 2);
    for (v, &class) in classes.iter().enumerate() {
        x.set(v, class, 1.0);
        for c in 0..k + 2 {
            x.set(v, c, x.get(v, c) + rng.gen_range(-0.1..0.1));
        }
    }
    AttributedGraph::from_edges(n, edges)
        .unwrap()
        .with_features(x)
        .unwrap()
        .with_labels(Labels::single(classes))
        .unwrap()
}

fn ctx(seed: u64, epochs: usize, lr: f64) -> RunContext {
    let mut c = RunContext::new(seed);
    c.epochs = epochs;
    c.adam.lr = lr;
    c.exec = Exec::Sequential;
    c
}

fn setup(g: &AttributedGraph, seed: u64) -> (HcGnnModel, HierarchyPlan) {
    let h = build_hierarchy(g, &HierarchyConfig::default(), seed).unwrap();
    let plan = HierarchyPlan::new(&h).unwrap();
    let cfg = ModelConfig {
        dim: 16,
        ..Default::default()
    };
    let model = HcGnnModel::new(&cfg, g.feature_dim().unwrap(), h.num_levels(), seed).unwrap();
    (model, plan)
}

#[test]
fn separable_node_classification_is_solved() {
    let g = clique_chain(3, 20, 1);
    let split = sample_supervised_fraction(&g, 0.5, 2).unwrap();
    let (model, plan) = setup(&g, 3);
    let out = train_node_classification(model, &g, &plan, &split, &ctx(3, 150, 0.01)).unwrap();
    let r = &out.report;
    assert_eq!(r.test.micro_f1, Some(1.0), "{:?}", r.test);
    assert_eq!(r.test.micro_f1, r.test.accuracy);
    assert_eq!(r.epochs.len(), 150);
    assert_eq!(r.best_val, r.epochs[r.selected_epoch].val_metric);
    assert!(r.epochs[..r.selected_epoch]
        .iter()
        .all(|e| e.val_metric < r.best_val));
    assert!(!r.degenerate);
}

#[test]
fn first_epoch_loss_is_near_uniform() {
    let g = clique_chain(4, 10, 5);
    let split = sample_supervised_fraction(&g, 0.5, 5).unwrap();
    let (model, plan) = setup(&g, 5);
    let out = train_node_classification(model, &g, &plan, &split, &ctx(5, 1, 0.01)).unwrap();
    let expected = (4f64).ln();
    let l0 = out.report.epochs[0].train_loss;
    assert!(
        (l0 - expected).abs() <= 0.2 * expected,
        "{l0} vs {expected}"
    );
}

#[test]
fn training_is_deterministic_and_replayable() {
    let g = clique_chain(3, 12, 7);
    let split = sample_supervised_fraction(&g, 0.6, 7).unwrap();
    let run = |exec| {
        let (model, plan) = setup(&g, 7);
        let mut c = ctx(7, 30, 0.01);
        c.exec = exec;
        (
            train_node_classification(model, &g, &plan, &split, &c).unwrap(),
            plan,
        )
    };
    let (a, plan) = run(Exec::Sequential);
    let (b, _) = run(Exec::Sequential);
    let (p, _) = run(Exec::Parallel);
    let json = |r: &hcgnn::tasks::TrainReport| serde_json::to_string(r).unwrap();
    assert_eq!(json(&a.report), json(&b.report));
    assert_eq!(json(&a.report), json(&p.report));

    let logits = predict_logits(
        &a.model,
        a.head.as_ref().unwrap(),
        &plan,
        g.features().unwrap(),
        Exec::Sequential,
    )
    .unwrap();
    let (classes, _) = g.classes().unwrap();
    let acc = accuracy(&logits.argmax_rows(), classes, &split.test).unwrap();
    assert_eq!(Some(acc), a.report.test.accuracy);
}

#[test]
fn community_detection_reports_nmi() {
    let g = clique_chain(3, 15, 2);
    let split = sample_supervised_fraction(&g, 0.5, 2).unwrap();
    let (model, plan) = setup(&g, 2);
    let out = train_community_detection(model, &g, &plan, &split, &ctx(2, 100, 0.01)).unwrap();
    let nmi = out.report.test.nmi.unwrap();
    assert!((0.0..=1.0 + 1e-12).contains(&nmi));
    assert!(nmi > 0.9, "{nmi}");
}

#[test]
fn empty_masks_and_zero_epochs_are_rejected() {
    let g = clique_chain(2, 10, 0);
    let (model, plan) = setup(&g, 0);
    let split = NodeSplit {
        train: vec![],
        val: vec![1],
        test: vec![2],
        shrunk: false,
    };
    let err = train_node_classification(model.clone(), &g, &plan, &split, &ctx(0, 5, 0.01));
    assert!(matches!(err, Err(Error::Usage(_))));
    let split = sample_supervised_fraction(&g, 0.5, 0).unwrap();
    let err = train_node_classification(model, &g, &plan, &split, &ctx(0, 0, 0.01));
    assert!(matches!(err, Err(Error::Usage(_))));
}

fn grid_link_setup(seed: u64) -> (hcgnn::graph::LinkSplit, HcGnnModel, HierarchyPlan) {
    let g = one_hot_features(generate_grid(8, 8).unwrap()).unwrap();
    let split = split_links(&g, seed).unwrap();
    let h = build_hierarchy(&split.residual, &HierarchyConfig::default(), seed).unwrap();
    let plan = HierarchyPlan::new(&h).unwrap();
    let model = HcGnnModel::new(&ModelConfig::default(), 64, h.num_levels(), seed).unwrap();
    (split, model, plan)
}

#[test]
fn link_prediction_trains_and_checks_hygiene() {
    let (split, model, plan) = grid_link_setup(4);
    let out = train_link_prediction(model.clone(), &split, &plan, &ctx(4, 40, 0.01)).unwrap();
    let a = out.report.test.auc.unwrap();
    assert!((0.0..=1.0).contains(&a));
    assert_eq!(out.report.val_metric, "auc");

    // a plan built on the full graph leaks held-out edges
    let full = one_hot_features(generate_grid(8, 8).unwrap()).unwrap();
    let leaky =
        HierarchyPlan::new(&build_hierarchy(&full, &HierarchyConfig::default(), 4).unwrap())
            .unwrap();
    let err = train_link_prediction(model, &split, &leaky, &ctx(4, 2, 0.01));
    assert!(matches!(err, Err(Error::Data(_))), "{err:?}");
}

fn inductive_graph(seed: u64, role: GraphRole, single_class: bool) -> InductiveGraph {
    let mut g = clique_chain(2, 8, seed);
    if single_class {
        g = g.with_labels(Labels::single(vec![0; 16])).unwrap();
    }
    let h = build_hierarchy(&g, &HierarchyConfig::default(), seed).unwrap();
    InductiveGraph {
        plan: HierarchyPlan::new(&h).unwrap(),
        graph: g,
        role,
    }
}

#[test]
fn inductive_roles_and_degenerate_labels() {
    let model = HcGnnModel::new(&ModelConfig::default(), 4, 3, 0).unwrap();
    let one = vec![inductive_graph(0, GraphRole::Train, false)];
    assert!(matches!(
        train_inductive(model.clone(), &one, &ctx(0, 3, 0.01)),
        Err(Error::Usage(_))
    ));
    let no_test = vec![
        inductive_graph(0, GraphRole::Train, false),
        inductive_graph(1, GraphRole::Val, false),
    ];
    assert!(matches!(
        train_inductive(model.clone(), &no_test, &ctx(0, 3, 0.01)),
        Err(Error::Usage(_))
    ));

    let graphs = vec![
        inductive_graph(0, GraphRole::Train, false),
        inductive_graph(1, GraphRole::Train, false),
        inductive_graph(2, GraphRole::Test, false),
    ];
    let out = train_inductive(model.clone(), &graphs, &ctx(0, 60, 0.01)).unwrap();
    assert_eq!(out.report.val_metric, "train_micro_f1");
    assert!(!out.report.degenerate);
    assert!(out.report.test.micro_f1.unwrap() > 0.9);
    assert_eq!(out.report.level_sizes.len(), 3);

    let flat = vec![
        inductive_graph(0, GraphRole::Train, true),
        inductive_graph(1, GraphRole::Test, true),
    ];
    let model1 = HcGnnModel::new(&ModelConfig::default(), 4, 3, 0).unwrap();
    let out = train_inductive(model1, &flat, &ctx(0, 3, 0.01)).unwrap();
    assert!(out.report.degenerate);
}

#[test]
fn checkpoint_round_trip() {
    let g = clique_chain(2, 10, 3);
    let (model, _) = setup(&g, 3);
    let dir = tempfile::tempdir().unwrap();
    let extra = Matrix::filled(2, 3, 0.5);
    let meta = ManifestMeta {
        hierarchy: HierarchyConfig::default(),
        seed: 3,
    };
    model.save(&dir.path().join("m"), &[&extra], &meta).unwrap();
    let (back, tensors, manifest) = HcGnnModel::load(&dir.path().join("m")).unwrap();
    assert_eq!(back, model);
    assert_eq!(tensors, vec![extra]);
    assert_eq!(manifest.seed, 3);
}

#[test]
fn auc_of_random_scores_is_half() {
    let mut rng = seeded_rng(11, 0);
    let scores: Vec<f64> = (0..100_000).map(|_| rng.gen()).collect();
    let labels: Vec<bool> = (0..100_000).map(|_| rng.gen()).collect();
    let a = auc(&scores, &labels).unwrap();
    assert!((a - 0.5).abs() <= 0.01, "{a}");
    assert_eq!(auc(&[0.1, 0.9], &[false, true]).unwrap(), 1.0);
    assert_eq!(auc(&[0.5, 0.5], &[false, true]).unwrap(), 0.5);
}

#[test]
fn balanced_confusion_gives_half() {
    // confusion [[1,1],[1,1]]
    let truth = [0, 0, 1, 1];
    let pred = [0, 1, 0, 1];
    let mask = [0, 1, 2, 3];
    let (micro, macro_) = micro_macro_f1(&pred, &truth, &mask).unwrap();
    assert_eq!((micro, macro_), (0.5, 0.5));
    assert_eq!(accuracy(&pred, &truth, &mask).unwrap(), 0.5);
    assert_eq!(nmi(&truth, &truth, &mask).unwrap(), 1.0);
    assert!(nmi(&pred, &truth, &mask).unwrap().abs() < 1e-12);
}

proptest! {
    #[test]
    fn single_label_micro_f1_equals_accuracy(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)
    ) {
        let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let mask: Vec<usize> = (0..pred.len()).collect();
        let (micro, macro_) = micro_macro_f1(&pred, &truth, &mask).unwrap();
        prop_assert!((micro - accuracy(&pred, &truth, &mask).unwrap()).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&macro_));
    }

    #[test]
    fn nmi_is_label_permutation_invariant(labels in prop::collection::vec(0usize..4, 2..50)) {
        let relabeled: Vec<usize> = labels.iter().map(|&c| 3 - c).collect();
        let mask: Vec<usize> = (0..labels.len()).collect();
        let v = nmi(&relabeled, &labels, &mask).unwrap();
        prop_assert!((v - 1.0).abs() < 1e-12 || labels.iter().all(|&c| c == labels[0]));
    }

    #[test]
    fn link_split_partitions_edges(rows in 4usize..10, cols in 4usize..10, seed: u64) {
        let g = generate_grid(rows, cols).unwrap();
        let m = g.num_edges();
        let s = split_links(&g, seed).unwrap();
        prop_assert_eq!(s.val_pos.len(), m / 10);
        prop_assert_eq!(s.test_pos.len(), m / 10);
        prop_assert_eq!(s.train_pos.len() + 2 * (m / 10), m);
        prop_assert_eq!(s.train_neg.len(), 2 * s.train_pos.len());
        let mut pos: Vec<_> = s.train_pos.iter().chain(&s.val_pos).chain(&s.test_pos).copied().collect();
        pos.sort_unstable();
        pos.dedup();
        prop_assert_eq!(pos.len(), m);
        let mut neg: Vec<_> = s.train_neg.iter().chain(&s.val_neg).chain(&s.test_neg).copied().collect();
        prop_assert!(neg.iter().all(|&(u, v)| u != v && !g.topology().has_edge(u, v)));
        let k = neg.len();
        neg.sort_unstable();
        neg.dedup();
        prop_assert_eq!(neg.len(), k);
        prop_assert_eq!(s.residual.num_edges(), s.train_pos.len());
    }

    #[test]
    fn removal_quotas(rows in 3usize..12, cols in 3usize..12, f in 0.0f64..0.9, seed: u64) {
        let g = generate_grid(rows, cols).unwrap();
        let m = g.num_edges();
        let global = remove_edges(&g, f, RemovalMode::Global, seed).unwrap();
        prop_assert_eq!(global.num_edges(), m - (f * m as f64).floor() as usize);
        let local = remove_edges(&g, f, RemovalMode::PerNode, seed).unwrap();
        for v in 0..g.num_nodes() {
            let d = g.topology().degree(v);
            let lost = d - local.topology().degree(v);
            prop_assert!(lost >= (f * d as f64).floor() as usize);
        }
        prop_assert!(local.edges().iter().all(|&(u, v)| g.topology().has_edge(u, v)));
    }
}

#[test]
fn half_of_a_twenty_by_twenty_grid() {
    let g = generate_grid(20, 20).unwrap();
    assert_eq!(g.num_edges(), 760);
    let r = remove_edges(&g, 0.5, RemovalMode::Global, 1).unwrap();
    assert_eq!(r.num_edges(), 380);
    let s = split_links(&g, 1).unwrap();
    assert_eq!(
        (s.val_pos.len(), s.test_pos.len(), s.train_pos.len()),
        (76, 76, 608)
    );
}

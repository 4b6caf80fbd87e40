use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::LinkSplit;
use crate::model::{forward, HcGnnModel, HierarchyPlan};
use crate::tensor::{adam_step, AdamState, Matrix, Tape};

use super::metrics::auc;
use super::{
    check_epochs, EpochRecord, RunContext, Selection, TaskKind, TestMetrics, TrainOutcome,
    TrainReport,
};

/// Inner-product scores of node pairs.
pub fn link_scores(z: &Matrix, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(a, b)| z.row(a).iter().zip(z.row(b)).map(|(x, y)| x * y).sum())
        .collect()
}

fn pair_auc(z: &Matrix, pos: &[(usize, usize)], neg: &[(usize, usize)]) -> Result<f64> {
    let mut scores = link_scores(z, pos);
    scores.extend(link_scores(z, neg));
    let labels: Vec<bool> = (0..scores.len()).map(|i| i < pos.len()).collect();
    auc(&scores, &labels)
}

/// Fails if a held-out positive edge is visible to message passing.
fn check_hygiene(split: &LinkSplit, plan: &HierarchyPlan) -> Result<()> {
    let base = plan.neighborhoods(0);
    for &(u, v) in split.val_pos.iter().chain(&split.test_pos) {
        if split.residual.topology().has_edge(u, v) || base.segment(u).binary_search(&v).is_ok() {
            return Err(Error::Data(format!(
                "held-out edge ({u}, {v}) is present in the message-passing graph"
            )));
        }
    }
    Ok(())
}

/// Logistic loss on inner products of the final embeddings over the
/// training positives and negatives; validation AUC selects the epoch.
/// `plan` must come from a hierarchy built on `split.residual`.
pub fn train_link_prediction(
    mut model: HcGnnModel,
    split: &LinkSplit,
    plan: &HierarchyPlan,
    ctx: &RunContext,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    check_epochs(ctx)?;
    let graph = &split.residual;
    let features = graph
        .features()
        .ok_or_else(|| Error::Usage("graph has no node features".into()))?;
    if plan.num_nodes() != graph.num_nodes() {
        return Err(Error::Shape(
            "hierarchy does not match the residual graph".into(),
        ));
    }
    for (name, set) in [
        ("train_pos", &split.train_pos),
        ("train_neg", &split.train_neg),
        ("val_pos", &split.val_pos),
        ("val_neg", &split.val_neg),
        ("test_pos", &split.test_pos),
        ("test_neg", &split.test_neg),
    ] {
        if set.is_empty() {
            return Err(Error::Usage(format!("empty {name} set")));
        }
    }
    check_hygiene(split, plan)?;

    let pairs: Arc<[(usize, usize)]> = split
        .train_pos
        .iter()
        .chain(&split.train_neg)
        .copied()
        .collect();
    let labels: Arc<[f64]> = (0..pairs.len())
        .map(|i| if i < split.train_pos.len() { 1.0 } else { 0.0 })
        .collect();
    let mut state = AdamState::new(model.params());
    let mut epochs = Vec::with_capacity(ctx.epochs);
    let mut selection = Selection::new();

    for epoch in 0..ctx.epochs {
        let mut tape = Tape::new(ctx.exec);
        let bound = model.bind(&mut tape, true)?;
        let out = forward(&mut tape, &bound, plan, features)?;
        let scores = tape.pair_dot(out.z, pairs.clone())?;
        let loss = tape.bce_with_logits(scores, labels.clone())?;
        let z = tape.value(out.z);
        let val = pair_auc(z, &split.val_pos, &split.val_neg)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: tape.value(loss).item(),
            val_metric: val,
        });
        selection.offer(epoch, val, || (model.clone(), z.clone()));

        tape.backward(loss)?;
        let grads: Vec<Option<&Matrix>> = bound.params().iter().map(|&t| tape.grad(t)).collect();
        adam_step(&mut model.params_mut(), &grads, &mut state, &ctx.adam)?;
    }

    let (selected, best_val, (model, z)) = selection.take().expect("at least one epoch");
    let test_auc = pair_auc(&z, &split.test_pos, &split.test_neg)?;
    let report = TrainReport {
        task: TaskKind::LinkPred,
        seed: ctx.seed,
        val_metric: "auc".into(),
        epochs,
        selected_epoch: selected,
        best_val,
        test: TestMetrics {
            auc: Some(test_auc),
            ..Default::default()
        },
        level_sizes: vec![plan.level_sizes().to_vec()],
        degenerate: false,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        report,
        model,
        head: None,
    })
}

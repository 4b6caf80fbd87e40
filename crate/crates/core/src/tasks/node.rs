use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::{AttributedGraph, NodeSplit};
use crate::model::{forward, HcGnnModel, HierarchyPlan};
use crate::tensor::{adam_step, AdamState, Matrix, Tape};

use super::metrics::{accuracy, micro_macro_f1, nmi};
use super::{
    check_epochs, ClassifierHead, EpochRecord, RunContext, Selection, TaskKind, TestMetrics,
    TrainOutcome, TrainReport,
};

/// Class logits for every node of the plan's graph.
pub fn predict_logits(
    model: &HcGnnModel,
    head: &ClassifierHead,
    plan: &HierarchyPlan,
    features: &Arc<Matrix>,
    exec: Exec,
) -> Result<Matrix> {
    let mut tape = Tape::new(exec);
    let bound = model.bind(&mut tape, false)?;
    let out = forward(&mut tape, &bound, plan, features)?;
    let w = tape.leaf(head.w.clone(), false);
    let b = tape.leaf(head.b.clone(), false);
    let xw = tape.matmul(out.z, w)?;
    let logits = tape.add_bias(xw, b)?;
    Ok(tape.value(logits).clone())
}

pub(super) fn node_inputs<'g>(
    graph: &'g AttributedGraph,
    plan: &HierarchyPlan,
) -> Result<(&'g Arc<Matrix>, &'g [usize], usize)> {
    let features = graph
        .features()
        .ok_or_else(|| Error::Usage("graph has no node features".into()))?;
    let (classes, num_classes) = graph
        .classes()
        .ok_or_else(|| Error::Usage("task needs single-label node classes".into()))?;
    if plan.num_nodes() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "hierarchy over {} nodes for a graph with {}",
            plan.num_nodes(),
            graph.num_nodes()
        )));
    }
    Ok((features, classes, num_classes))
}

fn node_task(
    mut model: HcGnnModel,
    graph: &AttributedGraph,
    plan: &HierarchyPlan,
    split: &NodeSplit,
    ctx: &RunContext,
    task: TaskKind,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    check_epochs(ctx)?;
    let (features, classes, num_classes) = node_inputs(graph, plan)?;
    for (name, set) in [
        ("train", &split.train),
        ("val", &split.val),
        ("test", &split.test),
    ] {
        if set.is_empty() {
            return Err(Error::Usage(format!("empty {name} mask")));
        }
    }
    let mut head = ClassifierHead::new(model.embed_dim(), num_classes, ctx.seed);
    let mut state = {
        let mut p = model.params();
        p.extend([&head.w, &head.b]);
        AdamState::new(p)
    };
    let targets: Arc<[usize]> = classes.into();
    let mask: Arc<[usize]> = split.train.as_slice().into();
    let mut epochs = Vec::with_capacity(ctx.epochs);
    let mut selection = Selection::new();

    for epoch in 0..ctx.epochs {
        let mut tape = Tape::new(ctx.exec);
        let bound = model.bind(&mut tape, true)?;
        let out = forward(&mut tape, &bound, plan, features)?;
        let w = tape.leaf(head.w.clone(), true);
        let b = tape.leaf(head.b.clone(), true);
        let xw = tape.matmul(out.z, w)?;
        let logits = tape.add_bias(xw, b)?;
        let loss = tape.cross_entropy(logits, targets.clone(), mask.clone())?;
        let train_loss = tape.value(loss).item();
        let logit_values = tape.value(logits);
        let pred = logit_values.argmax_rows();
        let val = accuracy(&pred, classes, &split.val)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_metric: val,
        });
        selection.offer(epoch, val, || {
            (model.clone(), head.clone(), logit_values.clone())
        });

        tape.backward(loss)?;
        let mut tensors = bound.params();
        tensors.extend([w, b]);
        let grads: Vec<Option<&Matrix>> = tensors.iter().map(|&t| tape.grad(t)).collect();
        let mut params = model.params_mut();
        params.extend([&mut head.w, &mut head.b]);
        adam_step(&mut params, &grads, &mut state, &ctx.adam)?;
    }

    let (selected, best_val, (model, head, logits)) = selection.take().expect("at least one epoch");
    let pred = logits.argmax_rows();
    let (micro, macro_) = micro_macro_f1(&pred, classes, &split.test)?;
    let acc = accuracy(&pred, classes, &split.test)?;
    assert!(
        (micro - acc).abs() <= 1e-12,
        "micro-F1 {micro} differs from accuracy {acc} on single-label data"
    );
    let nmi_value = match task {
        TaskKind::Community => Some(nmi(&pred, classes, &split.test)?),
        _ => None,
    };
    let report = TrainReport {
        task,
        seed: ctx.seed,
        val_metric: "micro_f1".into(),
        epochs,
        selected_epoch: selected,
        best_val,
        test: TestMetrics {
            micro_f1: Some(micro),
            macro_f1: Some(macro_),
            accuracy: Some(acc),
            auc: None,
            nmi: nmi_value,
        },
        level_sizes: vec![plan.level_sizes().to_vec()],
        degenerate: num_classes <= 1,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        report,
        model,
        head: Some(head),
    })
}

/// Masked cross entropy on the training nodes; validation micro-F1 selects
/// the epoch whose parameters are tested.
pub fn train_node_classification(
    model: HcGnnModel,
    graph: &AttributedGraph,
    plan: &HierarchyPlan,
    split: &NodeSplit,
    ctx: &RunContext,
) -> Result<TrainOutcome> {
    node_task(model, graph, plan, split, ctx, TaskKind::NodeClass)
}

/// Node classification over community labels, additionally scored by NMI on
/// the test nodes.
pub fn train_community_detection(
    model: HcGnnModel,
    graph: &AttributedGraph,
    plan: &HierarchyPlan,
    split: &NodeSplit,
    ctx: &RunContext,
) -> Result<TrainOutcome> {
    node_task(model, graph, plan, split, ctx, TaskKind::Community)
}

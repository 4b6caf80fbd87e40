use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, GraphRole, Labels};
use crate::model::{HcGnnModel, HierarchyPlan};
use crate::tensor::{adam_step, AdamState, Matrix, Tape};

use super::metrics::{micro_macro_f1, multilabel_f1};
use super::node::predict_logits;
use super::{
    check_epochs, ClassifierHead, EpochRecord, RunContext, Selection, TaskKind, TestMetrics,
    TrainOutcome, TrainReport,
};

/// One graph of a multi-graph dataset with its prebuilt hierarchy.
#[derive(Debug, Clone)]
pub struct InductiveGraph {
    pub graph: AttributedGraph,
    pub role: GraphRole,
    pub plan: HierarchyPlan,
}

struct Prepared<'a> {
    features: &'a Arc<Matrix>,
    labels: &'a Labels,
    plan: &'a HierarchyPlan,
}

fn prepare(g: &InductiveGraph) -> Result<Prepared<'_>> {
    let features = g
        .graph
        .features()
        .ok_or_else(|| Error::Usage("every graph needs node features".into()))?;
    let labels = g
        .graph
        .labels()
        .ok_or_else(|| Error::Usage("every graph needs labels".into()))?;
    if g.plan.num_nodes() != g.graph.num_nodes() {
        return Err(Error::Shape("hierarchy does not match its graph".into()));
    }
    Ok(Prepared {
        features,
        labels,
        plan: &g.plan,
    })
}

/// Pooled micro- and macro-F1 over all nodes of `graphs`.
fn pooled_f1(
    model: &HcGnnModel,
    head: &ClassifierHead,
    graphs: &[Prepared<'_>],
    ctx: &RunContext,
) -> Result<(f64, f64)> {
    let mut logits = Vec::new();
    for g in graphs {
        logits.push(predict_logits(model, head, g.plan, g.features, ctx.exec)?);
    }
    match graphs[0].labels {
        Labels::Single { .. } => {
            let mut pred = Vec::new();
            let mut truth = Vec::new();
            for (g, l) in graphs.iter().zip(&logits) {
                pred.extend(l.argmax_rows());
                if let Labels::Single { classes, .. } = g.labels {
                    truth.extend(classes.iter().copied());
                }
            }
            let all: Vec<usize> = (0..pred.len()).collect();
            micro_macro_f1(&pred, &truth, &all)
        }
        Labels::Multi(_) => {
            let c = logits[0].cols();
            let mut l_rows = Vec::new();
            let mut t_rows = Vec::new();
            for (g, l) in graphs.iter().zip(&logits) {
                l_rows.extend_from_slice(l.as_slice());
                if let Labels::Multi(t) = g.labels {
                    t_rows.extend_from_slice(t.as_slice());
                }
            }
            let n = l_rows.len() / c;
            let all: Vec<usize> = (0..n).collect();
            multilabel_f1(
                &Matrix::from_vec(n, c, l_rows)?,
                &Matrix::from_vec(n, c, t_rows)?,
                &all,
            )
        }
    }
}

/// Trains one model on the training graphs, one Adam step per graph per
/// epoch in dataset order, and tests on unseen graphs. Validation graphs
/// select the epoch; without any, the training graphs do.
pub fn train_inductive(
    mut model: HcGnnModel,
    graphs: &[InductiveGraph],
    ctx: &RunContext,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    check_epochs(ctx)?;
    if graphs.len() < 2 {
        return Err(Error::Usage(format!(
            "inductive training needs at least 2 graphs, got {}",
            graphs.len()
        )));
    }
    let prepared = graphs.iter().map(prepare).collect::<Result<Vec<_>>>()?;
    let outputs = prepared[0].labels.num_outputs();
    let multi = matches!(prepared[0].labels, Labels::Multi(_));
    for p in &prepared {
        if matches!(p.labels, Labels::Multi(_)) != multi || p.labels.num_outputs() != outputs {
            return Err(Error::Data("graphs disagree on the label space".into()));
        }
        if p.features.cols() != model.input_dim() {
            return Err(Error::Shape("graphs disagree on the feature width".into()));
        }
    }
    let by_role = |role: GraphRole| -> Vec<usize> {
        (0..graphs.len())
            .filter(|&i| graphs[i].role == role)
            .collect()
    };
    let (train, val, test) = (
        by_role(GraphRole::Train),
        by_role(GraphRole::Val),
        by_role(GraphRole::Test),
    );
    if train.is_empty() || test.is_empty() {
        return Err(Error::Usage(
            "need at least one train and one test graph".into(),
        ));
    }
    let degenerate = !multi && {
        let mut seen = BTreeSet::new();
        for p in &prepared {
            if let Labels::Single { classes, .. } = p.labels {
                seen.extend(classes.iter().copied());
            }
        }
        seen.len() <= 1
    };
    let pick = |ids: &[usize]| -> Vec<Prepared<'_>> {
        ids.iter()
            .map(|&i| Prepared {
                features: prepared[i].features,
                labels: prepared[i].labels,
                plan: prepared[i].plan,
            })
            .collect()
    };
    let select_on = if val.is_empty() {
        pick(&train)
    } else {
        pick(&val)
    };

    // Per-graph loss inputs.
    let targets: Vec<LossTarget> = train
        .iter()
        .map(|&i| match prepared[i].labels {
            Labels::Single { classes, .. } => {
                LossTarget::Classes(classes.clone(), (0..classes.len()).collect())
            }
            Labels::Multi(t) => LossTarget::Flat(t.as_slice().into()),
        })
        .collect();

    let mut head = ClassifierHead::new(model.embed_dim(), outputs, ctx.seed);
    let mut state = {
        let mut p = model.params();
        p.extend([&head.w, &head.b]);
        AdamState::new(p)
    };
    let mut epochs = Vec::with_capacity(ctx.epochs);
    let mut selection = Selection::new();

    for epoch in 0..ctx.epochs {
        let (val_metric, _) = pooled_f1(&model, &head, &select_on, ctx)?;
        selection.offer(epoch, val_metric, || (model.clone(), head.clone()));
        let mut loss_sum = 0.0;
        for (&i, target) in train.iter().zip(&targets) {
            let g = &prepared[i];
            let mut tape = Tape::new(ctx.exec);
            let bound = model.bind(&mut tape, true)?;
            let out = crate::model::forward(&mut tape, &bound, g.plan, g.features)?;
            let w = tape.leaf(head.w.clone(), true);
            let b = tape.leaf(head.b.clone(), true);
            let xw = tape.matmul(out.z, w)?;
            let logits = tape.add_bias(xw, b)?;
            let loss = match target {
                LossTarget::Classes(t, m) => tape.cross_entropy(logits, t.clone(), m.clone())?,
                LossTarget::Flat(t) => {
                    let n = g.plan.num_nodes();
                    let flat = tape.reshape(logits, n * outputs, 1)?;
                    tape.bce_with_logits(flat, t.clone())?
                }
            };
            loss_sum += tape.value(loss).item();
            tape.backward(loss)?;
            let mut tensors = bound.params();
            tensors.extend([w, b]);
            let grads: Vec<Option<&Matrix>> = tensors.iter().map(|&t| tape.grad(t)).collect();
            let mut params = model.params_mut();
            params.extend([&mut head.w, &mut head.b]);
            adam_step(&mut params, &grads, &mut state, &ctx.adam)?;
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_metric,
        });
    }

    let (selected, best_val, (model, head)) = selection.take().expect("at least one epoch");
    let (micro, macro_) = pooled_f1(&model, &head, &pick(&test), ctx)?;
    let report = TrainReport {
        task: TaskKind::Inductive,
        seed: ctx.seed,
        val_metric: if val.is_empty() {
            "train_micro_f1"
        } else {
            "micro_f1"
        }
        .into(),
        epochs,
        selected_epoch: selected,
        best_val,
        test: TestMetrics {
            micro_f1: Some(micro),
            macro_f1: Some(macro_),
            ..Default::default()
        },
        level_sizes: graphs
            .iter()
            .map(|g| g.plan.level_sizes().to_vec())
            .collect(),
        degenerate,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        report,
        model,
        head: Some(head),
    })
}

enum LossTarget {
    Classes(Arc<[usize]>, Arc<[usize]>),
    Flat(Arc<[f64]>),
}

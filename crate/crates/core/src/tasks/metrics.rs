use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

fn check_aligned(a: usize, b: usize, mask: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{a} predictions for {b} labels")));
    }
    if let Some(&v) = mask.iter().find(|&&v| v >= a) {
        return Err(Error::Index(format!(
            "mask row {v} out of range for {a} rows"
        )));
    }
    Ok(())
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Micro- and macro-averaged F1 of single-label predictions over `mask`.
/// Macro averaging runs over classes that occur in either labeling.
pub fn micro_macro_f1(pred: &[usize], truth: &[usize], mask: &[usize]) -> Result<(f64, f64)> {
    check_aligned(pred.len(), truth.len(), mask)?;
    if mask.is_empty() {
        return Err(Error::UndefinedMetric("F1 over an empty mask".into()));
    }
    let mut counts: HashMap<usize, (usize, usize, usize)> = HashMap::new();
    let mut correct = 0;
    for &v in mask {
        let (p, t) = (pred[v], truth[v]);
        if p == t {
            correct += 1;
            counts.entry(t).or_default().0 += 1;
        } else {
            counts.entry(p).or_default().1 += 1;
            counts.entry(t).or_default().2 += 1;
        }
    }
    let micro = correct as f64 / mask.len() as f64;
    let mut classes: Vec<_> = counts.into_iter().collect();
    classes.sort_unstable_by_key(|&(c, _)| c);
    let macro_ = classes
        .iter()
        .map(|&(_, (tp, fp, fn_))| f1(tp, fp, fn_))
        .sum::<f64>()
        / classes.len() as f64;
    Ok((micro, macro_))
}

pub fn accuracy(pred: &[usize], truth: &[usize], mask: &[usize]) -> Result<f64> {
    check_aligned(pred.len(), truth.len(), mask)?;
    if mask.is_empty() {
        return Err(Error::UndefinedMetric("accuracy over an empty mask".into()));
    }
    Ok(mask.iter().filter(|&&v| pred[v] == truth[v]).count() as f64 / mask.len() as f64)
}

/// Micro- and macro-F1 for multi-label targets, predicting label `j` when
/// `logits[v][j] > 0`.
pub fn multilabel_f1(logits: &Matrix, targets: &Matrix, mask: &[usize]) -> Result<(f64, f64)> {
    if logits.shape() != targets.shape() {
        return Err(Error::Shape(format!(
            "logits {:?} vs targets {:?}",
            logits.shape(),
            targets.shape()
        )));
    }
    check_aligned(logits.rows(), targets.rows(), mask)?;
    if mask.is_empty() {
        return Err(Error::UndefinedMetric("F1 over an empty mask".into()));
    }
    let c = logits.cols();
    let mut per = vec![(0usize, 0usize, 0usize); c];
    for &v in mask {
        for (j, slot) in per.iter_mut().enumerate() {
            let p = logits.get(v, j) > 0.0;
            let t = targets.get(v, j) > 0.5;
            match (p, t) {
                (true, true) => slot.0 += 1,
                (true, false) => slot.1 += 1,
                (false, true) => slot.2 += 1,
                (false, false) => {}
            }
        }
    }
    let (tp, fp, fn_) = per
        .iter()
        .fold((0, 0, 0), |a, &(x, y, z)| (a.0 + x, a.1 + y, a.2 + z));
    let macro_ = per.iter().map(|&(a, b, d)| f1(a, b, d)).sum::<f64>() / c.max(1) as f64;
    Ok((f1(tp, fp, fn_), macro_))
}

/// Area under the ROC curve as a rank statistic; tied scores share their
/// mean rank.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Normalized mutual information with the arithmetic mean of the two
/// entropies in the denominator. Two constant labelings score 1.
pub fn nmi(pred: &[usize], truth: &[usize], mask: &[usize]) -> Result<f64> {
    check_aligned(pred.len(), truth.len(), mask)?;
    if mask.is_empty() {
        return Err(Error::UndefinedMetric("NMI over an empty mask".into()));
    }
    let n = mask.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pa: HashMap<usize, usize> = HashMap::new();
    let mut pb: HashMap<usize, usize> = HashMap::new();
    for &v in mask {
        *joint.entry((pred[v], truth[v])).or_default() += 1;
        *pa.entry(pred[v]).or_default() += 1;
        *pb.entry(truth[v]).or_default() += 1;
    }
    let entropy = |m: &HashMap<usize, usize>| {
        let mut counts: Vec<usize> = m.values().copied().collect();
        counts.sort_unstable();
        -counts
            .iter()
            .map(|&c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    };
    let (ha, hb) = (entropy(&pa), entropy(&pb));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mut cells: Vec<_> = joint.into_iter().collect();
    cells.sort_unstable();
    let mi: f64 = cells
        .iter()
        .map(|&((a, b), c)| {
            let pab = c as f64 / n;
            let pa_ = pa[&a] as f64 / n;
            let pb_ = pb[&b] as f64 / n;
            pab * (pab / (pa_ * pb_)).ln()
        })
        .sum();
    Ok((mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_hand_counts() {
        let (micro, macro_) = micro_macro_f1(&[0, 1, 0, 1], &[0, 0, 1, 1], &[0, 1, 2, 3]).unwrap();
        assert_eq!(micro, 0.5);
        assert_eq!(macro_, 0.5);
        let (micro, macro_) = micro_macro_f1(&[2, 1, 0], &[2, 1, 0], &[0, 1, 2]).unwrap();
        assert_eq!((micro, macro_), (1.0, 1.0));
        // class 0: tp 2 fp 1 fn 0 -> 0.8; class 1: tp 0 fp 0 fn 1 -> 0
        let (micro, macro_) = micro_macro_f1(&[0, 0, 0], &[0, 0, 1], &[0, 1, 2]).unwrap();
        assert!((micro - 2.0 / 3.0).abs() < 1e-15);
        assert!((macro_ - 0.4).abs() < 1e-15);
    }

    #[test]
    fn micro_equals_accuracy() {
        let pred = [3, 1, 2, 2, 0, 1];
        let truth = [3, 2, 2, 1, 0, 1];
        let mask = [0, 1, 3, 4, 5];
        let (micro, _) = micro_macro_f1(&pred, &truth, &mask).unwrap();
        assert_eq!(micro, accuracy(&pred, &truth, &mask).unwrap());
    }

    #[test]
    fn auc_ranks() {
        assert_eq!(
            auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(),
            0.75
        );
        assert_eq!(auc(&[1.0, 2.0], &[false, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5, 0.5, 0.5], &[true, false, false]).unwrap(), 0.5);
        assert!(matches!(
            auc(&[0.1, 0.2], &[true, true]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn nmi_edges() {
        let all = [0, 1, 2, 3, 4, 5];
        let t = [0, 0, 1, 1, 2, 2];
        assert!((nmi(&[5, 5, 3, 3, 9, 9], &t, &all).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0; 6], &t, &all).unwrap(), 0.0);
        assert_eq!(nmi(&[1; 6], &[4; 6], &all).unwrap(), 1.0);
    }

    #[test]
    fn nmi_hand_value() {
        // pred {0,0,1,1} vs truth {0,1,1,1}
        let n = nmi(&[0, 0, 1, 1], &[0, 1, 1, 1], &[0, 1, 2, 3]).unwrap();
        let ln2 = 2f64.ln();
        let h_pred = ln2;
        let h_truth = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        let mi = 0.25 * (0.25f64 / (0.5 * 0.25)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.75)).ln()
            + 0.5 * (0.5f64 / (0.5 * 0.75)).ln();
        assert!((n - mi / ((h_pred + h_truth) / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn multilabel_counts() {
        let logits = Matrix::from_rows(&[[1.0, -1.0], [1.0, 1.0]]).unwrap();
        let targets = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let (micro, _) = multilabel_f1(&logits, &targets, &[0, 1]).unwrap();
        // tp 2, fp 1, fn 0
        assert!((micro - 0.8).abs() < 1e-15);
    }
}

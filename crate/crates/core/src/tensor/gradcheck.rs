//! Central finite-difference gradient checking.

use crate::error::{Error, Result};
use crate::exec::Exec;

use super::matrix::Matrix;
use super::tape::{Tape, Tensor};

/// Denominator floor for relative errors, so that coordinates whose true
/// derivative is ~0 are compared absolutely.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error over the checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates where the one-sided slopes disagree, i.e. `f` has a kink
    /// within `h` of the point. These are skipped.
    pub excluded: Vec<usize>,
}

fn eval<F>(f: &F, at: &Matrix) -> Result<f64>
where
    F: Fn(&mut Tape, Tensor) -> Result<Tensor>,
{
    let mut tape = Tape::new(Exec::Sequential);
    let x = tape.leaf(at.clone(), false);
    let y = f(&mut tape, x)?;
    if y.shape() != (1, 1) {
        return Err(Error::Shape("grad_check needs a scalar function".into()));
    }
    Ok(tape.value(y).item())
}

/// Compares the tape gradient of scalar `f` at `at` against central
/// differences with step `h`, coordinate by coordinate.
pub fn grad_check<F>(f: F, at: &Matrix, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Tensor) -> Result<Tensor>,
{
    let mut tape = Tape::new(Exec::Sequential);
    let x = tape.leaf(at.clone(), true);
    let y = f(&mut tape, x)?;
    tape.backward(y)?;
    let analytic = tape
        .grad(x)
        .cloned()
        .unwrap_or_else(|| Matrix::zeros(at.rows(), at.cols()));
    let f0 = tape.value(y).item();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        excluded: Vec::new(),
    };
    let mut probe = at.clone();
    for j in 0..at.as_slice().len() {
        let orig = at.as_slice()[j];
        probe.as_mut_slice()[j] = orig + h;
        let fp = eval(&f, &probe)?;
        probe.as_mut_slice()[j] = orig - h;
        let fm = eval(&f, &probe)?;
        probe.as_mut_slice()[j] = orig;

        let forward = (fp - f0) / h;
        let backward = (f0 - fm) / h;
        let scale = forward.abs().max(backward.abs()).max(1.0);
        if (forward - backward).abs() > 1e-2 * scale {
            report.excluded.push(j);
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic.as_slice()[j];
        let denom = a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
        report.max_rel_error = report.max_rel_error.max((a - numeric).abs() / denom);
        report.checked += 1;
    }
    Ok(report)
}

//! Central finite differences as an oracle for the analytic reverse pass.

use crate::cells::BackwardOptions;
use crate::engine::model::{GradStore, Model};
use crate::engine::unroll::{batch_loss, batch_loss_and_grad_with, Sequence};
use crate::error::{Error, Result};
use crate::numkit::Scalar;

/// Denominator floor of the relative error.
pub const REL_ERR_FLOOR: f64 = 1e-8;

/// `(L(θ+ε) − L(θ−ε)) / 2ε` for every scalar parameter.
pub fn finite_diff_grad<T: Scalar>(
    model: &Model<T>,
    batch: &[Sequence<T>],
    eps: f64,
) -> Result<GradStore<T>> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Argument(format!(
            "finite-difference step {eps} outside [1e-7, 1e-3]"
        )));
    }
    let mut probe = model.clone();
    let mut out = GradStore::zeros_for(model);
    let n_blocks = model.params.slices().len();
    let e = T::of(eps);
    let two_e = T::of(2.0 * eps);
    for b in 0..n_blocks {
        let len = model.params.slices()[b].len();
        for k in 0..len {
            let orig = probe.params.blocks_mut()[b][k];
            probe.params.blocks_mut()[b][k] = orig + e;
            let plus = batch_loss(&probe, batch)?;
            probe.params.blocks_mut()[b][k] = orig - e;
            let minus = batch_loss(&probe, batch)?;
            probe.params.blocks_mut()[b][k] = orig;
            out.params.blocks_mut()[b][k] = (plus - minus) / two_e;
        }
    }
    Ok(out)
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_ERR_FLOOR)
}

/// Outcome of comparing analytic and numeric gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub passed: bool,
    pub tolerance: f64,
    pub max_rel_err: f64,
    /// Parameter block holding the worst entry, e.g. `proj.w`.
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} max_rel_err={:.3e} tol={:.1e} worst={}[{}] analytic={:.6e} numeric={:.6e} checked={}",
            if self.passed { "PASS" } else { "FAIL" },
            self.max_rel_err,
            self.tolerance,
            self.worst_param,
            self.worst_index,
            self.analytic,
            self.numeric,
            self.checked
        )
    }
}

/// Compares analytic BPTT gradients with central differences (ε = 1e-5).
/// Gradient clipping is never applied here.
pub fn gradient_check<T: Scalar>(
    model: &Model<T>,
    batch: &[Sequence<T>],
    tol: f64,
) -> Result<GradCheckReport> {
    gradient_check_with(model, batch, tol, 1e-5, BackwardOptions::default())
}

#[doc(hidden)]
pub fn gradient_check_with<T: Scalar>(
    model: &Model<T>,
    batch: &[Sequence<T>],
    tol: f64,
    eps: f64,
    opts: BackwardOptions,
) -> Result<GradCheckReport> {
    if tol <= 0.0 {
        return Err(Error::Argument("tolerance must be positive".into()));
    }
    let (_, analytic) = batch_loss_and_grad_with(model, batch, opts)?;
    let numeric = finite_diff_grad(model, batch, eps)?;
    let mut report = GradCheckReport {
        passed: true,
        tolerance: tol,
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let a_blocks = analytic.params.blocks(&model.cfg);
    let n_blocks = numeric.params.blocks(&model.cfg);
    for (ab, nb) in a_blocks.iter().zip(&n_blocks) {
        for (k, (&a, &n)) in ab.data.iter().zip(nb.data).enumerate() {
            let (a, n) = (a.to_f64_lossless(), n.to_f64_lossless());
            let err = relative_error(a, n);
            report.checked += 1;
            if err > report.max_rel_err || report.worst_param.is_empty() || err.is_nan() {
                report.max_rel_err = err;
                report.worst_param = ab.name.clone();
                report.worst_index = k;
                report.analytic = a;
                report.numeric = n;
            }
        }
    }
    report.passed = report.max_rel_err < tol;
    Ok(report)
}

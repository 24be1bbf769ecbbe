//! Poisson-likelihood losses for reverse-rate learning.
//!
//! Every loss has the shape `w * (y - c ln y)`, minimized at `y = c`.

use alloc::vec::Vec;

use crate::error::{ensure, ensure_len, Result};
use crate::math::{ln, pairwise_sum};
use crate::schedule::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `(t_k - t_{k-1}) e^{-t_k} [y - c ln y]`.
    Instantaneous,
    /// `(e^{-t_{k-1}} - e^{-t_k}) [y - c ln y]`.
    FiniteTime,
    /// General-process rate loss `w_k (t_k - t_{k-1}) [y - λ ln y]` with
    /// `w_k = (t_k - t_{k-1})(1 - e^{-t_k})`.
    GeneralInstantaneous,
}

/// Reduction order for batch means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Summation {
    Sequential,
    #[default]
    Pairwise,
}

impl Summation {
    pub fn sum(self, values: &[f64]) -> f64 {
        match self {
            Summation::Sequential => values.iter().sum(),
            Summation::Pairwise => pairwise_sum(values),
        }
    }
}

/// Training weight of observation index `k` (`1..=T`).
pub fn weight(kind: LossKind, sched: &Schedule, k: usize) -> f64 {
    match kind {
        LossKind::Instantaneous => sched.step(k) * sched.survival(k),
        LossKind::FiniteTime => sched.survival_drop(k),
        LossKind::GeneralInstantaneous => general_weight(sched, k) * sched.step(k),
    }
}

/// The general-process weight `w_k = (t_k - t_{k-1})(1 - e^{-t_k})`.
pub fn general_weight(sched: &Schedule, k: usize) -> f64 {
    sched.step(k) * sched.decayed(k)
}

/// `y - c ln y`; the log term is dropped when `c = 0`.
#[inline]
pub fn poisson_nll(y: f64, target: f64) -> f64 {
    if target == 0.0 {
        y
    } else {
        y - target * ln(y)
    }
}

fn check_args(y: f64, target: f64) -> Result<()> {
    ensure(y > 0.0 && y.is_finite(), "prediction must be positive and finite")?;
    ensure(target >= 0.0 && target.is_finite(), "target must be nonnegative and finite")
}

/// Loss of one component with prediction `y` and target `c = (X_0 - X_t)_i`.
pub fn per_element_loss(kind: LossKind, y: f64, target: f64, k: usize, sched: &Schedule) -> Result<f64> {
    check_args(y, target)?;
    sched.check_index(k)?;
    Ok(weight(kind, sched, k) * poisson_nll(y, target))
}

/// `d/dy` of [`per_element_loss`].
pub fn per_element_grad(kind: LossKind, y: f64, target: f64, k: usize, sched: &Schedule) -> Result<f64> {
    check_args(y, target)?;
    sched.check_index(k)?;
    Ok(weight(kind, sched, k) * (1.0 - target / y))
}

/// Mean of per-element losses over all components and samples.
pub fn batch_loss(
    kind: LossKind,
    predictions: &[Vec<f64>],
    x0: &[Vec<u32>],
    xt: &[Vec<u32>],
    ks: &[usize],
    sched: &Schedule,
    summation: Summation,
) -> Result<f64> {
    let n = predictions.len();
    ensure(n > 0, "batch must be nonempty")?;
    ensure_len(n, x0.len())?;
    ensure_len(n, xt.len())?;
    ensure_len(n, ks.len())?;
    let mut terms = Vec::new();
    for i in 0..n {
        let dims = predictions[i].len();
        ensure_len(dims, x0[i].len())?;
        ensure_len(dims, xt[i].len())?;
        for d in 0..dims {
            ensure(xt[i][d] <= x0[i][d], "corrupted state exceeds the clean state")?;
            let target = (x0[i][d] - xt[i][d]) as f64;
            terms.push(per_element_loss(kind, predictions[i][d], target, ks[i], sched)?);
        }
    }
    Ok(summation.sum(&terms) / terms.len() as f64)
}

/// `Σ_r dt (κ_r - λ_r ln κ_r)` over transition types.
pub fn general_loss(kappa: &[f64], lambda: &[f64], dt: f64) -> Result<f64> {
    ensure_len(kappa.len(), lambda.len())?;
    ensure(dt >= 0.0, "time step must be nonnegative")?;
    let mut total = 0.0;
    for (&k, &l) in kappa.iter().zip(lambda) {
        check_args(k, l)?;
        total += dt * poisson_nll(k, l);
    }
    Ok(total)
}

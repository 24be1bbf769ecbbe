//! Observation times.
//!
//! The Fisher information of `Binom(o, q)` in `q = e^{-t}` is `o / (q(1-q))`,
//! whose time-dependent part integrates to `Logit(e^{-t})`. The schedule
//! places `t_1..t_T` uniformly in that logit, symmetric about `ln 2`, with
//! `t_1 = -ln(1 - e^{-t_T})` so that `e^{-t_1} = 1 - e^{-t_T}`.

use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::math::{exp, ln_1p, one_minus_exp_neg, sigmoid, softplus};

/// Unnormalized observation-time density `1/(1 - e^{-t})`.
pub fn fisher_density(t: f64) -> Result<f64> {
    ensure(t > 0.0, "Fisher density is singular at t <= 0")?;
    Ok(1.0 / one_minus_exp_neg(t))
}

/// Times `0 = t_0 < t_1 < ... < t_T`, with `e^{-t_k}` and `1 - e^{-t_k}`
/// stored separately so both stay accurate at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    times: Vec<f64>,
    survival: Vec<f64>,
    decayed: Vec<f64>,
}

impl Schedule {
    /// `T` logit-uniform times ending at `horizon`.
    pub fn fisher(count: usize, horizon: f64) -> Result<Self> {
        ensure(count >= 2, "schedule needs T >= 2")?;
        ensure(
            horizon > core::f64::consts::LN_2 && horizon.is_finite(),
            "schedule horizon must exceed ln 2",
        )?;
        // Logit(1 - e^{-t_T}) = ln(e^{t_T} - 1).
        let top = horizon + ln_1p(-exp(-horizon));
        let denom = (count - 1) as f64;
        let mut times = Vec::with_capacity(count + 1);
        let mut survival = Vec::with_capacity(count + 1);
        let mut decayed = Vec::with_capacity(count + 1);
        times.push(0.0);
        survival.push(1.0);
        decayed.push(0.0);
        for k in 1..=count {
            // Exactly antisymmetric under k <-> T+1-k.
            let x = top * ((count + 1) as f64 - 2.0 * k as f64) / denom;
            times.push(softplus(-x));
            survival.push(sigmoid(x));
            decayed.push(sigmoid(-x));
        }
        times[count] = horizon;
        let sched = Self { times, survival, decayed };
        sched.check_increasing()?;
        Ok(sched)
    }

    /// Arbitrary increasing times `t_1 < ... < t_T` (with `t_0 = 0` implied).
    pub fn from_times(times: &[f64]) -> Result<Self> {
        ensure(!times.is_empty(), "schedule needs at least one time")?;
        ensure(times.iter().all(|t| t.is_finite()), "schedule times must be finite")?;
        let mut all = Vec::with_capacity(times.len() + 1);
        all.push(0.0);
        all.extend_from_slice(times);
        let survival = all.iter().map(|&t| exp(-t)).collect();
        let decayed = all.iter().map(|&t| one_minus_exp_neg(t)).collect();
        let sched = Self { times: all, survival, decayed };
        sched.check_increasing()?;
        Ok(sched)
    }

    fn check_increasing(&self) -> Result<()> {
        ensure(self.times.windows(2).all(|w| w[1] > w[0]), "schedule times must be strictly increasing")
    }

    /// Number of observation times `T`.
    pub fn len(&self) -> usize {
        self.times.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.len()]
    }

    /// `t_k` for `k = 0..=T`.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    /// `e^{-t_k}`.
    #[inline]
    pub fn survival(&self, k: usize) -> f64 {
        self.survival[k]
    }

    /// `1 - e^{-t_k}`.
    #[inline]
    pub fn decayed(&self, k: usize) -> f64 {
        self.decayed[k]
    }

    /// `t_k - t_{k-1}`.
    #[inline]
    pub fn step(&self, k: usize) -> f64 {
        self.times[k] - self.times[k - 1]
    }

    /// `e^{-t_{k-1}} - e^{-t_k}`, taken from whichever of the survival and
    /// decayed columns avoids cancellation.
    #[inline]
    pub fn survival_drop(&self, k: usize) -> f64 {
        if self.survival[k] < 0.5 {
            self.survival[k - 1] - self.survival[k]
        } else {
            self.decayed[k] - self.decayed[k - 1]
        }
    }

    /// Bridge probability `(e^{-t_{k-1}} - e^{-t_k}) / (1 - e^{-t_k})` for
    /// one reverse step from `t_k` to `t_{k-1}`; exactly 1 at `k = 1`.
    #[inline]
    pub fn bridge_prob(&self, k: usize) -> f64 {
        if k == 1 {
            return 1.0;
        }
        (self.survival_drop(k) / self.decayed[k]).min(1.0)
    }

    /// Reverse birth-rate factor `e^{-t_k} / (1 - e^{-t_k})`.
    #[inline]
    pub fn rate_factor(&self, k: usize) -> f64 {
        self.survival[k] / self.decayed[k]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Validate an observation index `1..=T`.
    pub fn check_index(&self, k: usize) -> Result<()> {
        ensure(k >= 1 && k <= self.len(), "observation index must be in 1..=T")
    }
}

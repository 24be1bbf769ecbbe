//! Closed-form laws of the pure-death ("blackout") process `m -> m-1` at rate `m`.
//!
//! Starting from `o`, every unit survives independently with probability
//! `e^{-t}`, so `X_t ~ Binom(o, e^{-t})`. Conditioning on a later state gives
//! the binomial bridge, and the reverse-time process is birth-only with rate
//! `(o - m) e^{-t} / (1 - e^{-t})`.

use alloc::vec::Vec;
use rand::Rng;

use crate::error::{ensure, Result};
use crate::math::{binomial_pmf, exp, ln_one_minus_exp_neg, one_minus_exp_neg};
use crate::sampling::binomial;
use crate::space::StateSpace;

/// Finite-time bridge of the pure-death process: `X_s` given `X_0 = o`, `X_t = n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeParams {
    o: u32,
    n: u32,
    s: f64,
    t: f64,
}

impl BridgeParams {
    /// `t` may be `f64::INFINITY`, in which case `r = e^{-s}`.
    pub fn new(o: u32, n: u32, s: f64, t: f64) -> Result<Self> {
        ensure(n <= o, "bridge terminal state exceeds initial state")?;
        ensure(s >= 0.0 && s.is_finite(), "bridge time s must be finite and nonnegative")?;
        ensure(t >= s, "bridge requires s <= t")?;
        Ok(Self { o, n, s, t })
    }

    pub fn o(&self) -> u32 {
        self.o
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `(ln r, ln(1 - r))` with `r = (e^{-s} - e^{-t}) / (1 - e^{-t})`.
    ///
    /// The limits `s = 0` (`r = 1`), `s = t` (`r = 0`) and `t = inf`
    /// (`r = e^{-s}`) come out exactly.
    pub fn ln_r_pair(&self) -> (f64, f64) {
        if self.s == self.t {
            return (f64::NEG_INFINITY, 0.0);
        }
        if self.s == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        let ln_decayed_t = ln_one_minus_exp_neg(self.t);
        let ln_r = -self.s + ln_one_minus_exp_neg(self.t - self.s) - ln_decayed_t;
        let ln_1mr = ln_one_minus_exp_neg(self.s) - ln_decayed_t;
        (ln_r, ln_1mr)
    }

    /// Probability that a unit dead by `t` was still alive at `s`.
    pub fn r(&self) -> f64 {
        exp(self.ln_r_pair().0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureDeathLaw {
    space: StateSpace,
}

impl PureDeathLaw {
    pub fn new(space: StateSpace) -> Self {
        Self { space }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// `p(m, t | o, 0)` for `m = 0..=o`.
    pub fn forward_pmf(&self, o: u32, t: f64) -> Result<Vec<f64>> {
        self.space.check_label(o)?;
        ensure(t >= 0.0, "time must be nonnegative")?;
        Ok(binomial_pmf(o, -t, ln_one_minus_exp_neg(t)))
    }

    /// Independent `Binom(x0_i, e^{-t})` per component.
    pub fn sample_forward<R: Rng + ?Sized>(&self, x0: &[u32], t: f64, rng: &mut R) -> Result<Vec<u32>> {
        self.space.check_state(x0)?;
        ensure(t >= 0.0, "time must be nonnegative")?;
        let q = exp(-t);
        Ok(x0.iter().map(|&o| binomial(o as u64, q, rng) as u32).collect())
    }

    /// Reverse-time birth rate out of `m` at time `t`, conditioned on `X_0 = o`.
    pub fn reverse_rate(&self, o: u32, m: u32, t: f64) -> Result<f64> {
        self.space.check_label(o)?;
        ensure(m <= o, "reverse rate requires m <= o")?;
        ensure(t > 0.0, "reverse rate is singular at t = 0")?;
        Ok((o - m) as f64 * exp(-t) / one_minus_exp_neg(t))
    }

    /// Pmf of `X_s` over `m = n..=o` (index `m - n`).
    pub fn bridge_pmf(&self, p: &BridgeParams) -> Result<Vec<f64>> {
        self.space.check_label(p.o)?;
        let (ln_r, ln_1mr) = p.ln_r_pair();
        Ok(binomial_pmf(p.o - p.n, ln_r, ln_1mr))
    }

    /// `n + Binom(o - n, r)`.
    pub fn sample_bridge<R: Rng + ?Sized>(&self, p: &BridgeParams, rng: &mut R) -> Result<u32> {
        self.space.check_label(p.o)?;
        Ok(p.n + binomial((p.o - p.n) as u64, p.r(), rng) as u32)
    }

    /// Score `(p(m+1) - p(m)) / p(m)` of the forward law at `m`, in the
    /// closed form `(1/(m+1)) ((o e^{-t} - m)/(1 - e^{-t}) - 1)`.
    ///
    /// This is the general discrete score for the death transition divided
    /// by its preimage rate `m + 1`.
    pub fn score(&self, o: u32, m: u32, t: f64) -> Result<f64> {
        self.space.check_label(o)?;
        ensure(m <= o, "score requires m <= o")?;
        ensure(t > 0.0, "score is singular at t = 0")?;
        let q = exp(-t);
        let bracket = (o as f64 * q - m as f64) / one_minus_exp_neg(t) - 1.0;
        Ok(bracket / (m as f64 + 1.0))
    }
}

//! Scalar helpers that need `libm` in a `no_std` build.

use alloc::vec::Vec;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `1 - e^{-t}`, accurate for tiny `t`.
#[inline]
pub fn one_minus_exp_neg(t: f64) -> f64 {
    -exp_m1(-t)
}

/// `ln(1 - e^{-t})` for `t > 0`.
#[inline]
pub fn ln_one_minus_exp_neg(t: f64) -> f64 {
    if t > core::f64::consts::LN_2 {
        ln_1p(-exp(-t))
    } else {
        ln(-exp_m1(-t))
    }
}

/// Logistic sigmoid, stable for both tails.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + ln_1p(exp(-x))
    } else {
        ln_1p(exp(x))
    }
}

/// `ln(q / (1 - q))` for `q = e^{-t}`, evaluated from `t` so that both
/// `t -> 0` and `t -> inf` keep full precision.
#[inline]
pub fn logit_of_survival(t: f64) -> f64 {
    -t - ln_one_minus_exp_neg(t)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|v| exp(v - max)).sum();
    max + ln(sum)
}

/// Table of `ln k!` for `k = 0..=n`.
#[derive(Debug, Clone)]
pub struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    pub fn new(n: u32) -> Self {
        let table = (0..=n).map(|k| ln_gamma(k as f64 + 1.0)).collect();
        Self { table }
    }

    #[inline]
    pub fn get(&self, k: u32) -> f64 {
        match self.table.get(k as usize) {
            Some(v) => *v,
            None => ln_gamma(k as f64 + 1.0),
        }
    }

    #[inline]
    pub fn ln_choose(&self, n: u32, k: u32) -> f64 {
        debug_assert!(k <= n);
        self.get(n) - self.get(k) - self.get(n - k)
    }
}

#[inline]
pub fn ln_choose(n: u32, k: u32) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Log-pmf of `Binom(n, p)` at `k`, given `ln p` and `ln(1-p)`.
///
/// Either log may be `-inf`; the corresponding power is then treated as
/// `0^0 = 1` when its exponent vanishes.
#[inline]
pub fn binomial_ln_pmf(ln_choose_nk: f64, n: u32, k: u32, ln_p: f64, ln_q: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let a = if k == 0 { 0.0 } else { k as f64 * ln_p };
    let b = if n == k { 0.0 } else { (n - k) as f64 * ln_q };
    ln_choose_nk + a + b
}

/// Full pmf of `Binom(n, p)` over `0..=n` from `ln p` and `ln(1-p)`.
pub fn binomial_pmf(n: u32, ln_p: f64, ln_q: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| exp(binomial_ln_pmf(ln_choose(n, k), n, k, ln_p, ln_q)))
        .collect()
}

/// Pairwise (cascade) summation; deterministic for a fixed input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

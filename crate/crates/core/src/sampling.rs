//! Binomial and Poisson variates.
//!
//! Binomial draws come from `rand_distr` (inversion for small `n p`, BTPE
//! rejection otherwise). Poisson draws with small means use sequential
//! inversion, which is much cheaper per call than building a distribution
//! object; large means defer to `rand_distr`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::math::exp;

/// `Binom(n, p)`; `p` outside `(0, 1)` is treated as the nearest endpoint.
pub fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || !(p > 0.0) {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    match Binomial::new(n, p) {
        Ok(d) => d.sample(rng),
        Err(_) => 0,
    }
}

const SMALL_MEAN: f64 = 12.0;

/// `Poisson(mean)`; nonpositive or NaN means give 0, the result saturates at `u64::MAX`.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean < SMALL_MEAN {
        return poisson_inversion(mean, exp(-mean), rng);
    }
    match Poisson::new(mean) {
        Ok(d) => {
            let v: f64 = d.sample(rng);
            if v >= u64::MAX as f64 {
                u64::MAX
            } else {
                v as u64
            }
        }
        Err(_) => u64::MAX,
    }
}

/// Sequential-search inversion given the precomputed `e^{-mean}`.
#[inline]
pub fn poisson_inversion<R: Rng + ?Sized>(mean: f64, exp_neg_mean: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = exp_neg_mean;
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 {
            break;
        }
    }
    k
}

/// Draw an index from nonnegative weights (need not be normalized).
pub fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

//! Brute-force references built on a dense matrix exponential.
//!
//! The exponential shifts the generator to a nonnegative matrix, scales it
//! down, sums a Taylor series and squares back up. No subtraction occurs, so
//! tiny entries keep their relative accuracy.

use alloc::vec::Vec;

use crate::ctmc::Generator;
use crate::error::{ensure, Error, Result};
use crate::math::exp;
use crate::matrix::SquareMatrix;

const TAYLOR_TERMS: usize = 40;

/// `exp(a)` for a matrix with nonnegative off-diagonal entries.
pub fn expm_metzler(a: &SquareMatrix) -> Result<SquareMatrix> {
    let n = a.size();
    for i in 0..n {
        for j in 0..n {
            ensure(a[(i, j)].is_finite(), "matrix entries must be finite")?;
            ensure(i == j || a[(i, j)] >= 0.0, "off-diagonal entries must be nonnegative")?;
        }
    }
    let shift = (0..n).map(|i| -a[(i, i)]).fold(0.0, f64::max);
    let mut b = a.clone();
    for i in 0..n {
        b[(i, i)] += shift;
    }
    let norm = (0..n).map(|j| b.column(j).iter().sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let b = b.scale(scale);
    let mut term = SquareMatrix::identity(n);
    let mut sum = SquareMatrix::identity(n);
    for k in 1..=TAYLOR_TERMS {
        term = term.mul(&b).scale(1.0 / k as f64);
        for i in 0..n {
            for j in 0..n {
                sum[(i, j)] += term[(i, j)];
            }
        }
    }
    let mut out = sum.scale(exp(-shift * scale));
    for _ in 0..squarings {
        out = out.mul(&out);
    }
    Ok(out)
}

/// `P(t) = exp(L† t)` with `P[m][o] = p(m, t | o, 0)`.
pub fn transition_matrix(generator: &Generator, t: f64) -> Result<SquareMatrix> {
    ensure(t >= 0.0 && t.is_finite(), "time must be finite and nonnegative")?;
    expm_metzler(&generator.matrix().scale(t))
}

/// `p(m, s | o, 0, n, t) = P_s[m][o] P_{t-s}[n][m] / P_t[n][o]` over `m = 0..=M`.
pub fn bayes_bridge(generator: &Generator, o: u32, n: u32, s: f64, t: f64) -> Result<Vec<f64>> {
    ensure(0.0 <= s && s <= t, "bridge needs 0 <= s <= t")?;
    let size = generator.size();
    ensure((o as usize) < size && (n as usize) < size, "state exceeds M")?;
    let p_s = transition_matrix(generator, s)?;
    let p_rest = transition_matrix(generator, t - s)?;
    let p_t = transition_matrix(generator, t)?;
    let denom = p_t[(n as usize, o as usize)];
    if denom <= 0.0 {
        return Err(Error::Unreachable(n));
    }
    Ok((0..size).map(|m| p_s[(m, o as usize)] * p_rest[(n as usize, m)] / denom).collect())
}

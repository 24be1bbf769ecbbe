//! Distances between sample sets and laws, moment checks, and
//! reverse-consistency reports.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{ensure, ensure_len, Result};
use crate::math::sqrt;
use crate::predictor::DiscreteDataset;
use crate::reverse::{ForwardProcess, ReversePlan};
use crate::space::StateSpace;

/// Largest joint histogram enumerated by [`TvMode::Auto`].
pub const JOINT_CELL_LIMIT: f64 = (1u64 << 20) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TvMode {
    Joint,
    /// Largest per-dimension marginal TV.
    Marginal,
    /// Joint when `(M+1)^N` is at most [`JOINT_CELL_LIMIT`], marginal otherwise.
    #[default]
    Auto,
}

impl TvMode {
    pub fn resolve(self, space: &StateSpace) -> TvMode {
        match self {
            TvMode::Auto => {
                let cells = libm::pow(space.labels() as f64, space.dims() as f64);
                if cells <= JOINT_CELL_LIMIT {
                    TvMode::Joint
                } else {
                    TvMode::Marginal
                }
            }
            m => m,
        }
    }
}

/// Empirical pmf keyed by state.
pub fn empirical(samples: &[Vec<u32>]) -> BTreeMap<Vec<u32>, f64> {
    let mut counts: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for x in samples {
        *counts.entry(x.clone()).or_insert(0.0) += 1.0;
    }
    let n = samples.len() as f64;
    counts.values_mut().for_each(|v| *v /= n);
    counts
}

/// Half L1 distance between two pmfs keyed by state.
pub fn tv_maps(a: &BTreeMap<Vec<u32>, f64>, b: &BTreeMap<Vec<u32>, f64>) -> f64 {
    let mut total = 0.0;
    for (x, &pa) in a {
        total += (pa - b.get(x).copied().unwrap_or(0.0)).abs();
    }
    for (x, &pb) in b {
        if !a.contains_key(x) {
            total += pb;
        }
    }
    (0.5 * total).min(1.0)
}

/// Half L1 distance between two dense pmfs of equal length.
pub fn tv_pmf(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_len(a.len(), b.len())?;
    Ok((0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()).min(1.0))
}

/// TV between the normalized histogram `counts` and `pmf`.
pub fn tv_counts(counts: &[u64], pmf: &[f64]) -> Result<f64> {
    let n: u64 = counts.iter().sum();
    ensure(n > 0, "histogram is empty")?;
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    tv_pmf(&p, pmf)
}

fn check_samples(samples: &[Vec<u32>], space: &StateSpace) -> Result<()> {
    ensure(!samples.is_empty(), "sample set is empty")?;
    samples.iter().try_for_each(|x| space.check_state(x))
}

fn marginals(samples: &[Vec<u32>], space: &StateSpace) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; space.labels()]; space.dims()];
    for x in samples {
        for (d, &v) in x.iter().enumerate() {
            m[d][v as usize] += 1.0;
        }
    }
    let n = samples.len() as f64;
    m.iter_mut().flatten().for_each(|v| *v /= n);
    m
}

/// Per-dimension marginal TVs.
pub fn marginal_tvs(a: &[Vec<u32>], b: &[Vec<u32>], space: &StateSpace) -> Result<Vec<f64>> {
    check_samples(a, space)?;
    check_samples(b, space)?;
    let ma = marginals(a, space);
    let mb = marginals(b, space);
    ma.iter().zip(&mb).map(|(x, y)| tv_pmf(x, y)).collect()
}

/// TV between two sample sets.
pub fn tv_distance(a: &[Vec<u32>], b: &[Vec<u32>], space: &StateSpace, mode: TvMode) -> Result<f64> {
    check_samples(a, space)?;
    check_samples(b, space)?;
    match mode.resolve(space) {
        TvMode::Joint => Ok(tv_maps(&empirical(a), &empirical(b))),
        _ => Ok(marginal_tvs(a, b, space)?.into_iter().fold(0.0, f64::max)),
    }
}

/// Joint TV between a sample set and the item distribution of a dataset.
pub fn tv_to_dataset(samples: &[Vec<u32>], ds: &DiscreteDataset) -> Result<f64> {
    check_samples(samples, ds.space())?;
    let mut law: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (x, &w) in ds.items().iter().zip(ds.weights()) {
        *law.entry(x.clone()).or_insert(0.0) += w;
    }
    Ok(tv_maps(&empirical(samples), &law))
}

fn correlations(samples: &[Vec<u32>], dims: usize) -> Vec<f64> {
    let n = samples.len() as f64;
    let mut mean = vec![0.0; dims];
    for x in samples {
        for (m, &v) in mean.iter_mut().zip(x) {
            *m += v as f64 / n;
        }
    }
    let mut cov = vec![0.0; dims * dims];
    for x in samples {
        for i in 0..dims {
            let di = x[i] as f64 - mean[i];
            for j in 0..dims {
                cov[i * dims + j] += di * (x[j] as f64 - mean[j]) / n;
            }
        }
    }
    let mut out = Vec::new();
    for i in 0..dims {
        for j in i + 1..dims {
            let denom = sqrt(cov[i * dims + i] * cov[j * dims + j]);
            out.push(if denom > 0.0 { cov[i * dims + j] / denom } else { 0.0 });
        }
    }
    out
}

/// Largest absolute difference of pairwise Pearson correlations (zero for
/// constant components).
pub fn correlation_gap(a: &[Vec<u32>], b: &[Vec<u32>], space: &StateSpace) -> Result<f64> {
    check_samples(a, space)?;
    check_samples(b, space)?;
    let ca = correlations(a, space.dims());
    let cb = correlations(b, space.dims());
    Ok(ca.iter().zip(&cb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Empirical minus exact moments of `Binom(o, e^{-t})`, with one-sigma
/// Monte Carlo scales for both errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub mean_error: f64,
    pub variance_error: f64,
    pub mean_sigma: f64,
    pub variance_sigma: f64,
}

impl MomentReport {
    pub fn within(&self, sigmas: f64) -> bool {
        self.mean_error.abs() <= sigmas * self.mean_sigma && self.variance_error.abs() <= sigmas * self.variance_sigma
    }
}

pub fn moment_report(samples: &[u32], o: u32, t: f64) -> Result<MomentReport> {
    ensure(!samples.is_empty(), "sample set is empty")?;
    ensure(t >= 0.0, "time must be nonnegative")?;
    let n = samples.len() as f64;
    let q = libm::exp(-t);
    let mean = o as f64 * q;
    let var = mean * (1.0 - q);
    let emp_mean = samples.iter().map(|&v| v as f64).sum::<f64>() / n;
    let emp_var = samples.iter().map(|&v| (v as f64 - emp_mean) * (v as f64 - emp_mean)).sum::<f64>() / n;
    // Central fourth moment of the binomial.
    let mu4 = var * (1.0 + (3.0 * o as f64 - 6.0) * q * (1.0 - q));
    Ok(MomentReport {
        mean_error: emp_mean - mean,
        variance_error: emp_var - var,
        mean_sigma: sqrt(var / n),
        variance_sigma: sqrt(((mu4 - var * var) / n).max(0.0)),
    })
}

/// TV between reverse-simulated `X_s` (from exact `X_t` draws given
/// `X_0 = o`) and the forward law at `s`; zero when `s = t`.
pub fn reverse_consistency_report<R: Rng + ?Sized>(
    process: ForwardProcess<'_>,
    o: u32,
    s: f64,
    t: f64,
    paths: usize,
    rng: &mut R,
) -> Result<f64> {
    ensure(s <= t, "reverse consistency needs s <= t")?;
    ensure(paths >= 10_000, "reverse consistency needs at least 10^4 paths")?;
    if s == t {
        return Ok(0.0);
    }
    let plan = ReversePlan::new(process, o, s, t)?;
    let counts = plan.histogram(process, paths, rng)?;
    tv_counts(&counts, &process.forward_law(o, s)?)
}

//! Reverse-time simulation conditioned on the initial state.
//!
//! Runs the time-inhomogeneous reverse chain from `t` down to `s` with
//! fine-grid τ-leaping. Each substep uses the rates at its midpoint and is
//! sized so that the largest total reverse rate times the step stays below
//! [`MAX_RATE_STEP`]. The forward law is evaluated once per substep, so the
//! plan is shared by every path.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::ctmc::{Distribution, Generator, UNREACHABLE_BELOW};
use crate::error::{ensure, Result};
use crate::math::exp;
use crate::pure_death::PureDeathLaw;
use crate::sampling::{categorical, poisson_inversion};

pub const MAX_RATE_STEP: f64 = 0.05;

/// A forward process with a computable conditional law `p(·, τ | o, 0)`.
#[derive(Debug, Clone, Copy)]
pub enum ForwardProcess<'a> {
    PureDeath(&'a PureDeathLaw),
    General(&'a Generator),
}

impl ForwardProcess<'_> {
    pub fn max_label(&self) -> u32 {
        match self {
            ForwardProcess::PureDeath(law) => law.space().max_label(),
            ForwardProcess::General(g) => g.max_label(),
        }
    }

    /// `p(m, τ | o, 0)` over the full label set `0..=M`.
    pub fn forward_law(&self, o: u32, tau: f64) -> Result<Vec<f64>> {
        let size = self.max_label() as usize + 1;
        match self {
            ForwardProcess::PureDeath(law) => {
                let mut p = law.forward_pmf(o, tau)?;
                p.resize(size, 0.0);
                Ok(p)
            }
            ForwardProcess::General(g) => {
                Ok(g.forward_solve(&Distribution::point(size, o)?, tau)?.probs().to_vec())
            }
        }
    }

    /// Reverse jumps `(target, rate)` out of every state at time `τ`;
    /// unreachable states get an empty list.
    pub fn reverse_table(&self, o: u32, tau: f64) -> Result<Vec<Vec<(u32, f64)>>> {
        let size = self.max_label() as usize + 1;
        match self {
            ForwardProcess::PureDeath(law) => (0..size as u32)
                .map(|m| {
                    if m < o {
                        Ok(vec![(m + 1, law.reverse_rate(o, m, tau)?)])
                    } else {
                        Ok(Vec::new())
                    }
                })
                .collect(),
            ForwardProcess::General(g) => {
                let p = Distribution::new_unchecked(self.forward_law(o, tau)?);
                (0..size as u32)
                    .map(|m| {
                        if p.probs()[m as usize] < UNREACHABLE_BELOW {
                            Ok(Vec::new())
                        } else {
                            g.reverse_rates(&p, m)
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Jump {
    target: u32,
    mean: f64,
    exp_neg_mean: f64,
}

#[derive(Debug, Clone)]
struct Substep {
    jumps: Vec<Vec<Jump>>,
    /// Support of the forward law at the end of the substep.
    lo: u32,
    hi: u32,
}

/// Precomputed substep grid for reverse paths from `t` to `s`.
#[derive(Debug, Clone)]
pub struct ReversePlan {
    o: u32,
    s: f64,
    t: f64,
    steps: Vec<Substep>,
}

fn max_total_rate(table: &[Vec<(u32, f64)>]) -> f64 {
    table.iter().map(|row| row.iter().map(|r| r.1).sum::<f64>()).fold(0.0, f64::max)
}

fn support(p: &[f64]) -> (u32, u32) {
    let lo = p.iter().position(|&v| v >= UNREACHABLE_BELOW).unwrap_or(0);
    let hi = p.iter().rposition(|&v| v >= UNREACHABLE_BELOW).unwrap_or(p.len() - 1);
    (lo as u32, hi as u32)
}

impl ReversePlan {
    pub fn new(process: ForwardProcess<'_>, o: u32, s: f64, t: f64) -> Result<Self> {
        ensure(o <= process.max_label(), "initial state exceeds M")?;
        ensure(s > 0.0, "reverse simulation needs s > 0 (rates diverge at 0)")?;
        ensure(t >= s && t.is_finite(), "reverse simulation needs s <= t < inf")?;
        let mut steps = Vec::new();
        let mut tau = t;
        while tau > s {
            let remaining = tau - s;
            let start = max_total_rate(&process.reverse_table(o, tau)?);
            let mut dt = if start > 0.0 { (MAX_RATE_STEP / start).min(remaining) } else { remaining };
            let mut table = process.reverse_table(o, tau - 0.5 * dt)?;
            // Rates grow toward s; shrink until the midpoint rates also obey the bound.
            for _ in 0..8 {
                let mid = max_total_rate(&table);
                if mid * dt <= MAX_RATE_STEP {
                    break;
                }
                dt = MAX_RATE_STEP / mid;
                table = process.reverse_table(o, tau - 0.5 * dt)?;
            }
            let end = if dt >= remaining { s } else { tau - dt };
            let (lo, hi) = support(&process.forward_law(o, end)?);
            let jumps = table
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|(target, rate)| {
                            let mean = rate * dt;
                            Jump { target, mean, exp_neg_mean: exp(-mean) }
                        })
                        .collect()
                })
                .collect();
            steps.push(Substep { jumps, lo, hi });
            tau = end;
        }
        Ok(Self { o, s, t, steps })
    }

    pub fn substeps(&self) -> usize {
        self.steps.len()
    }

    pub fn o(&self) -> u32 {
        self.o
    }

    pub fn span(&self) -> (f64, f64) {
        (self.s, self.t)
    }

    /// Run one reverse path from `X_t = x_t`; returns `X_s`.
    pub fn run<R: Rng + ?Sized>(&self, x_t: u32, rng: &mut R) -> u32 {
        let mut m = x_t;
        for step in &self.steps {
            let mut next = m as i64;
            for jump in &step.jumps[m as usize] {
                let k = poisson_inversion(jump.mean, jump.exp_neg_mean, rng) as i64;
                next += k * (jump.target as i64 - m as i64);
            }
            m = next.clamp(step.lo as i64, step.hi as i64) as u32;
        }
        m
    }

    /// Histogram over `0..=M` of `X_s` from `paths` reverse paths, each
    /// started from an exact draw of `X_t` given `X_0 = o`.
    pub fn histogram<R: Rng + ?Sized>(&self, process: ForwardProcess<'_>, paths: usize, rng: &mut R) -> Result<Vec<u64>> {
        let p_t = process.forward_law(self.o, self.t)?;
        let mut counts = vec![0u64; p_t.len()];
        for _ in 0..paths {
            let x_t = categorical(&p_t, rng) as u32;
            counts[self.run(x_t, rng) as usize] += 1;
        }
        Ok(counts)
    }
}

//! Numerical validation suites run by `blackout validate`.

use std::f64::consts::LN_2;

use blackout_core::ctmc::{Distribution, Generator, Shift};
use blackout_core::eval::reverse_consistency_report;
use blackout_core::loss::{per_element_grad, per_element_loss, weight, LossKind};
use blackout_core::math::logit_of_survival;
use blackout_core::oracle::transition_matrix;
use blackout_core::predictor::{MlpParams, MlpPredictor};
use blackout_core::pure_death::{BridgeParams, PureDeathLaw};
use blackout_core::reverse::ForwardProcess;
use blackout_core::rng::substream;
use blackout_core::schedule::Schedule;
use blackout_core::StateSpace;

pub const BRIDGE_TOL: f64 = 1e-10;
pub const FORWARD_TOL: f64 = 1e-9;
pub const REVERSE_TV_TOL: f64 = 0.02;
pub const SCHEDULE_TOL: f64 = 1e-12;
pub const ARGMIN_TOL: f64 = 1e-6;
pub const RATIO_TOL: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-5;
pub const SCORE_TOL: f64 = 1e-12;
pub const GAUSSIAN_TOL: f64 = 0.05;

/// `(s, t)` pairs for the bridge comparison.
pub const BRIDGE_TIMES: [(f64, f64); 8] =
    [(0.01, 0.05), (0.1, 0.3), (0.3, 1.5), (0.5, 1.0), (LN_2, 2.0), (1.0, 5.0), (2.0, 15.0), (0.05, 15.0)];

pub const FORWARD_TIMES: [f64; 5] = [0.01, LN_2, 1.0, 5.0, 15.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Bridge,
    Reverse,
    Schedule,
    Loss,
    Score,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Bridge => "bridge",
            Suite::Reverse => "reverse",
            Suite::Schedule => "schedule",
            Suite::Loss => "loss",
            Suite::Score => "score",
            Suite::All => "all",
        }
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Suite::Reverse | Suite::Loss | Suite::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// Pass iff `value < tolerance`.
    Below,
    /// Pass iff `value > tolerance`.
    Above,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
}

impl Check {
    fn below(suite: &'static str, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { suite, name: name.into(), value, tolerance, bound: Bound::Below }
    }

    fn above(suite: &'static str, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { suite, name: name.into(), value, tolerance, bound: Bound::Above }
    }

    pub fn pass(&self) -> bool {
        match self.bound {
            Bound::Below => self.value < self.tolerance,
            Bound::Above => self.value > self.tolerance,
        }
    }

    pub const CSV_HEADER: [&'static str; 6] = ["suite", "check", "value", "bound", "tolerance", "pass"];

    pub fn csv_row(&self) -> Vec<String> {
        let bound = match self.bound {
            Bound::Below => "<",
            Bound::Above => ">",
        };
        vec![
            self.suite.to_string(),
            self.name.clone(),
            format!("{:e}", self.value),
            bound.to_string(),
            format!("{:e}", self.tolerance),
            self.pass().to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub max_label: u32,
    pub seed: u64,
    pub paths: usize,
}

pub fn run(suite: Suite, opts: &Options) -> anyhow::Result<Vec<Check>> {
    anyhow::ensure!(opts.max_label >= 1, "M must be at least 1");
    Ok(match suite {
        Suite::Bridge => bridge(opts.max_label)?,
        Suite::Reverse => reverse(opts)?,
        Suite::Schedule => schedule()?,
        Suite::Loss => loss(opts.seed)?,
        Suite::Score => score(opts.max_label)?,
        Suite::All => {
            let mut all = bridge(opts.max_label)?;
            all.extend(reverse(opts)?);
            all.extend(schedule()?);
            all.extend(loss(opts.seed)?);
            all.extend(score(opts.max_label)?);
            all
        }
    })
}

/// Closed-form bridge against Bayes over matrix exponentials, and the
/// closed-form forward law against uniformization.
pub fn bridge(max_label: u32) -> anyhow::Result<Vec<Check>> {
    let law = PureDeathLaw::new(StateSpace::new(max_label, 1)?);
    let g = Generator::pure_death(max_label);
    let mut worst = 0.0f64;
    for &(s, t) in &BRIDGE_TIMES {
        let p_s = transition_matrix(&g, s)?;
        let p_rest = transition_matrix(&g, t - s)?;
        let p_t = transition_matrix(&g, t)?;
        for o in 0..=max_label {
            for n in 0..=o {
                let closed = law.bridge_pmf(&BridgeParams::new(o, n, s, t)?)?;
                let denom = p_t[(n as usize, o as usize)];
                for m in 0..=max_label {
                    let bayes = p_s[(m as usize, o as usize)] * p_rest[(n as usize, m as usize)] / denom;
                    let c = if (n..=o).contains(&m) { closed[(m - n) as usize] } else { 0.0 };
                    worst = worst.max((c - bayes).abs());
                }
            }
        }
    }
    let mut forward = 0.0f64;
    for &t in &FORWARD_TIMES {
        for o in 0..=max_label {
            let closed = law.forward_pmf(o, t)?;
            let numeric = g.forward_solve(&Distribution::point(g.size(), o)?, t)?;
            for (m, &p) in numeric.probs().iter().enumerate() {
                let c = closed.get(m).copied().unwrap_or(0.0);
                forward = forward.max((c - p).abs());
            }
        }
    }
    Ok(vec![
        Check::below("bridge", "bridge_vs_bayes_max_abs", worst, BRIDGE_TOL),
        Check::below("bridge", "forward_vs_uniformization_max_abs", forward, FORWARD_TOL),
    ])
}

/// Reverse-simulated marginals against the forward law.
pub fn reverse(opts: &Options) -> anyhow::Result<Vec<Check>> {
    let m = opts.max_label;
    let law = PureDeathLaw::new(StateSpace::new(m, 1)?);
    let g = Generator::birth_death(m, 0.8, 1.0)?;
    let mut rng = substream([opts.seed, 0, 0, 1]);
    let pd = reverse_consistency_report(ForwardProcess::PureDeath(&law), m, 0.3, 1.5, opts.paths, &mut rng)?;
    let mut rng = substream([opts.seed, 0, 0, 2]);
    let bd = reverse_consistency_report(ForwardProcess::General(&g), m / 2, 0.3, 1.5, opts.paths, &mut rng)?;
    Ok(vec![
        Check::below("reverse", "pure_death_tv", pd, REVERSE_TV_TOL),
        Check::below("reverse", "birth_death_tv", bd, REVERSE_TV_TOL),
    ])
}

pub fn schedule() -> anyhow::Result<Vec<Check>> {
    let (steps, horizon) = (1000, 15.0);
    let s = Schedule::fisher(steps, horizon)?;
    let logits: Vec<f64> = (1..=steps).map(|k| logit_of_survival(s.time(k))).collect();
    let d0 = logits[1] - logits[0];
    let uniform = logits.windows(2).map(|w| (w[1] - w[0] - d0).abs()).fold(0.0, f64::max);
    let reflection = (1..=steps)
        .map(|k| (s.survival(k) + s.survival(steps + 1 - k) - 1.0).abs())
        .fold(0.0, f64::max);
    let blackout = s.decayed(steps).powi(255);
    Ok(vec![
        Check::below("schedule", "logit_spacing_max_dev", uniform, SCHEDULE_TOL),
        Check::below("schedule", "reflection_max_dev", reflection, SCHEDULE_TOL),
        Check::below("schedule", "t1_abs_dev_from_3.059e-7", (s.time(1) - 3.059e-7).abs(), 5e-11),
        Check::above("schedule", "p_zero_at_15_from_255", blackout, 0.9999),
    ])
}

/// Root of the per-element gradient in `y` by bisection.
fn gradient_root(kind: LossKind, target: f64, k: usize, sched: &Schedule) -> anyhow::Result<f64> {
    let (mut lo, mut hi) = (1e-3, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if per_element_grad(kind, mid, target, k, sched)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn loss(seed: u64) -> anyhow::Result<Vec<Check>> {
    let sched = Schedule::fisher(100, 15.0)?;
    let kinds = [LossKind::Instantaneous, LossKind::FiniteTime, LossKind::GeneralInstantaneous];
    let mut argmin = 0.0f64;
    let mut not_min = 0.0f64;
    for kind in kinds {
        for c in 1..=32 {
            let c = c as f64;
            argmin = argmin.max((gradient_root(kind, c, 50, &sched)? - c).abs());
            let at = per_element_loss(kind, c, c, 50, &sched)?;
            for y in [c - 1e-3, c + 1e-3, 0.5 * c, 2.0 * c] {
                not_min = not_min.max(at - per_element_loss(kind, y, c, 50, &sched)?);
            }
        }
    }
    let delta = 1e-4;
    let tiny = Schedule::from_times(&[1.0, 1.0 + delta])?;
    let ratio = weight(LossKind::FiniteTime, &tiny, 2) / weight(LossKind::Instantaneous, &tiny, 2);

    let space = StateSpace::new(8, 2)?;
    let mut rng = substream([seed, 0, 0, 3]);
    let net = MlpPredictor::new(MlpParams::random(&[4, 6, 5, 2], &mut rng)?, space)?;
    let mut fd = 0.0f64;
    for (k, target, kind) in [(7, [3.0, 0.0], LossKind::Instantaneous), (40, [6.0, 2.0], LossKind::FiniteTime), (93, [8.0, 5.0], LossKind::FiniteTime)] {
        fd = fd.max(fd_relative_error(&net, &[2, 3], k, &target, kind, &sched)?);
    }
    Ok(vec![
        Check::below("loss", "argmin_max_abs_dev", argmin, ARGMIN_TOL),
        Check::below("loss", "target_not_minimal_by", not_min, 1e-12),
        Check::below("loss", "finite_over_instantaneous_minus_1_at_1e-4", (ratio - 1.0).abs(), RATIO_TOL),
        Check::below("loss", "mlp_backprop_vs_fd_rel", fd, FD_TOL),
    ])
}

/// Largest central-difference mismatch of the MLP gradient, relative to the
/// gradient's max norm.
pub fn fd_relative_error(
    net: &MlpPredictor,
    xt: &[u32],
    k: usize,
    target: &[f64],
    kind: LossKind,
    sched: &Schedule,
) -> anyhow::Result<f64> {
    let (_, grad) = net.backprop(xt, k, target, kind, sched)?;
    let g = grad.to_flat();
    let base = net.params().to_flat();
    let sizes = net.params().sizes();
    let h = 1e-4;
    let loss_at = |flat: &[f64]| -> anyhow::Result<f64> {
        let p = MlpPredictor::new(MlpParams::from_flat(&sizes, flat)?, *net.space())?;
        Ok(p.backprop(xt, k, target, kind, sched)?.0)
    };
    let scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += h;
        let mut minus = base.clone();
        minus[i] -= h;
        let fd = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / scale);
    }
    Ok(worst)
}

/// States `m` with `2.5 <= |m - o e^{-t}| <= 5` where the Gaussian-limit
/// comparison is made.
pub fn gaussian_window(o: u32, t: f64) -> Vec<u32> {
    let mean = o as f64 * (-t).exp();
    (0..o).filter(|&m| (2.5..=5.0).contains(&(m as f64 - mean).abs())).collect()
}

pub fn score(max_label: u32) -> anyhow::Result<Vec<Check>> {
    let law = PureDeathLaw::new(StateSpace::new(max_label, 1)?);
    let g = Generator::pure_death(max_label);
    let mut worst = 0.0f64;
    for t in [0.05, 0.3, 1.0, 2.0, 5.0] {
        for o in 1..=max_label {
            let mut p = law.forward_pmf(o, t)?;
            p.resize(g.size(), 0.0);
            let p = Distribution::new_unchecked(p);
            for m in 0..o {
                let nu = g.rate(m + 1, m);
                let general = g.discrete_score(&p, m, Shift::DEATH)? / nu;
                let closed = law.score(o, m, t)?;
                worst = worst.max((general - closed).abs() / closed.abs().max(1.0));
            }
        }
    }
    let (o, t) = (256u32, 1.0f64);
    let big = PureDeathLaw::new(StateSpace::new(o, 1)?);
    let mean = o as f64 * (-t).exp();
    let var = mean * (1.0 - (-t).exp());
    let mut gauss = 0.0f64;
    for m in gaussian_window(o, t) {
        // log ρ(m+1) - log ρ(m) for the matching normal density.
        let fd = -(2.0 * (m as f64 - mean) + 1.0) / (2.0 * var);
        gauss = gauss.max((big.score(o, m, t)? / fd - 1.0).abs());
    }
    Ok(vec![
        Check::below("score", "closed_vs_general_rel", worst, SCORE_TOL),
        Check::below("score", "gaussian_limit_rel_dev", gauss, GAUSSIAN_TOL),
    ])
}

//! Training and generation loops.
//!
//! Generation draws every random number for sample `i`, component `d` and
//! reverse step `k` from the substream `(seed, i, d, k)`. The initial state
//! of τ-leaping uses step `0`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::ctmc::{Generator, Shift};
use crate::error::{ensure, ensure_len, Error, Result};
use crate::loss::{general_loss, general_weight, LossKind};
use crate::math::floor;
use crate::matrix::SquareMatrix;
use crate::predictor::{DiscreteDataset, MlpParams, MlpPredictor, Predictor, Sgd};
use crate::rng::{sample_stream, substream, StreamRng};
use crate::sampling::{binomial, categorical, poisson};
use crate::schedule::Schedule;
use crate::space::StateSpace;

/// First key word of the training stream; sample indices never reach it.
pub const TRAIN_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub batch: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Number of observation times `T`.
    pub steps: usize,
    /// Final observation time `t_T`.
    pub horizon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Instantaneous,
            batch: 16,
            iterations: 1000,
            learning_rate: 0.1,
            momentum: 0.9,
            seed: 0,
            steps: 1000,
            horizon: 15.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.batch >= 1, "batch size must be at least 1")?;
        ensure(self.steps >= 2, "at least two observation times are required")?;
        Sgd::new(self.learning_rate, self.momentum).map(|_| ())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::fisher(self.steps, self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampler {
    #[default]
    BinomialBridge,
    Poisson,
    TauLeapingGeneral,
}

/// How a real-valued prediction becomes a bridge count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounding {
    #[default]
    Nearest,
    /// `floor(y) + Bernoulli(frac(y))`, unbiased for `y`.
    Stochastic,
}

/// Poisson mean used per reverse step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoissonStep {
    /// Rate integrated over the step: `λ (t_k - t_{k-1})`.
    #[default]
    Integrated,
    /// The rate alone, with no step factor.
    Verbatim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub sampler: Sampler,
    pub count: usize,
    pub seed: u64,
    pub rounding: Rounding,
    pub poisson_step: PoissonStep,
}

impl GenConfig {
    pub fn new(sampler: Sampler, count: usize, seed: u64) -> Self {
        Self { sampler, count, seed, rounding: Rounding::Nearest, poisson_step: PoissonStep::Integrated }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.count >= 1, "sample count must be at least 1")
    }

    fn poisson_mean(&self, rate: f64, sched: &Schedule, k: usize) -> f64 {
        match self.poisson_step {
            PoissonStep::Integrated => rate * sched.step(k),
            PoissonStep::Verbatim => rate,
        }
    }
}

/// Train a network on `ds` with per-element losses; returns the per-iteration
/// batch loss.
pub fn train(ds: &DiscreteDataset, predictor: &mut MlpPredictor, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    ensure(predictor.space() == ds.space(), "predictor and dataset spaces differ")?;
    let sched = cfg.schedule()?;
    let mut opt = Sgd::new(cfg.learning_rate, cfg.momentum)?;
    let mut rng = substream([TRAIN_STREAM, cfg.seed, 0, 0]);
    let mut trace = Vec::with_capacity(cfg.iterations);
    let inv_batch = 1.0 / cfg.batch as f64;
    for _ in 0..cfg.iterations {
        let mut grad = MlpParams::zeros(&predictor.params().sizes())?;
        let mut loss = 0.0;
        for _ in 0..cfg.batch {
            let x0 = ds.sample(&mut rng);
            let k = rng.random_range(1..=sched.len());
            let q = sched.survival(k);
            let xt: Vec<u32> = x0.iter().map(|&o| binomial(o as u64, q, &mut rng) as u32).collect();
            let target: Vec<f64> = x0.iter().zip(&xt).map(|(&o, &m)| (o - m) as f64).collect();
            let (l, g) = predictor.backprop(&xt, k, &target, cfg.loss, &sched)?;
            loss += l * inv_batch;
            grad.add_scaled(&g, inv_batch);
        }
        opt.step(predictor.params_mut(), &grad);
        trace.push(loss);
    }
    Ok(trace)
}

fn round_count(y: f64, rounding: Rounding, rng: &mut StreamRng) -> u32 {
    match rounding {
        Rounding::Nearest => floor(y + 0.5) as u32,
        Rounding::Stochastic => {
            let whole = floor(y);
            whole as u32 + u32::from(rng.random::<f64>() < y - whole)
        }
    }
}

fn check_prediction(y: &[f64], dims: usize) -> Result<()> {
    ensure_len(dims, y.len())?;
    ensure(y.iter().all(|v| !v.is_nan()), "predictor returned NaN")
}

/// One sample of the Blackout generator, optionally recording the state
/// after every reverse step (from `t_T` down to `t_0`).
fn blackout_sample<P: Predictor + ?Sized>(
    predictor: &P,
    space: &StateSpace,
    sched: &Schedule,
    cfg: &GenConfig,
    index: u64,
    mut path: Option<&mut Vec<Vec<u32>>>,
) -> Result<Vec<u32>> {
    let max = space.max_label();
    let mut x = vec![0u32; space.dims()];
    if let Some(p) = path.as_deref_mut() {
        p.push(x.clone());
    }
    for k in (1..=sched.len()).rev() {
        let y = predictor.predict(&x, k, sched)?;
        check_prediction(&y, x.len())?;
        for (d, (xi, &yi)) in x.iter_mut().zip(&y).enumerate() {
            let room = (max - *xi) as f64;
            let yi = yi.clamp(0.0, room);
            let mut rng = sample_stream(cfg.seed, index, d as u64, k as u64);
            match cfg.sampler {
                Sampler::BinomialBridge => {
                    let n = round_count(yi, cfg.rounding, &mut rng).min(max - *xi);
                    *xi += binomial(n as u64, sched.bridge_prob(k), &mut rng) as u32;
                }
                Sampler::Poisson => {
                    let mean = cfg.poisson_mean(yi * sched.rate_factor(k), sched, k);
                    let jump = poisson(mean, &mut rng);
                    *xi = (*xi as u64 + jump).min(max as u64) as u32;
                }
                Sampler::TauLeapingGeneral => unreachable!(),
            }
        }
        if let Some(p) = path.as_deref_mut() {
            p.push(x.clone());
        }
    }
    Ok(x)
}

/// Sample `index` of a generation run. The τ-leaping sampler runs on the
/// pure-death generator with birth rates `y e^{-t_k} / (1 - e^{-t_k})`.
pub fn generate_sample<P: Predictor + ?Sized>(
    predictor: &P,
    space: &StateSpace,
    sched: &Schedule,
    cfg: &GenConfig,
    index: u64,
) -> Result<Vec<u32>> {
    match cfg.sampler {
        Sampler::TauLeapingGeneral => {
            let g = Generator::pure_death(space.max_label());
            let rates = DeathReversal::new(predictor);
            tau_leaping_sample(&rates, &g, space, sched, cfg, index)
        }
        _ => blackout_sample(predictor, space, sched, cfg, index, None),
    }
}

/// Like [`generate_sample`] for the Blackout samplers, also returning the
/// states visited at `t_T, t_{T-1}, ..., t_0`.
pub fn generate_path<P: Predictor + ?Sized>(
    predictor: &P,
    space: &StateSpace,
    sched: &Schedule,
    cfg: &GenConfig,
    index: u64,
) -> Result<Vec<Vec<u32>>> {
    ensure(cfg.sampler != Sampler::TauLeapingGeneral, "paths are recorded for the Blackout samplers only")?;
    let mut path = Vec::with_capacity(sched.len() + 1);
    blackout_sample(predictor, space, sched, cfg, index, Some(&mut path))?;
    Ok(path)
}

/// `cfg.count` samples, indices `0..count`.
pub fn generate<P: Predictor + ?Sized>(
    predictor: &P,
    space: &StateSpace,
    sched: &Schedule,
    cfg: &GenConfig,
) -> Result<Vec<Vec<u32>>> {
    cfg.validate()?;
    (0..cfg.count as u64).map(|i| generate_sample(predictor, space, sched, cfg, i)).collect()
}

/// Per-transition reverse-rate predictions for the τ-leaping sampler.
///
/// Transition `r` is the reversal of the forward jump `shifts()[r]`: it moves
/// a component from `m` to `m - offset`.
pub trait RatePredictor {
    fn shifts(&self) -> &[Shift];

    fn predict_rates(&self, r: usize, xt: &[u32], k: usize, sched: &Schedule) -> Result<Vec<f64>>;
}

/// Pure-death reverse rates from a predictor of `X_0 - X_t`.
#[derive(Debug, Clone, Copy)]
pub struct DeathReversal<P> {
    predictor: P,
}

const DEATH_ONLY: [Shift; 1] = [Shift::DEATH];

impl<P> DeathReversal<P> {
    pub fn new(predictor: P) -> Self {
        Self { predictor }
    }
}

impl<P: Predictor> RatePredictor for DeathReversal<P> {
    fn shifts(&self) -> &[Shift] {
        &DEATH_ONLY
    }

    fn predict_rates(&self, r: usize, xt: &[u32], k: usize, sched: &Schedule) -> Result<Vec<f64>> {
        ensure(r == 0, "pure death has a single transition type")?;
        let f = sched.rate_factor(k);
        Ok(self.predictor.predict(xt, k, sched)?.into_iter().map(|y| y * f).collect())
    }
}

/// How a rate network's output becomes a rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateScale {
    /// The output is the rate.
    #[default]
    Plain,
    /// The output divided by `1 - e^{-t_k}`. Reverse rates toward the
    /// conditioning state grow like `1/t` as `t -> 0`; this factor carries
    /// that growth so the network fits a bounded function.
    Decayed,
}

impl RateScale {
    #[inline]
    pub fn factor(self, sched: &Schedule, k: usize) -> f64 {
        match self {
            RateScale::Plain => 1.0,
            RateScale::Decayed => 1.0 / sched.decayed(k),
        }
    }
}

/// One network per transition type.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpRates {
    shifts: Vec<Shift>,
    nets: Vec<MlpPredictor>,
    scale: RateScale,
}

impl MlpRates {
    pub fn new(shifts: Vec<Shift>, nets: Vec<MlpPredictor>) -> Result<Self> {
        ensure(!shifts.is_empty(), "at least one transition type is required")?;
        ensure_len(shifts.len(), nets.len())?;
        ensure(nets.iter().all(|n| n.space() == nets[0].space()), "networks disagree on the state space")?;
        Ok(Self { shifts, nets, scale: RateScale::Plain })
    }

    pub fn with_scale(mut self, scale: RateScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn scale(&self) -> RateScale {
        self.scale
    }

    /// Glorot-initialized networks with the given hidden sizes.
    pub fn random<R: Rng + ?Sized>(space: StateSpace, shifts: Vec<Shift>, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![space.dims() + 2];
        sizes.extend_from_slice(hidden);
        sizes.push(space.dims());
        let nets = shifts
            .iter()
            .map(|_| MlpPredictor::new(MlpParams::random(&sizes, rng)?, space))
            .collect::<Result<Vec<_>>>()?;
        Self::new(shifts, nets)
    }

    pub fn nets(&self) -> &[MlpPredictor] {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut [MlpPredictor] {
        &mut self.nets
    }

    pub fn space(&self) -> &StateSpace {
        self.nets[0].space()
    }
}

impl RatePredictor for MlpRates {
    fn shifts(&self) -> &[Shift] {
        &self.shifts
    }

    fn predict_rates(&self, r: usize, xt: &[u32], k: usize, sched: &Schedule) -> Result<Vec<f64>> {
        let f = self.scale.factor(sched, k);
        let net = self.nets.get(r).ok_or(Error::Domain("transition index out of range"))?;
        Ok(net.predict(xt, k, sched)?.into_iter().map(|y| y * f).collect())
    }
}

/// Forward transition matrices `P(t_k)` for `k = 0..=T`, with `P[m][o] = p(m, t_k | o, 0)`.
#[derive(Debug, Clone)]
pub struct ForwardLaws {
    generator: Generator,
    laws: Vec<SquareMatrix>,
}

impl ForwardLaws {
    pub fn new(generator: &Generator, sched: &Schedule) -> Result<Self> {
        let laws = sched.times().iter().map(|&t| generator.transition_matrix(t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { generator: generator.clone(), laws })
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn law(&self, k: usize) -> &SquareMatrix {
        &self.laws[k]
    }

    /// Exact reverse rate `ν(m') p(m', t_k | o) / p(m, t_k | o)` of the
    /// reversal of `shift` out of `m`; zero when `m` has no preimage.
    pub fn reverse_rate(&self, shift: Shift, o: u32, m: u32, k: usize) -> Result<f64> {
        let Some(pre) = shift.preimage(m, self.generator.max_label()) else {
            return Ok(0.0);
        };
        let law = &self.laws[k];
        let pm = law[(m as usize, o as usize)];
        if pm < crate::ctmc::UNREACHABLE_BELOW {
            return Err(Error::Unreachable(m));
        }
        Ok(self.generator.rate(pre, m) * law[(pre as usize, o as usize)] / pm)
    }

    fn sample<R: Rng + ?Sized>(&self, o: u32, k: usize, rng: &mut R) -> u32 {
        categorical(&self.laws[k].column(o as usize), rng) as u32
    }
}

/// Train per-transition rate networks against exact reverse rates; returns
/// the per-iteration batch loss. `cfg.loss` is not consulted: the weight is
/// always `(t_k - t_{k-1})(1 - e^{-t_k})`.
pub fn train_general(
    ds: &DiscreteDataset,
    laws: &ForwardLaws,
    rates: &mut MlpRates,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    ensure(rates.space() == ds.space(), "rate networks and dataset spaces differ")?;
    ensure(laws.generator().max_label() == ds.space().max_label(), "generator and dataset labels differ")?;
    let sched = cfg.schedule()?;
    ensure_len(sched.len() + 1, laws.laws.len())?;
    let mut opts: Vec<Sgd> = (0..rates.nets.len()).map(|_| Sgd::new(cfg.learning_rate, cfg.momentum)).collect::<Result<_>>()?;
    let mut rng = substream([TRAIN_STREAM, cfg.seed, 1, 0]);
    let mut trace = Vec::with_capacity(cfg.iterations);
    let inv_batch = 1.0 / cfg.batch as f64;
    let dims = ds.space().dims() as f64;
    for _ in 0..cfg.iterations {
        let mut grads = rates
            .nets
            .iter()
            .map(|n| MlpParams::zeros(&n.params().sizes()))
            .collect::<Result<Vec<_>>>()?;
        let mut loss = 0.0;
        for _ in 0..cfg.batch {
            let x0 = ds.sample(&mut rng);
            let k = rng.random_range(1..=sched.len());
            let r = rng.random_range(0..rates.shifts.len());
            let xt: Vec<u32> = x0.iter().map(|&o| laws.sample(o, k, &mut rng)).collect();
            let lambda = x0
                .iter()
                .zip(&xt)
                .map(|(&o, &m)| laws.reverse_rate(rates.shifts[r], o, m, k))
                .collect::<Result<Vec<_>>>()?;
            let w = general_weight(&sched, k);
            let dt = sched.step(k);
            let net = &rates.nets[r];
            let f = rates.scale.factor(&sched, k);
            let kappa: Vec<f64> = net.predict(&xt, k, &sched)?.into_iter().map(|y| y * f).collect();
            loss += w * general_loss(&kappa, &lambda, dt)? / dims * inv_batch;
            // With κ = f y, d/dy of κ - λ ln κ is f (1 - (λ/f) / y).
            let scaled: Vec<f64> = lambda.iter().map(|l| l / f).collect();
            let (_, g) = net.backprop_weighted(&xt, k, &sched, w * dt * f, &scaled)?;
            grads[r].add_scaled(&g, inv_batch);
        }
        for ((net, opt), g) in rates.nets.iter_mut().zip(&mut opts).zip(&grads) {
            opt.step(net.params_mut(), g);
        }
        trace.push(loss);
    }
    Ok(trace)
}

fn tau_leaping_sample<P: RatePredictor + ?Sized>(
    rates: &P,
    generator: &Generator,
    space: &StateSpace,
    sched: &Schedule,
    cfg: &GenConfig,
    index: u64,
) -> Result<Vec<u32>> {
    let max = space.max_label();
    ensure(generator.max_label() == max, "generator and space labels differ")?;
    let shifts = rates.shifts();
    // Start from the forward law at t_T, begun at 0; for pure death this is the black state.
    let start = generator.transition_matrix(sched.horizon())?.column(0);
    let mut x: Vec<u32> = (0..space.dims())
        .map(|d| categorical(&start, &mut sample_stream(cfg.seed, index, d as u64, 0)) as u32)
        .collect();
    for k in (1..=sched.len()).rev() {
        let predicted = (0..shifts.len())
            .map(|r| {
                let y = rates.predict_rates(r, &x, k, sched)?;
                check_prediction(&y, x.len())?;
                Ok(y)
            })
            .collect::<Result<Vec<_>>>()?;
        for (d, xi) in x.iter_mut().enumerate() {
            let mut rng = sample_stream(cfg.seed, index, d as u64, k as u64);
            let mut pos = *xi as i64;
            for (shift, y) in shifts.iter().zip(&predicted) {
                let n = poisson(cfg.poisson_mean(y[d].max(0.0), sched, k), &mut rng);
                pos -= shift.offset().saturating_mul(n.min(i64::MAX as u64) as i64);
                pos = pos.clamp(0, max as i64);
            }
            *xi = pos as u32;
        }
    }
    Ok(x)
}

/// `cfg.count` τ-leaping samples driven by per-transition rate predictions.
pub fn generate_tau_leaping<P: RatePredictor + ?Sized>(
    rates: &P,
    generator: &Generator,
    space: &StateSpace,
    sched: &Schedule,
    cfg: &GenConfig,
) -> Result<Vec<Vec<u32>>> {
    cfg.validate()?;
    (0..cfg.count as u64).map(|i| tau_leaping_sample(rates, generator, space, sched, cfg, i)).collect()
}

/// Sample `index` of [`generate_tau_leaping`].
pub fn generate_tau_leaping_sample<P: RatePredictor + ?Sized>(
    rates: &P,
    generator: &Generator,
    space: &StateSpace,
    sched: &Schedule,
    cfg: &GenConfig,
    index: u64,
) -> Result<Vec<u32>> {
    tau_leaping_sample(rates, generator, space, sched, cfg, index)
}

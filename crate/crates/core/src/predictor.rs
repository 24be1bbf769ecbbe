//! Predictors of `X_0 - X_t` given `X_t` and the observation index.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{ensure, ensure_len, Error, Result};
use crate::loss::{per_element_grad, per_element_loss, poisson_nll, LossKind};
use crate::math::{binomial_ln_pmf, exp, ln, ln_one_minus_exp_neg, sigmoid, softplus, sqrt, LnFactorial};
use crate::sampling::categorical;
use crate::schedule::Schedule;
use crate::space::StateSpace;

/// Smallest value an oracle prediction is clamped to.
pub const PREDICTION_FLOOR: f64 = 1e-12;

/// Anything that maps `(X_t, k)` to a positive per-component prediction.
pub trait Predictor {
    fn predict(&self, xt: &[u32], k: usize, sched: &Schedule) -> Result<Vec<f64>>;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict(&self, xt: &[u32], k: usize, sched: &Schedule) -> Result<Vec<f64>> {
        (**self).predict(xt, k, sched)
    }
}

/// A finite weighted set of clean states.
#[derive(Debug, Clone)]
pub struct DiscreteDataset {
    space: StateSpace,
    items: Vec<Vec<u32>>,
    weights: Vec<f64>,
    ln_fact: LnFactorial,
}

impl DiscreteDataset {
    /// Weights default to uniform and are normalized when given.
    pub fn new(space: StateSpace, items: Vec<Vec<u32>>, weights: Option<Vec<f64>>) -> Result<Self> {
        ensure(!items.is_empty(), "dataset must be nonempty")?;
        for item in &items {
            space.check_state(item)?;
        }
        let weights = match weights {
            None => vec![1.0 / items.len() as f64; items.len()],
            Some(w) => {
                ensure_len(items.len(), w.len())?;
                ensure(w.iter().all(|&v| v >= 0.0 && v.is_finite()), "dataset weights must be nonnegative")?;
                let total: f64 = w.iter().sum();
                ensure(total > 0.0, "dataset weights must not all be zero")?;
                w.iter().map(|v| v / total).collect()
            }
        };
        let ln_fact = LnFactorial::new(space.max_label());
        Ok(Self { space, items, weights, ln_fact })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn items(&self) -> &[Vec<u32>] {
        &self.items
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[u32] {
        &self.items[categorical(&self.weights, rng)]
    }

    /// Posterior over items of `X_0` given `X_t = xt` at survival logs
    /// `(ln q, ln(1-q))`.
    fn posterior_from_logs(&self, xt: &[u32], ln_q: f64, ln_1mq: f64) -> Result<Vec<f64>> {
        self.space.check_state(xt)?;
        let mut logw: Vec<f64> = self
            .items
            .iter()
            .zip(&self.weights)
            .map(|(item, &w)| {
                if w == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut acc = ln(w);
                for (&o, &m) in item.iter().zip(xt) {
                    if m > o {
                        return f64::NEG_INFINITY;
                    }
                    acc += binomial_ln_pmf(self.ln_fact.ln_choose(o, m), o, m, ln_q, ln_1mq);
                }
                acc
            })
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::Inconsistent);
        }
        let mut total = 0.0;
        for v in logw.iter_mut() {
            *v = exp(*v - max);
            total += *v;
        }
        for v in logw.iter_mut() {
            *v /= total;
        }
        Ok(logw)
    }

    /// Posterior weights of the items given `X_t = xt` at time `t`.
    pub fn posterior(&self, xt: &[u32], t: f64) -> Result<Vec<f64>> {
        ensure(t >= 0.0, "time must be nonnegative")?;
        self.posterior_from_logs(xt, -t, ln_one_minus_exp_neg(t))
    }

    fn mean_difference(&self, xt: &[u32], post: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; xt.len()];
        for (item, &w) in self.items.iter().zip(post) {
            if w == 0.0 {
                continue;
            }
            for ((o, &x), &m) in out.iter_mut().zip(item).zip(xt) {
                *o += w * (x as f64 - m as f64);
            }
        }
        for v in out.iter_mut() {
            *v = v.max(PREDICTION_FLOOR);
        }
        out
    }
}

/// Exact posterior mean `E[X_0 - X_t | X_t = xt]` over the dataset.
pub fn oracle_predict(ds: &DiscreteDataset, xt: &[u32], t: f64) -> Result<Vec<f64>> {
    let post = ds.posterior(xt, t)?;
    Ok(ds.mean_difference(xt, &post))
}

/// [`oracle_predict`] as a [`Predictor`], evaluated at the schedule times.
#[derive(Debug, Clone, Copy)]
pub struct BayesOracle<'a> {
    ds: &'a DiscreteDataset,
}

impl<'a> BayesOracle<'a> {
    pub fn new(ds: &'a DiscreteDataset) -> Self {
        Self { ds }
    }
}

impl Predictor for BayesOracle<'_> {
    fn predict(&self, xt: &[u32], k: usize, sched: &Schedule) -> Result<Vec<f64>> {
        sched.check_index(k)?;
        let post = self.ds.posterior_from_logs(xt, -sched.time(k), ln(sched.decayed(k)))?;
        Ok(self.ds.mean_difference(xt, &post))
    }
}

/// One dense layer, `out = W in + b` with `W` stored row-major (`outputs x inputs`).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }
}

/// Multilayer perceptron: tanh hidden layers, softplus output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

impl MlpParams {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        ensure(sizes.len() >= 2, "an MLP needs at least input and output sizes")?;
        ensure(sizes.iter().all(|&s| s >= 1), "layer sizes must be positive")?;
        let layers = sizes
            .windows(2)
            .map(|w| Layer { inputs: w[0], outputs: w[1], weights: vec![0.0; w[0] * w[1]], bias: vec![0.0; w[1]] })
            .collect();
        Ok(Self { layers })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(sizes)?;
        for layer in &mut p.layers {
            let a = sqrt(6.0 / (layer.inputs + layer.outputs) as f64);
            for w in &mut layer.weights {
                *w = a * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Ok(p)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters layer by layer, weights (row-major) then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn from_flat(sizes: &[usize], flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(sizes)?;
        ensure_len(p.num_params(), flat.len())?;
        ensure(flat.iter().all(|v| v.is_finite()), "MLP parameters must be finite")?;
        let mut at = 0;
        for l in &mut p.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(p)
    }

    /// `self += scale * other` (shapes must agree).
    pub fn add_scaled(&mut self, other: &MlpParams, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= s);
        }
    }

    /// Pre-activations of every layer for `input`.
    fn trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = input.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.apply(&act);
            if i < last {
                act = z.iter().map(|&v| libm::tanh(v)).collect();
            }
            pre.push(z);
        }
        pre
    }

    /// Network output for a raw feature vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.input_size(), input.len())?;
        let pre = self.trace(input);
        Ok(pre[pre.len() - 1].iter().map(|&z| softplus(z)).collect())
    }

    /// Gradient of a loss with respect to the parameters, given the
    /// output and `d loss / d output`.
    pub fn backward(&self, input: &[f64], d_out: &[f64]) -> Result<MlpParams> {
        ensure_len(self.input_size(), input.len())?;
        ensure_len(self.output_size(), d_out.len())?;
        let pre = self.trace(input);
        let last = self.layers.len() - 1;
        let mut grad = Self::zeros(&self.sizes())?;
        // delta = d loss / d pre-activation of the current layer
        let mut delta: Vec<f64> = d_out.iter().zip(&pre[last]).map(|(g, &z)| g * sigmoid(z)).collect();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let below: Vec<f64> = if i == 0 {
                input.to_vec()
            } else {
                pre[i - 1].iter().map(|&v| libm::tanh(v)).collect()
            };
            let g = &mut grad.layers[i];
            for o in 0..layer.outputs {
                g.bias[o] = delta[o];
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, x) in row.iter_mut().zip(&below) {
                    *w = delta[o] * x;
                }
            }
            if i > 0 {
                let mut next = vec![0.0; layer.inputs];
                for o in 0..layer.outputs {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += delta[o] * w;
                    }
                }
                delta = next.iter().zip(&below).map(|(d, a)| d * (1.0 - a * a)).collect();
            }
        }
        Ok(grad)
    }
}

/// Input features: `x_t / M` per component, then `t_k / t_T` and `e^{-t_k}`.
pub fn features(xt: &[u32], k: usize, sched: &Schedule, max_label: u32) -> Vec<f64> {
    let mut f: Vec<f64> = xt.iter().map(|&m| m as f64 / max_label as f64).collect();
    f.push(sched.time(k) / sched.horizon());
    f.push(sched.survival(k));
    f
}

/// An MLP bound to a state space; input size must be `N + 2`, output `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPredictor {
    params: MlpParams,
    space: StateSpace,
}

impl MlpPredictor {
    pub fn new(params: MlpParams, space: StateSpace) -> Result<Self> {
        ensure_len(space.dims() + 2, params.input_size())?;
        ensure_len(space.dims(), params.output_size())?;
        Ok(Self { params, space })
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut MlpParams {
        &mut self.params
    }

    pub fn into_params(self) -> MlpParams {
        self.params
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    fn inputs(&self, xt: &[u32], k: usize, sched: &Schedule) -> Result<Vec<f64>> {
        self.space.check_state(xt)?;
        sched.check_index(k)?;
        Ok(features(xt, k, sched, self.space.max_label()))
    }

    /// Loss `weight * mean_i [y_i - c_i ln y_i]` and its parameter gradient.
    pub fn backprop_weighted(
        &self,
        xt: &[u32],
        k: usize,
        sched: &Schedule,
        weight: f64,
        targets: &[f64],
    ) -> Result<(f64, MlpParams)> {
        ensure_len(self.space.dims(), targets.len())?;
        let input = self.inputs(xt, k, sched)?;
        let y = self.params.forward(&input)?;
        let n = y.len() as f64;
        let mut loss = 0.0;
        let mut d_out = Vec::with_capacity(y.len());
        for (&yi, &c) in y.iter().zip(targets) {
            ensure(yi > 0.0, "softplus output underflowed to zero")?;
            loss += poisson_nll(yi, c);
            d_out.push(weight * (1.0 - c / yi) / n);
        }
        let grad = self.params.backward(&input, &d_out)?;
        Ok((weight * loss / n, grad))
    }

    /// Mean over components of the per-element loss for `kind`, with its gradient.
    pub fn backprop(
        &self,
        xt: &[u32],
        k: usize,
        target: &[f64],
        kind: LossKind,
        sched: &Schedule,
    ) -> Result<(f64, MlpParams)> {
        ensure_len(self.space.dims(), target.len())?;
        let input = self.inputs(xt, k, sched)?;
        let y = self.params.forward(&input)?;
        let n = y.len() as f64;
        let mut loss = 0.0;
        let mut d_out = Vec::with_capacity(y.len());
        for (&yi, &c) in y.iter().zip(target) {
            loss += per_element_loss(kind, yi, c, k, sched)?;
            d_out.push(per_element_grad(kind, yi, c, k, sched)? / n);
        }
        Ok((loss / n, self.params.backward(&input, &d_out)?))
    }
}

impl Predictor for MlpPredictor {
    fn predict(&self, xt: &[u32], k: usize, sched: &Schedule) -> Result<Vec<f64>> {
        let input = self.inputs(xt, k, sched)?;
        self.params.forward(&input)
    }
}

/// Plain SGD with optional heavy-ball momentum.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Option<MlpParams>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        ensure(learning_rate > 0.0 && learning_rate.is_finite(), "learning rate must be positive")?;
        ensure((0.0..1.0).contains(&momentum), "momentum must be in [0, 1)")?;
        Ok(Self { learning_rate, momentum, velocity: None })
    }

    pub fn step(&mut self, params: &mut MlpParams, grad: &MlpParams) {
        if self.momentum == 0.0 {
            params.add_scaled(grad, -self.learning_rate);
            return;
        }
        let v = self.velocity.get_or_insert_with(|| {
            let mut z = grad.clone();
            z.scale(0.0);
            z
        });
        v.scale(self.momentum);
        v.add_scaled(grad, 1.0);
        params.add_scaled(v, -self.learning_rate);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(m: u32, n: usize) -> StateSpace {
        StateSpace::new(m, n).unwrap()
    }

    #[test]
    fn singleton_oracle_is_exact() {
        let ds = DiscreteDataset::new(space(8, 3), vec![vec![7, 2, 8]], None).unwrap();
        let y = oracle_predict(&ds, &[3, 2, 0], 0.9).unwrap();
        assert_eq!(y[0], 4.0);
        assert_eq!(y[1], PREDICTION_FLOOR);
        assert_eq!(y[2], 8.0);
    }

    #[test]
    fn oracle_at_long_times_returns_prior_mean() {
        let items = vec![vec![1, 8], vec![5, 3], vec![8, 8], vec![0, 2]];
        let ds = DiscreteDataset::new(space(8, 2), items.clone(), Some(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let w = [0.1, 0.2, 0.3, 0.4];
        let mean = |d: usize| items.iter().zip(w).map(|(x, w)| w * x[d] as f64).sum::<f64>();
        let y = oracle_predict(&ds, &[0, 0], 30.0).unwrap();
        for d in 0..2 {
            assert!((y[d] - mean(d)).abs() < 1e-10);
        }
        // At X_t = 0 the weights tilt by (1-q)^{sum x}; first order gives -q Cov(x_d, sum x),
        // the remainder is O(q^2 (sum x)^2).
        let q = libm::exp(-15.0);
        let total = |x: &Vec<u32>| (x[0] + x[1]) as f64;
        let mean_total: f64 = items.iter().zip(w).map(|(x, w)| w * total(x)).sum();
        let y = oracle_predict(&ds, &[0, 0], 15.0).unwrap();
        for d in 0..2 {
            let cov: f64 = items.iter().zip(w).map(|(x, w)| w * (x[d] as f64 - mean(d)) * (total(x) - mean_total)).sum();
            assert!((y[d] - (mean(d) - q * cov)).abs() < 1e-10);
        }
        let post = ds.posterior(&[0, 0], 3.0).unwrap();
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_excludes_zero_likelihood_items() {
        let ds = DiscreteDataset::new(space(8, 2), vec![vec![0, 0], vec![8, 8]], None).unwrap();
        let post = ds.posterior(&[0, 1], 2.0).unwrap();
        assert_eq!(post, vec![0.0, 1.0]);
        let ds1 = DiscreteDataset::new(space(8, 1), vec![vec![2]], None).unwrap();
        assert_eq!(oracle_predict(&ds1, &[3], 1.0), Err(Error::Inconsistent));
    }

    #[test]
    fn oracle_beats_every_constant() {
        let items = vec![vec![0], vec![3], vec![4], vec![8]];
        let ds = DiscreteDataset::new(space(8, 1), items.clone(), Some(vec![0.4, 0.1, 0.2, 0.3])).unwrap();
        for t in [0.05, 0.4, 1.0, 2.5, 6.0] {
            for m in 0..=8u32 {
                let Ok(post) = ds.posterior(&[m], t) else { continue };
                let expected = |y: f64| -> f64 {
                    items.iter().zip(&post).map(|(x, w)| w * poisson_nll(y, (x[0] as f64 - m as f64).max(0.0))).sum()
                };
                let best = expected(oracle_predict(&ds, &[m], t).unwrap()[0]);
                for i in 1..=800 {
                    assert!(best <= expected(i as f64 * 0.01) + 1e-12, "t={t} m={m}");
                }
            }
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(DiscreteDataset::new(space(4, 2), vec![], None).is_err());
        assert!(DiscreteDataset::new(space(4, 2), vec![vec![5, 0]], None).is_err());
        assert!(DiscreteDataset::new(space(4, 2), vec![vec![1, 0]], Some(vec![-1.0])).is_err());
    }

    #[test]
    fn zero_weights_give_softplus_bias() {
        let mut p = MlpParams::zeros(&[5, 4, 3]).unwrap();
        for (i, b) in p.layers_mut()[1].bias_mut().iter_mut().enumerate() {
            *b = i as f64 - 1.0;
        }
        let pred = MlpPredictor::new(p, space(8, 3)).unwrap();
        let sched = Schedule::fisher(10, 15.0).unwrap();
        let y = pred.predict(&[1, 5, 8], 4, &sched).unwrap();
        for (i, v) in y.iter().enumerate() {
            assert!((v - softplus(i as f64 - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn outputs_are_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sched = Schedule::fisher(100, 15.0).unwrap();
        for _ in 0..10_000 {
            let mut p = MlpParams::random(&[4, 6, 2], &mut rng).unwrap();
            p.scale(1.0 + 4.0 * rng.random::<f64>());
            let pred = MlpPredictor::new(p, space(16, 2)).unwrap();
            let xt = [rng.random_range(0..=16), rng.random_range(0..=16)];
            let k = rng.random_range(1..=100);
            assert!(pred.predict(&xt, k, &sched).unwrap().iter().all(|&v| v > 0.0));
        }
    }

    fn fd_check(pred: &MlpPredictor, xt: &[u32], k: usize, target: &[f64], kind: LossKind, sched: &Schedule) -> f64 {
        let (_, grad) = pred.backprop(xt, k, target, kind, sched).unwrap();
        let g = grad.to_flat();
        let base = pred.params().to_flat();
        let sizes = pred.params().sizes();
        let h = 1e-4;
        let loss_at = |flat: &[f64]| {
            let p = MlpPredictor::new(MlpParams::from_flat(&sizes, flat).unwrap(), *pred.space()).unwrap();
            p.backprop(xt, k, target, kind, sched).unwrap().0
        };
        let mut worst = 0.0f64;
        let scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += h;
            let mut minus = base.clone();
            minus[i] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / scale);
        }
        worst
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sched = Schedule::fisher(50, 15.0).unwrap();
        let pred = MlpPredictor::new(MlpParams::random(&[4, 5, 3, 2], &mut rng).unwrap(), space(8, 2)).unwrap();
        for (k, target, kind) in [
            (3usize, [2.0, 0.0], LossKind::Instantaneous),
            (25, [5.0, 1.0], LossKind::FiniteTime),
            (48, [8.0, 7.0], LossKind::Instantaneous),
        ] {
            let err = fd_check(&pred, &[3, 1], k, &target, kind, &sched);
            assert!(err < 1e-5, "k={k}: {err}");
        }
    }

    #[test]
    fn gradient_vanishes_at_stationarity() {
        let mut p = MlpParams::zeros(&[3, 4, 1]).unwrap();
        // softplus(b) = 3
        p.layers_mut()[1].bias_mut()[0] = libm::log(libm::exp(3.0) - 1.0);
        let pred = MlpPredictor::new(p, space(8, 1)).unwrap();
        let sched = Schedule::fisher(20, 15.0).unwrap();
        let (_, g) = pred.backprop(&[2], 7, &[3.0], LossKind::FiniteTime, &sched).unwrap();
        assert!(g.to_flat().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn gradient_scales_with_loss_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sched = Schedule::fisher(50, 15.0).unwrap();
        let pred = MlpPredictor::new(MlpParams::random(&[3, 4, 1], &mut rng).unwrap(), space(8, 1)).unwrap();
        let (_, a) = pred.backprop(&[1], 20, &[4.0], LossKind::Instantaneous, &sched).unwrap();
        let (_, b) = pred.backprop(&[1], 20, &[4.0], LossKind::FiniteTime, &sched).unwrap();
        let ratio = crate::loss::weight(LossKind::FiniteTime, &sched, 20) / crate::loss::weight(LossKind::Instantaneous, &sched, 20);
        for (x, y) in a.to_flat().iter().zip(b.to_flat()) {
            assert!((x * ratio - y).abs() < 1e-12 * y.abs().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn sgd_momentum_accumulates() {
        let mut p = MlpParams::zeros(&[1, 1]).unwrap();
        let mut g = MlpParams::zeros(&[1, 1]).unwrap();
        g.layers_mut()[0].bias_mut()[0] = 1.0;
        let mut opt = Sgd::new(0.1, 0.5).unwrap();
        opt.step(&mut p, &g);
        opt.step(&mut p, &g);
        assert!((p.layers()[0].bias()[0] + 0.1 * (1.0 + 1.5)).abs() < 1e-15);
    }
}

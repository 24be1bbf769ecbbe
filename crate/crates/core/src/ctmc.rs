//! Arbitrary continuous-time chains on `{0..=M}`.
//!
//! A [`Generator`] stores the master-equation matrix `L†` with
//! `L†[m][m']` the rate of the forward jump `m' -> m` and columns summing to
//! zero, so that `d/dt p = L† p`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{ensure, ensure_len, Error, Result};
use crate::math::{exp, ln, ln_gamma, sqrt};
use crate::matrix::SquareMatrix;
use crate::sampling::categorical;

/// Column-sum tolerance for a valid generator.
pub const COLUMN_SUM_TOL: f64 = 1e-12;
/// Probabilities below this are treated as unreachable.
pub const UNREACHABLE_BELOW: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Up,
    Down,
}

/// An `n`-step jump in a fixed direction, `m -> m ± n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Shift {
    pub step: u32,
    pub direction: Direction,
}

impl Shift {
    pub const DEATH: Shift = Shift { step: 1, direction: Direction::Down };
    pub const BIRTH: Shift = Shift { step: 1, direction: Direction::Up };

    pub fn new(step: u32, direction: Direction) -> Result<Self> {
        ensure(step >= 1, "shift step must be at least 1")?;
        Ok(Self { step, direction })
    }

    /// Signed offset `to - from` of the forward jump.
    pub fn offset(&self) -> i64 {
        match self.direction {
            Direction::Up => self.step as i64,
            Direction::Down => -(self.step as i64),
        }
    }

    fn from_offset(offset: i64) -> Self {
        let direction = if offset > 0 { Direction::Up } else { Direction::Down };
        Self { step: offset.unsigned_abs() as u32, direction }
    }

    /// Forward target of `m`, if it stays inside `{0..=max_label}`.
    pub fn target(&self, m: u32, max_label: u32) -> Option<u32> {
        let to = m as i64 + self.offset();
        (0..=max_label as i64).contains(&to).then_some(to as u32)
    }

    /// The state `m'` with `m' -> m` under this shift.
    pub fn preimage(&self, m: u32, max_label: u32) -> Option<u32> {
        let from = m as i64 - self.offset();
        (0..=max_label as i64).contains(&from).then_some(from as u32)
    }
}

/// One family of jumps with a state-dependent rate.
pub struct Transition<'a> {
    pub shift: Shift,
    pub rate: &'a dyn Fn(u32) -> f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    matrix: SquareMatrix,
}

impl Generator {
    /// Validate an `L†` matrix given as rows (`rows[to][from]`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let matrix = SquareMatrix::from_rows(rows).ok_or(Error::InvalidGenerator("matrix is not square"))?;
        Self::from_matrix(matrix)
    }

    pub fn from_matrix(matrix: SquareMatrix) -> Result<Self> {
        let n = matrix.size();
        if n < 2 {
            return Err(Error::InvalidGenerator("need at least two states"));
        }
        for from in 0..n {
            let mut sum = 0.0;
            let mut scale = 0.0f64;
            for to in 0..n {
                let v = matrix[(to, from)];
                if !v.is_finite() {
                    return Err(Error::InvalidGenerator("non-finite entry"));
                }
                if to != from && v < 0.0 {
                    return Err(Error::InvalidGenerator("negative off-diagonal rate"));
                }
                sum += v;
                scale = scale.max(v.abs());
            }
            if sum.abs() > COLUMN_SUM_TOL * scale.max(1.0) {
                return Err(Error::InvalidGenerator("column does not sum to zero"));
            }
        }
        Ok(Self { matrix })
    }

    /// The frozen process on `{0..=max_label}`.
    pub fn zero(max_label: u32) -> Self {
        Self { matrix: SquareMatrix::zeros(max_label as usize + 1) }
    }

    /// Assemble a banded generator by superposing jump families. Jumps that
    /// would leave `{0..=max_label}` get rate zero.
    pub fn from_transitions(max_label: u32, transitions: &[Transition<'_>]) -> Result<Self> {
        ensure(max_label >= 1, "max label M must be at least 1")?;
        let n = max_label as usize + 1;
        let mut matrix = SquareMatrix::zeros(n);
        for tr in transitions {
            for from in 0..=max_label {
                let rate = (tr.rate)(from);
                if !(rate >= 0.0) || !rate.is_finite() {
                    return Err(Error::Domain("transition rates must be finite and nonnegative"));
                }
                if rate == 0.0 {
                    continue;
                }
                if let Some(to) = tr.shift.target(from, max_label) {
                    matrix[(to as usize, from as usize)] += rate;
                    matrix[(from as usize, from as usize)] -= rate;
                }
            }
        }
        Ok(Self { matrix })
    }

    /// `m -> m-1` at rate `m`.
    pub fn pure_death(max_label: u32) -> Self {
        let rate = |m: u32| m as f64;
        Self::from_transitions(max_label, &[Transition { shift: Shift::DEATH, rate: &rate }])
            .expect("pure-death rates are valid")
    }

    /// Births at constant rate `birth` (blocked at `M`), deaths at rate `death * m`.
    pub fn birth_death(max_label: u32, birth: f64, death: f64) -> Result<Self> {
        let up = |_m: u32| birth;
        let down = |m: u32| death * m as f64;
        Self::from_transitions(
            max_label,
            &[
                Transition { shift: Shift::BIRTH, rate: &up },
                Transition { shift: Shift::DEATH, rate: &down },
            ],
        )
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.matrix.size()
    }

    #[inline]
    pub fn max_label(&self) -> u32 {
        (self.size() - 1) as u32
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    /// Rate of the forward jump `from -> to` (`to != from`).
    #[inline]
    pub fn rate(&self, from: u32, to: u32) -> f64 {
        self.matrix[(to as usize, from as usize)]
    }

    #[inline]
    pub fn exit_rate(&self, from: u32) -> f64 {
        -self.matrix[(from as usize, from as usize)]
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.size() as u32).map(|m| self.exit_rate(m)).fold(0.0, f64::max)
    }

    /// Rate of `shift` out of `from` (zero if the jump leaves the state space).
    pub fn shift_rate(&self, shift: Shift, from: u32) -> f64 {
        match shift.target(from, self.max_label()) {
            Some(to) => self.rate(from, to),
            None => 0.0,
        }
    }

    /// Distinct jump shifts carrying positive rate somewhere, in a fixed order.
    pub fn shifts(&self) -> Vec<Shift> {
        let n = self.size();
        let mut out: Vec<Shift> = Vec::new();
        for from in 0..n {
            for to in 0..n {
                if to != from && self.matrix[(to, from)] > 0.0 {
                    let s = Shift::from_offset(to as i64 - from as i64);
                    if !out.contains(&s) {
                        out.push(s);
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Forward preimages `m'` of `m` with their rates `ν(m' -> m) > 0`.
    pub fn in_edges(&self, m: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        let row = self.matrix.row(m as usize);
        row.iter()
            .enumerate()
            .filter(move |&(from, &v)| from != m as usize && v > 0.0)
            .map(|(from, &v)| (from as u32, v))
    }

    /// `L† p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(p)
    }

    /// `exp(L† t) p0` by uniformization.
    ///
    /// With `Λ = max exit rate` and `B = I + L†/Λ` (entrywise nonnegative),
    /// `exp(L† t) = Σ_k Pois(k; Λt) B^k`. Every term is nonnegative, so the
    /// result is a distribution up to the truncated Poisson tail.
    pub fn forward_solve(&self, p0: &Distribution, t: f64) -> Result<Distribution> {
        ensure_len(self.size(), p0.len())?;
        ensure(t >= 0.0 && t.is_finite(), "time must be finite and nonnegative")?;
        let lambda = self.max_exit_rate();
        if t == 0.0 || lambda == 0.0 {
            return Ok(p0.clone());
        }
        let b = self.uniformized(lambda);
        Ok(Distribution::from_raw(uniformization_series(&b, p0.probs(), lambda * t)))
    }

    /// Transition matrix `P(t)` with `P[m][o] = p(m, t | o, 0)`.
    pub fn transition_matrix(&self, t: f64) -> Result<SquareMatrix> {
        ensure(t >= 0.0 && t.is_finite(), "time must be finite and nonnegative")?;
        let n = self.size();
        let lambda = self.max_exit_rate();
        if t == 0.0 || lambda == 0.0 {
            return Ok(SquareMatrix::identity(n));
        }
        let b = self.uniformized(lambda);
        let mut out = SquareMatrix::zeros(n);
        for o in 0..n {
            let mut e = vec![0.0; n];
            e[o] = 1.0;
            for (m, v) in uniformization_series(&b, &e, lambda * t).into_iter().enumerate() {
                out[(m, o)] = v;
            }
        }
        Ok(out)
    }

    fn uniformized(&self, lambda: f64) -> SquareMatrix {
        let n = self.size();
        let mut b = self.matrix.scale(1.0 / lambda);
        for i in 0..n {
            b[(i, i)] = (1.0 + b[(i, i)]).max(0.0);
        }
        b
    }

    /// One exact draw of `X_t` given `X_0 = x0` (event-driven simulation).
    pub fn simulate_exact<R: Rng + ?Sized>(&self, x0: u32, t: f64, rng: &mut R) -> Result<u32> {
        ensure(x0 <= self.max_label(), "initial state exceeds M")?;
        ensure(t >= 0.0, "time must be nonnegative")?;
        let n = self.size();
        let mut m = x0;
        let mut clock = 0.0;
        let mut weights = vec![0.0; n];
        loop {
            let exit = self.exit_rate(m);
            if exit <= 0.0 {
                return Ok(m);
            }
            let u: f64 = rng.random();
            clock += -ln(1.0 - u) / exit;
            if clock > t {
                return Ok(m);
            }
            for (to, w) in weights.iter_mut().enumerate() {
                *w = if to == m as usize { 0.0 } else { self.matrix[(to, m as usize)] };
            }
            m = categorical(&weights, rng) as u32;
        }
    }

    /// Reverse-time jumps out of `m`: for every forward `m' -> m` with rate
    /// `ν > 0`, the pair `(m', ν p_s[m'] / p_s[m])`.
    pub fn reverse_rates(&self, p_s: &Distribution, m: u32) -> Result<Vec<(u32, f64)>> {
        ensure_len(self.size(), p_s.len())?;
        ensure(m <= self.max_label(), "state exceeds M")?;
        let pm = p_s.probs()[m as usize];
        if pm < UNREACHABLE_BELOW {
            return Err(Error::Unreachable(m));
        }
        Ok(self
            .in_edges(m)
            .map(|(from, nu)| (from, nu * p_s.probs()[from as usize] / pm))
            .collect())
    }

    /// Unnormalized discrete score `ν(m') (p_s[m'] - p_s[m]) / p_s[m]` for the
    /// jump family `shift`, where `m'` is the preimage of `m` under `shift`.
    ///
    /// There is one score per jump family entering `m`. The value carries the
    /// factor `ν(m')`; no further normalization is applied.
    pub fn discrete_score(&self, p_s: &Distribution, m: u32, shift: Shift) -> Result<f64> {
        ensure_len(self.size(), p_s.len())?;
        ensure(m <= self.max_label(), "state exceeds M")?;
        let pre = shift
            .preimage(m, self.max_label())
            .ok_or(Error::Domain("transition has no preimage inside the state space"))?;
        let pm = p_s.probs()[m as usize];
        if pm < UNREACHABLE_BELOW {
            return Err(Error::Unreachable(m));
        }
        let nu = self.rate(pre, m);
        let ppre = p_s.probs()[pre as usize];
        Ok(nu * (ppre - pm) / pm)
    }

    /// Max-norm residuals of the forward (`dP/dt - L† P`) and backward
    /// (`dP/dt - P L†`) Kolmogorov equations, using central differences of
    /// the transition matrix with the given step.
    pub fn kolmogorov_residuals(&self, t: f64, step: f64) -> Result<KolmogorovResiduals> {
        ensure(t > 0.0, "residual time must be positive")?;
        ensure(step > 0.0, "finite-difference step must be positive")?;
        let h = step.min(0.5 * t);
        let plus = self.transition_matrix(t + h)?;
        let minus = self.transition_matrix(t - h)?;
        let here = self.transition_matrix(t)?;
        let n = self.size();
        let mut deriv = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                deriv[(i, j)] = (plus[(i, j)] - minus[(i, j)]) / (2.0 * h);
            }
        }
        let fwd = self.matrix.mul(&here);
        let bwd = here.mul(&self.matrix);
        Ok(KolmogorovResiduals { forward: deriv.max_abs_diff(&fwd), backward: deriv.max_abs_diff(&bwd) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KolmogorovResiduals {
    pub forward: f64,
    pub backward: f64,
}

/// Tail mass left out of the truncated Poisson series.
const SERIES_TAIL: f64 = 1e-18;

fn uniformization_series(b: &SquareMatrix, v0: &[f64], mean: f64) -> Vec<f64> {
    let n = v0.len();
    // Terms beyond mean + 12 sd (plus slack for small means) are below 1e-18.
    let k_max = (mean + 12.0 * sqrt(mean) + 40.0) as usize;
    let ln_mean = ln(mean);
    let mut acc = vec![0.0; n];
    let mut term = v0.to_vec();
    let mut seen = 0.0;
    for k in 0..=k_max {
        let w = exp(-mean + k as f64 * ln_mean - ln_gamma(k as f64 + 1.0));
        if w > 0.0 {
            for (a, v) in acc.iter_mut().zip(&term) {
                *a += w * v;
            }
            seen += w;
        }
        if k as f64 > mean && 1.0 - seen < SERIES_TAIL {
            break;
        }
        term = b.mul_vec(&term);
    }
    acc
}

/// A probability vector over `{0..=M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

/// Sum tolerance accepted by [`Distribution::new`].
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-12;

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        ensure(!probs.is_empty(), "distribution must be nonempty")?;
        ensure(probs.iter().all(|&p| p >= 0.0 && p.is_finite()), "probabilities must be finite and nonnegative")?;
        let sum: f64 = probs.iter().sum();
        ensure((sum - 1.0).abs() <= DISTRIBUTION_SUM_TOL, "probabilities must sum to one")?;
        Ok(Self { probs })
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    /// Wrap a vector already known to be a distribution (e.g. a forward
    /// solution whose sum deviates from one by roundoff only).
    pub fn new_unchecked(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn point(size: usize, m: u32) -> Result<Self> {
        ensure((m as usize) < size, "point mass outside the state space")?;
        let mut probs = vec![0.0; size];
        probs[m as usize] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        categorical(&self.probs, rng) as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::binomial_pmf;
    use crate::math::ln_one_minus_exp_neg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_death_matrix_is_banded() {
        let g = Generator::pure_death(5);
        for m in 0..6usize {
            for mp in 0..6usize {
                let kron = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                let expect = mp as f64 * (kron(m + 1, mp) - kron(m, mp));
                assert_eq!(g.matrix()[(m, mp)], expect);
            }
        }
    }

    #[test]
    fn empty_transition_list_is_frozen() {
        let g = Generator::from_transitions(4, &[]).unwrap();
        assert_eq!(g, Generator::zero(4));
        let p0 = Distribution::point(5, 2).unwrap();
        assert_eq!(g.forward_solve(&p0, 3.0).unwrap(), p0);
    }

    #[test]
    fn birth_death_matches_hand_assembly() {
        let (lam, mu) = (0.7, 0.3);
        let g = Generator::birth_death(4, lam, mu).unwrap();
        // Columns are source states; rows are targets.
        let rows = [
            [-lam, mu, 0.0, 0.0, 0.0],
            [lam, -(lam + mu), 2.0 * mu, 0.0, 0.0],
            [0.0, lam, -(lam + 2.0 * mu), 3.0 * mu, 0.0],
            [0.0, 0.0, lam, -(lam + 3.0 * mu), 4.0 * mu],
            [0.0, 0.0, 0.0, lam, -4.0 * mu],
        ];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((g.matrix()[(i, j)] - v).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn negative_rates_are_rejected() {
        let bad = |_m: u32| -1.0;
        assert!(Generator::from_transitions(3, &[Transition { shift: Shift::BIRTH, rate: &bad }]).is_err());
        let rows = alloc::vec![alloc::vec![-1.0, 1.0], alloc::vec![1.0, -0.5]];
        assert!(Generator::from_rows(&rows).is_err());
        let rows = alloc::vec![alloc::vec![1.0, 0.0], alloc::vec![-1.0, 0.0]];
        assert!(Generator::from_rows(&rows).is_err());
    }

    #[test]
    fn forward_solve_matches_binomial() {
        for m in [1u32, 4, 16] {
            let g = Generator::pure_death(m);
            for &t in &[0.01, core::f64::consts::LN_2, 1.0, 5.0, 15.0] {
                for o in 0..=m {
                    let p = g.forward_solve(&Distribution::point(m as usize + 1, o).unwrap(), t).unwrap();
                    let exact = binomial_pmf(o, -t, ln_one_minus_exp_neg(t));
                    for (k, v) in p.probs().iter().enumerate() {
                        let e = exact.get(k).copied().unwrap_or(0.0);
                        assert!((v - e).abs() < 1e-9, "M={m} o={o} t={t} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn forward_solve_semigroup_and_mass() {
        let g = Generator::birth_death(8, 1.3, 0.4).unwrap();
        let p0 = Distribution::point(9, 3).unwrap();
        let a = g.forward_solve(&g.forward_solve(&p0, 0.6).unwrap(), 1.1).unwrap();
        let b = g.forward_solve(&p0, 1.7).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert!((x - y).abs() < 1e-9);
        }
        for &t in &[0.0, 0.5, 3.0, 20.0] {
            let p = g.forward_solve(&p0, t).unwrap();
            assert!(p.probs().iter().all(|&v| v >= 0.0));
            assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn simulate_exact_zero_generator() {
        let g = Generator::zero(5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(g.simulate_exact(4, 10.0, &mut rng).unwrap(), 4);
        }
    }

    #[test]
    fn reverse_rates_specialize_to_pure_death() {
        let g = Generator::pure_death(12);
        let (o, s) = (9u32, 0.8f64);
        let p = g.forward_solve(&Distribution::point(13, o).unwrap(), s).unwrap();
        for m in 0..o {
            let rates = g.reverse_rates(&p, m).unwrap();
            assert_eq!(rates.len(), 1);
            assert_eq!(rates[0].0, m + 1);
            let expect = (o - m) as f64 * exp(-s) / (1.0 - exp(-s));
            assert!((rates[0].1 - expect).abs() < 1e-12 * expect.max(1.0));
        }
        // The top state has no forward in-edge.
        let top = g.reverse_rates(&Distribution::point(13, 12).unwrap(), 12).unwrap();
        assert!(top.is_empty());
        assert_eq!(g.reverse_rates(&p, 10), Err(Error::Unreachable(10)));
    }

    #[test]
    fn reverse_graph_is_edge_reversal() {
        let g = Generator::birth_death(6, 0.9, 0.5).unwrap();
        let p = g.forward_solve(&Distribution::point(7, 2).unwrap(), 1.0).unwrap();
        for m in 0..=6u32 {
            let targets: Vec<u32> = g.reverse_rates(&p, m).unwrap().iter().map(|r| r.0).collect();
            let expect: Vec<u32> = (0..=6).filter(|&f| f != m && g.rate(f, m) > 0.0).collect();
            assert_eq!(targets, expect);
        }
    }

    #[test]
    fn discrete_score_vanishes_for_flat_stationary_law() {
        // Symmetric nearest-neighbour walk: uniform law is stationary and
        // satisfies detailed balance with constant rate.
        let c = 0.75;
        let up = |m: u32| if m < 5 { c } else { 0.0 };
        let down = |m: u32| if m > 0 { c } else { 0.0 };
        let g = Generator::from_transitions(
            5,
            &[Transition { shift: Shift::BIRTH, rate: &up }, Transition { shift: Shift::DEATH, rate: &down }],
        )
        .unwrap();
        let p = Distribution::new(alloc::vec![1.0 / 6.0; 6]).unwrap();
        for m in 1..5 {
            for shift in [Shift::BIRTH, Shift::DEATH] {
                assert!(g.discrete_score(&p, m, shift).unwrap().abs() < 1e-15);
            }
        }
        assert!(g.discrete_score(&p, 5, Shift::DEATH).is_err());
    }

    #[test]
    fn kolmogorov_residuals_small() {
        let z = Generator::zero(4).kolmogorov_residuals(1.0, 1e-4).unwrap();
        assert_eq!(z, KolmogorovResiduals { forward: 0.0, backward: 0.0 });
        let r = Generator::pure_death(8).kolmogorov_residuals(1.0, 1e-4).unwrap();
        assert!(r.forward < 1e-6 && r.backward < 1e-6, "{r:?}");
    }

    #[test]
    fn shifts_of_birth_death() {
        let g = Generator::birth_death(4, 1.0, 1.0).unwrap();
        assert_eq!(g.shifts(), alloc::vec![Shift::BIRTH, Shift::DEATH]);
        assert_eq!(Shift::DEATH.preimage(3, 4), Some(4));
        assert_eq!(Shift::DEATH.preimage(4, 4), None);
    }
}

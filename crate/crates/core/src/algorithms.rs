//! Online algorithms, the D-resetting wrapper and the phase-length bounds.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::metric::{ConfigSpace, Metric};
use crate::offline::WorkFunction;
use crate::rational::Rational;

/// A deterministic online k-server algorithm over a [`ConfigSpace`].
pub trait OnlineAlgorithm: Clone + Send + Sync {
    fn name(&self) -> String;

    /// Forget all history and treat `config` as the initial configuration.
    fn reset(&mut self, space: &ConfigSpace, config: usize);

    fn current(&self) -> usize;

    /// Serve request `r` and return the new configuration.
    fn serve(&mut self, space: &ConfigSpace, r: usize) -> usize;

    /// Serve `r` and return the movement cost.
    fn step(&mut self, space: &ConfigSpace, r: usize) -> Rational {
        let before = self.current();
        let after = self.serve(space, r);
        debug_assert!(space.config(after).covers(r));
        space.dist(before, after).clone()
    }
}

/// Moves the server closest to the request; ties go to the lowest origin point.
#[derive(Debug, Clone, Default)]
pub struct Greedy {
    current: usize,
}

impl Greedy {
    pub fn new(space: &ConfigSpace, c0: usize) -> Self {
        let mut g = Greedy::default();
        g.reset(space, c0);
        g
    }
}

impl OnlineAlgorithm for Greedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn reset(&mut self, _space: &ConfigSpace, config: usize) {
        self.current = config;
    }

    fn current(&self) -> usize {
        self.current
    }

    fn serve(&mut self, space: &ConfigSpace, r: usize) -> usize {
        let config = space.config(self.current);
        if config.covers(r) {
            return self.current;
        }
        let metric = space.metric();
        let mut best: Option<(&Rational, usize)> = None;
        for &p in config.points() {
            let d = metric.d(p, r);
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, p));
            }
        }
        let (_, origin) = best.expect("k >= 1");
        let next = config.moved(origin, r);
        self.current = space.index_of(&next).expect("configuration in space");
        self.current
    }
}

/// Work-function algorithm restricted to lazy moves.
#[derive(Debug, Clone)]
pub struct WorkFunctionAlgorithm {
    current: usize,
    wf: WorkFunction,
}

impl WorkFunctionAlgorithm {
    pub fn new(space: &ConfigSpace, c0: usize) -> Self {
        WorkFunctionAlgorithm { current: c0, wf: WorkFunction::init(space, c0) }
    }

    pub fn work_function(&self) -> &WorkFunction {
        &self.wf
    }
}

impl OnlineAlgorithm for WorkFunctionAlgorithm {
    fn name(&self) -> String {
        "wfa".into()
    }

    fn reset(&mut self, space: &ConfigSpace, config: usize) {
        *self = WorkFunctionAlgorithm::new(space, config);
    }

    fn current(&self) -> usize {
        self.current
    }

    fn serve(&mut self, space: &ConfigSpace, r: usize) -> usize {
        self.wf = self.wf.update(space, r);
        let mut best: Option<(Rational, usize)> = None;
        for c in space.lazy_moves(self.current, r) {
            let objective = self.wf.value(c) + space.dist(self.current, c);
            if best.as_ref().is_none_or(|(b, _)| objective < *b) {
                best = Some((objective, c));
            }
        }
        self.current = best.expect("lazy move set non-empty").1;
        self.current
    }
}

/// Resets the inner algorithm after every `d`-th paid (non-zero cost) answer.
///
/// The inner algorithm is re-initialised with the current configuration as
/// its start; it gets no other signal.
#[derive(Debug, Clone)]
pub struct Resetting<A> {
    inner: A,
    d: u64,
    paid: u64,
    steps: usize,
    resets: Vec<usize>,
}

pub fn wrap_resetting<A: OnlineAlgorithm>(inner: A, d: u64) -> Resetting<A> {
    assert!(d >= 1, "D must be at least 1");
    Resetting { inner, d, paid: 0, steps: 0, resets: Vec::new() }
}

impl<A> Resetting<A> {
    /// 1-based step numbers after which a reset happened.
    pub fn reset_steps(&self) -> &[usize] {
        &self.resets
    }

    pub fn inner(&self) -> &A {
        &self.inner
    }
}

impl<A: OnlineAlgorithm> OnlineAlgorithm for Resetting<A> {
    fn name(&self) -> String {
        format!("{}-reset{}", self.inner.name(), self.d)
    }

    fn reset(&mut self, space: &ConfigSpace, config: usize) {
        self.inner.reset(space, config);
        self.paid = 0;
        self.steps = 0;
        self.resets.clear();
    }

    fn current(&self) -> usize {
        self.inner.current()
    }

    fn serve(&mut self, space: &ConfigSpace, r: usize) -> usize {
        let before = self.inner.current();
        let after = self.inner.serve(space, r);
        self.steps += 1;
        if !space.dist(before, after).is_zero() {
            self.paid += 1;
            if self.paid.is_multiple_of(self.d) {
                self.inner.reset(space, after);
                self.resets.push(self.steps);
            }
        }
        after
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutcome {
    pub total: Rational,
    pub costs: Vec<Rational>,
    pub answers: Vec<usize>,
}

/// Runs `alg` from `c0` over the request sequence.
pub fn simulate<A: OnlineAlgorithm>(
    alg: &mut A,
    space: &ConfigSpace,
    c0: usize,
    requests: &[usize],
) -> SimOutcome {
    alg.reset(space, c0);
    let mut total = Rational::zero();
    let mut costs = Vec::with_capacity(requests.len());
    let mut answers = Vec::with_capacity(requests.len());
    for &r in requests {
        let cost = alg.step(space, r);
        total += &cost;
        costs.push(cost);
        answers.push(alg.current());
    }
    SimOutcome { total, costs, answers }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BoundsError {
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("c must be at least 1")]
    RatioBelowOne,
    #[error("alpha must be non-negative")]
    NegativeAlpha,
}

/// Phase-length constants for a D-resetting (c + ε)-competitive algorithm,
/// evaluated on the normalized metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundParameters {
    pub k: usize,
    pub c: Rational,
    pub alpha: Rational,
    pub epsilon: Rational,
    pub gamma: Rational,
    /// `k * max d(s, t)`.
    pub b: Rational,
    /// Optimal cost per phase, `2B / ε`.
    pub opt_threshold: Rational,
    /// `c * opt_threshold + alpha`.
    pub phi: Rational,
    /// `ceil(phi * opt_threshold)` paid requests per phase.
    pub d: BigInt,
    /// ξ_2, ..., ξ_k.
    pub xi: Vec<Rational>,
}

impl BoundParameters {
    /// ξ_i for any i >= 2, i.e. `ξ_2^(i-1)`; not limited to i <= k.
    pub fn xi_at(&self, i: usize) -> Rational {
        assert!(i >= 2, "xi is defined from index 2");
        let xi2 = self.xi2();
        let mut v = xi2.clone();
        for _ in 2..i {
            v = &v * &xi2;
        }
        v
    }

    fn xi2(&self) -> Rational {
        let two = Rational::from_integer(2.into());
        &two + &two * &self.b * &self.phi / &self.epsilon
    }
}

pub fn compute_bounds(
    metric: &Metric,
    k: usize,
    c: &Rational,
    alpha: &Rational,
    epsilon: &Rational,
) -> Result<BoundParameters, BoundsError> {
    if !epsilon.is_positive() {
        return Err(BoundsError::NonPositiveEpsilon);
    }
    if *c < Rational::one() {
        return Err(BoundsError::RatioBelowOne);
    }
    if alpha.is_negative() {
        return Err(BoundsError::NegativeAlpha);
    }
    let normalized = metric.normalize();
    let b = normalized.max_distance() * Rational::from_integer(BigInt::from(k));
    let two = Rational::from_integer(2.into());
    let opt_threshold = &two * &b / epsilon;
    let phi = c * &opt_threshold + alpha;
    let d = (&phi * &opt_threshold).ceil().to_integer();
    let mut params = BoundParameters {
        k,
        c: c.clone(),
        alpha: alpha.clone(),
        epsilon: epsilon.clone(),
        gamma: metric.gamma().clone(),
        b,
        opt_threshold,
        phi,
        d,
        xi: Vec::new(),
    };
    params.xi = (2..=k).map(|i| params.xi_at(i)).collect();
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Configuration;
    use crate::offline::opt_cost;
    use crate::rational::int;

    fn idx(space: &ConfigSpace, p: &[usize]) -> usize {
        space.index_of(&Configuration::new(p.to_vec())).unwrap()
    }

    #[test]
    fn greedy_examples() {
        let s = ConfigSpace::new(Metric::uniform(3), 2).unwrap();
        let c0 = idx(&s, &[0, 1]);
        let mut g = Greedy::new(&s, c0);
        assert_eq!(g.step(&s, 1), int(0));
        assert_eq!(g.current(), c0);
        assert_eq!(g.step(&s, 2), int(1));
        assert_eq!(g.current(), idx(&s, &[1, 2]));

        let line = ConfigSpace::new(Metric::line(&[int(0), int(1), int(3)]).unwrap(), 2).unwrap();
        let mut g = Greedy::new(&line, idx(&line, &[0, 1]));
        assert_eq!(g.step(&line, 2), int(2));
        assert_eq!(g.current(), idx(&line, &[0, 2]));
    }

    #[test]
    fn wfa_examples() {
        let s = ConfigSpace::new(Metric::uniform(3), 2).unwrap();
        let c0 = idx(&s, &[0, 1]);
        let mut w = WorkFunctionAlgorithm::new(&s, c0);
        assert_eq!(w.step(&s, 0), int(0));
        assert_eq!(w.current(), c0);

        let mut w = WorkFunctionAlgorithm::new(&s, c0);
        assert_eq!(w.step(&s, 2), int(1));
        assert_eq!(*w.work_function().value(idx(&s, &[0, 2])), int(1));
        assert_eq!(*w.work_function().value(idx(&s, &[1, 2])), int(1));
        assert_eq!(w.current(), idx(&s, &[0, 2]));
    }

    #[test]
    fn resetting_schedule() {
        // greedy on the uniform triangle from {0,1}: costs 1, 0, 1, 1
        let s = ConfigSpace::new(Metric::uniform(3), 2).unwrap();
        let c0 = idx(&s, &[0, 1]);
        let mut alg = wrap_resetting(Greedy::default(), 2);
        let out = simulate(&mut alg, &s, c0, &[2, 2, 0, 1]);
        assert_eq!(out.costs, vec![int(1), int(0), int(1), int(1)]);
        assert_eq!(alg.reset_steps(), &[3]);

        let out = simulate(&mut alg, &s, c0, &[0, 1, 0, 1]);
        assert_eq!(out.total, int(0));
        assert!(alg.reset_steps().is_empty());

        let mut alg = wrap_resetting(Greedy::default(), 1);
        simulate(&mut alg, &s, c0, &[2, 2, 0, 1]);
        assert_eq!(alg.reset_steps(), &[1, 3, 4]);
    }

    #[test]
    fn wfa_reset_forgets_history() {
        let s = ConfigSpace::new(Metric::uniform(3), 2).unwrap();
        let c0 = idx(&s, &[0, 1]);
        let mut alg = wrap_resetting(WorkFunctionAlgorithm::new(&s, c0), 1);
        simulate(&mut alg, &s, c0, &[2]);
        let fresh = WorkFunctionAlgorithm::new(&s, alg.current());
        assert_eq!(alg.inner().work_function(), fresh.work_function());
    }

    #[test]
    fn simulate_examples() {
        let s = ConfigSpace::new(Metric::uniform(3), 2).unwrap();
        let c0 = idx(&s, &[0, 1]);
        let out = simulate(&mut Greedy::default(), &s, c0, &[]);
        assert_eq!(out.total, int(0));
        // the lowest-index server leaves 0 uncovered, so the second request pays too
        let out = simulate(&mut Greedy::default(), &s, c0, &[2, 0]);
        assert_eq!(out.costs, vec![int(1), int(1)]);
        assert_eq!(out.total, s.seq_dist(c0, &out.answers));
        assert!(out.total >= opt_cost(&s, c0, &[2, 0]));
    }

    #[test]
    fn bounds_example() {
        let b = compute_bounds(&Metric::uniform(3), 2, &int(3), &int(0), &int(1)).unwrap();
        assert_eq!(b.b, int(2));
        assert_eq!(b.opt_threshold, int(4));
        assert_eq!(b.phi, int(12));
        assert_eq!(b.d, BigInt::from(48));
        assert_eq!(b.xi, vec![int(50)]);
        assert_eq!(b.xi_at(3), int(2500));

        assert_eq!(
            compute_bounds(&Metric::uniform(3), 2, &int(3), &int(0), &int(0)),
            Err(BoundsError::NonPositiveEpsilon)
        );
    }

    #[test]
    fn bounds_use_normalized_metric() {
        let half = Metric::uniform(3).scaled(&crate::rational::frac(1, 2));
        let b = compute_bounds(&half, 2, &int(3), &int(0), &int(1)).unwrap();
        assert_eq!(b.gamma, int(2));
        assert_eq!(b.b, int(2));
        assert_eq!(b.d, BigInt::from(48));
    }

    #[test]
    fn bounds_ceil_fractional_d() {
        // B = 2, threshold = 2B/(3/2) = 8/3, phi = 8/3, D = ceil(64/9) = 8
        let b = compute_bounds(&Metric::uniform(3), 2, &int(1), &int(0), &crate::rational::frac(3, 2))
            .unwrap();
        assert_eq!(b.d, BigInt::from(8));
    }
}

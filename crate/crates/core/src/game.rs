//! Optimal deterministic strict competitive ratio over a finite horizon.
//!
//! The online algorithm and an adaptive adversary play a zero-sum game: the
//! adversary issues requests (or stops), the algorithm answers with any
//! covering configuration, and the payoff is `alg_cost / opt` at the stopping
//! point. The pair (algorithm configuration, work function, algorithm cost)
//! determines every future payoff, so subgames are memoized on it.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::algorithms::OnlineAlgorithm;
use crate::metric::ConfigSpace;
use crate::offline::WorkFunction;
use crate::par::{self, Execution};
use crate::rational::{ExtRatio, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GameError {
    #[error("k equals n: every request is free and the ratio is degenerate (reported as 1)")]
    DegenerateKEqualsN,
    #[error("tolerance must be positive")]
    NonPositiveTolerance,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GameNode {
    pub alg_config: usize,
    pub wf: WorkFunction,
    pub alg_cost: Rational,
}

impl GameNode {
    pub fn root(space: &ConfigSpace, c0: usize) -> Self {
        GameNode { alg_config: c0, wf: WorkFunction::init(space, c0), alg_cost: Rational::zero() }
    }

    pub fn depth(&self) -> usize {
        self.wf.prefix_len()
    }

    pub fn ratio(&self) -> ExtRatio {
        ExtRatio::of(&self.alg_cost, self.wf.min_value())
    }

    pub fn child(&self, space: &ConfigSpace, wf: &WorkFunction, answer: usize) -> GameNode {
        GameNode {
            alg_config: answer,
            wf: wf.clone(),
            alg_cost: &self.alg_cost + space.dist(self.alg_config, answer),
        }
    }
}

/// A deterministic strategy given as the answer to every request prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetStrategy {
    pub c0: usize,
    pub horizon: usize,
    pub answers: BTreeMap<Vec<usize>, usize>,
}

impl DetStrategy {
    pub fn answer(&self, prefix: &[usize]) -> Option<usize> {
        self.answers.get(prefix).copied()
    }
}

/// Runs a [`DetStrategy`] as an online algorithm. Prefixes past the horizon
/// fall back to serving from the cheapest server.
#[derive(Debug, Clone)]
pub struct StrategyPlayer {
    strategy: Arc<DetStrategy>,
    prefix: Vec<usize>,
    current: usize,
}

impl StrategyPlayer {
    pub fn new(strategy: DetStrategy) -> Self {
        let current = strategy.c0;
        StrategyPlayer { strategy: Arc::new(strategy), prefix: Vec::new(), current }
    }
}

impl OnlineAlgorithm for StrategyPlayer {
    fn name(&self) -> String {
        "strategy".into()
    }

    fn reset(&mut self, _space: &ConfigSpace, config: usize) {
        self.prefix.clear();
        self.current = config;
    }

    fn current(&self) -> usize {
        self.current
    }

    fn serve(&mut self, space: &ConfigSpace, r: usize) -> usize {
        self.prefix.push(r);
        self.current = match self.strategy.answer(&self.prefix) {
            Some(c) => c,
            None => {
                let mut g = crate::algorithms::Greedy::new(space, self.current);
                g.serve(space, r)
            }
        };
        self.current
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioResult {
    pub value: Rational,
    pub witness_strategy: DetStrategy,
    pub witness_adversary: Vec<usize>,
}

/// Exact game solver for one (space, c0, horizon).
pub struct Game<'a> {
    space: &'a ConfigSpace,
    c0: usize,
    horizon: usize,
    values: HashMap<GameNode, ExtRatio>,
}

impl<'a> Game<'a> {
    pub fn new(space: &'a ConfigSpace, c0: usize, horizon: usize) -> Self {
        Game { space, c0, horizon, values: HashMap::new() }
    }

    /// Worst ratio the adversary can force from `node` against best play.
    pub fn value(&mut self, node: &GameNode) -> ExtRatio {
        if let Some(v) = self.values.get(node) {
            return v.clone();
        }
        let mut best = node.ratio();
        if node.depth() < self.horizon && !best.is_infinite() {
            for r in 0..self.space.n() {
                let (_, v) = self.best_answer(node, r);
                if v > best {
                    best = v;
                    if best.is_infinite() {
                        break;
                    }
                }
            }
        }
        self.values.insert(node.clone(), best.clone());
        best
    }

    /// Answer to `r` minimizing the subgame value; lowest index on ties.
    pub fn best_answer(&mut self, node: &GameNode, r: usize) -> (usize, ExtRatio) {
        let wf = node.wf.update(self.space, r);
        let mut best: Option<(usize, ExtRatio)> = None;
        for &c in self.space.covering(r) {
            let v = self.value(&node.child(self.space, &wf, c));
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((c, v));
            }
        }
        best.expect("covering set non-empty")
    }

    pub fn root_value(&mut self) -> ExtRatio {
        let root = GameNode::root(self.space, self.c0);
        self.value(&root)
    }

    /// Optimal answers at every request prefix up to the horizon.
    pub fn optimal_strategy(&mut self) -> DetStrategy {
        let mut answers = BTreeMap::new();
        let mut stack = vec![(Vec::new(), GameNode::root(self.space, self.c0))];
        while let Some((prefix, node)) = stack.pop() {
            if node.depth() == self.horizon {
                continue;
            }
            for r in 0..self.space.n() {
                let (c, _) = self.best_answer(&node, r);
                let wf = node.wf.update(self.space, r);
                let mut p = prefix.clone();
                p.push(r);
                answers.insert(p.clone(), c);
                stack.push((p, node.child(self.space, &wf, c)));
            }
        }
        DetStrategy { c0: self.c0, horizon: self.horizon, answers }
    }

    /// A request sequence on which optimal play attains the game value.
    /// Stops as soon as continuing cannot raise the ratio.
    pub fn worst_sequence(&mut self) -> Vec<usize> {
        let mut node = GameNode::root(self.space, self.c0);
        let target = self.value(&node);
        let mut seq = Vec::new();
        while node.ratio() < target {
            let mut next = None;
            for r in 0..self.space.n() {
                let (c, v) = self.best_answer(&node, r);
                if v == target {
                    next = Some((r, c));
                    break;
                }
            }
            let (r, c) = next.expect("value is attained by some request");
            let wf = node.wf.update(self.space, r);
            node = node.child(self.space, &wf, c);
            seq.push(r);
        }
        seq
    }
}

/// Is there a deterministic strategy with `alg_cost <= c * opt` on every
/// sequence of length at most `horizon`? Returns such a strategy if so.
pub fn feasible_det(
    space: &ConfigSpace,
    c0: usize,
    horizon: usize,
    c: &Rational,
) -> Option<DetStrategy> {
    struct Search<'a> {
        space: &'a ConfigSpace,
        horizon: usize,
        c: &'a Rational,
        memo: HashMap<GameNode, bool>,
    }

    impl Search<'_> {
        fn ok(&mut self, node: &GameNode) -> bool {
            if let Some(&v) = self.memo.get(node) {
                return v;
            }
            let mut v = node.alg_cost <= self.c * node.wf.min_value();
            if v && node.depth() < self.horizon {
                v = (0..self.space.n()).all(|r| self.answer(node, r).is_some());
            }
            self.memo.insert(node.clone(), v);
            v
        }

        fn answer(&mut self, node: &GameNode, r: usize) -> Option<(usize, GameNode)> {
            let wf = node.wf.update(self.space, r);
            self.space.covering(r).iter().find_map(|&c| {
                let child = node.child(self.space, &wf, c);
                self.ok(&child).then_some((c, child))
            })
        }
    }

    let mut search = Search { space, horizon, c, memo: HashMap::new() };
    let root = GameNode::root(space, c0);
    if !search.ok(&root) {
        return None;
    }
    let mut answers = BTreeMap::new();
    let mut stack = vec![(Vec::new(), root)];
    while let Some((prefix, node)) = stack.pop() {
        if node.depth() == horizon {
            continue;
        }
        for r in 0..space.n() {
            let (c, child) = search.answer(&node, r).expect("feasible node has feasible answers");
            let mut p = prefix.clone();
            p.push(r);
            answers.insert(p.clone(), c);
            stack.push((p, child));
        }
    }
    Some(DetStrategy { c0, horizon, answers })
}

/// Exact optimal deterministic strict ratio at `horizon`, with witnesses.
pub fn opt_det_ratio(
    space: &ConfigSpace,
    c0: usize,
    horizon: usize,
) -> Result<RatioResult, GameError> {
    if space.k() >= space.n() {
        return Err(GameError::DegenerateKEqualsN);
    }
    let mut game = Game::new(space, c0, horizon);
    let value = match game.root_value() {
        ExtRatio::Finite(v) => v,
        // k < n on a metric: some covering answer always keeps cost <= opt-bounded
        ExtRatio::Infinite => unreachable!("a lazy strategy has finite ratio"),
    };
    let witness_strategy = game.optimal_strategy();
    let witness_adversary = game.worst_sequence();
    Ok(RatioResult { value, witness_strategy, witness_adversary })
}

/// Binary search on `c` over `[1, horizon * B]` using [`feasible_det`].
/// Returns `(low, high)` with `high` feasible, `high - low <= tolerance`,
/// and `low` infeasible unless `low = 1` is itself feasible.
pub fn det_ratio_bracket(
    space: &ConfigSpace,
    c0: usize,
    horizon: usize,
    tolerance: &Rational,
) -> Result<(Rational, Rational), GameError> {
    if space.k() >= space.n() {
        return Err(GameError::DegenerateKEqualsN);
    }
    if *tolerance <= Rational::zero() {
        return Err(GameError::NonPositiveTolerance);
    }
    let one = Rational::one();
    if feasible_det(space, c0, horizon, &one).is_some() {
        return Ok((one.clone(), one));
    }
    let mut lo = one;
    let mut hi = upper_ratio_bound(space, horizon);
    let two = Rational::from_integer(2.into());
    while &hi - &lo > *tolerance {
        let mid = (&lo + &hi) / &two;
        if feasible_det(space, c0, horizon, &mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

/// `max(1, horizon * B)`, a ratio no optimal strategy exceeds when opt >= min distance.
pub fn upper_ratio_bound(space: &ConfigSpace, horizon: usize) -> Rational {
    // ratios are scale free; evaluate B on the normalized metric
    let b = space.transition_bound() * space.metric().gamma();
    let hi = b * Rational::from_integer(horizon.into());
    hi.max(Rational::one())
}

/// Exhaustive worst request sequence (length <= horizon) for `alg`.
///
/// Ties keep the earliest sequence in prefix order (shorter first, then
/// lexicographic by first differing request).
pub fn worst_adversary<A: OnlineAlgorithm>(
    space: &ConfigSpace,
    c0: usize,
    alg: &A,
    horizon: usize,
) -> (Vec<usize>, ExtRatio) {
    worst_adversary_with(space, c0, alg, horizon, Execution::default())
}

pub fn worst_adversary_with<A: OnlineAlgorithm>(
    space: &ConfigSpace,
    c0: usize,
    alg: &A,
    horizon: usize,
    exec: Execution,
) -> (Vec<usize>, ExtRatio) {
    fn dfs<A: OnlineAlgorithm>(
        space: &ConfigSpace,
        alg: &A,
        wf: &WorkFunction,
        cost: &Rational,
        seq: &mut Vec<usize>,
        horizon: usize,
        best: &mut (Vec<usize>, ExtRatio),
    ) {
        if seq.len() == horizon {
            return;
        }
        for r in 0..space.n() {
            let mut next = alg.clone();
            let step = next.step(space, r);
            let cost = cost + step;
            let wf = wf.update(space, r);
            seq.push(r);
            let ratio = ExtRatio::of(&cost, wf.min_value());
            if ratio > best.1 {
                *best = (seq.clone(), ratio);
            }
            dfs(space, &next, &wf, &cost, seq, horizon, best);
            seq.pop();
        }
    }

    let mut root = alg.clone();
    root.reset(space, c0);
    let wf0 = WorkFunction::init(space, c0);
    let mut best = (Vec::new(), ExtRatio::one());
    if horizon == 0 {
        return best;
    }
    let per_first = par::map_range(exec, space.n(), |r| {
        let mut next = root.clone();
        let cost = next.step(space, r);
        let wf = wf0.update(space, r);
        let mut local = (vec![r], ExtRatio::of(&cost, wf.min_value()));
        let mut seq = vec![r];
        dfs(space, &next, &wf, &cost, &mut seq, horizon, &mut local);
        local
    });
    for cand in per_first {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

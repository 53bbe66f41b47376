//! Randomized strict competitiveness as an exact linear program.
//!
//! Variables `x(ρ_t, σ_t)` give the probability that the algorithm answered
//! `σ_t` when the adversary has requested `ρ_t`, for `1 <= t <= T`. Four row
//! families make them a consistent, non-anticipating randomized strategy
//! whose expected cost on every length-`T` sequence is at most `τ · opt`:
//!
//! * `P/ρ`: probabilities for each `ρ_t` sum to one,
//! * `C/ρ/σ`: mass on `(ρ_{t-1}, σ_{t-1})` splits over the answers to `r_t`,
//! * `K/ρ/σ`: `Σ_{σ'} x(ρ_T, σ') · dist(σ') <= τ · dist(σ)` for every answer
//!   sequence `σ` to `ρ_T`,
//! * non-negativity (implicit in the solver).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};

use crate::game::upper_ratio_bound;
use crate::metric::ConfigSpace;
use crate::offline::opt_cost;
use crate::par::{self, Execution};
use crate::rational::{format_rational, ExtRatio, Rational};
use crate::simplex::{find_feasible_point, LinearRow, Sense};

pub const DEFAULT_VAR_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("LP needs {required} variables but the cap is {allowed}")]
    InstanceTooLarge { required: u128, allowed: usize },
    #[error("k equals n: every request is free and the ratio is degenerate (reported as 1)")]
    DegenerateKEqualsN,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("tolerance must be positive")]
    NonPositiveTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowFamily {
    Probability,
    Consistency,
    Competitiveness,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedRow {
    pub name: String,
    pub family: RowFamily,
    pub row: LinearRow,
}

/// `(request prefix, answer prefix)` as point and configuration indices.
pub type History = (Vec<usize>, Vec<usize>);

#[derive(Debug, Clone)]
pub struct LpInstance {
    pub tau: Rational,
    pub horizon: usize,
    pub c0: usize,
    pub n: usize,
    pub k: usize,
    vars: Vec<History>,
    index: HashMap<History, usize>,
    rows: Vec<NamedRow>,
    /// `dist(σ_T)` for each competitiveness row, parallel to `rows`.
    row_scale: Vec<Option<Rational>>,
}

/// `Σ_{t=1}^{T} (n · C(n-1, k-1))^t`.
pub fn variable_count(n: usize, k: usize, horizon: usize) -> Option<u128> {
    let cover = binomial(n as u128 - 1, k as u128 - 1)?;
    let per_step = (n as u128).checked_mul(cover)?;
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..horizon {
        level = level.checked_mul(per_step)?;
        total = total.checked_add(level)?;
    }
    Some(total)
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

fn key_str(items: &[usize]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
}

fn all_sequences(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |r| {
                    let mut q = p.clone();
                    q.push(r);
                    q
                })
            })
            .collect();
    }
    out
}

/// All request sequences of length exactly `len`, lexicographic.
pub fn request_sequences(n: usize, len: usize) -> Vec<Vec<usize>> {
    all_sequences(n, len)
}

/// Answer sequences feasible for `requests`, lexicographic by configuration index.
pub fn answer_sequences(space: &ConfigSpace, requests: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &r in requests {
        out = out
            .into_iter()
            .flat_map(|p| {
                space.covering(r).iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

impl LpInstance {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[History] {
        &self.vars
    }

    pub fn var_index(&self, requests: &[usize], answers: &[usize]) -> Option<usize> {
        self.index.get(&(requests.to_vec(), answers.to_vec())).copied()
    }

    pub fn rows(&self) -> &[NamedRow] {
        &self.rows
    }

    pub fn count(&self, family: RowFamily) -> usize {
        self.rows.iter().filter(|r| r.family == family).count()
    }

    /// Same instance with a different threshold.
    pub fn with_tau(&self, tau: &Rational) -> LpInstance {
        let mut out = self.clone();
        out.tau = tau.clone();
        for (row, scale) in out.rows.iter_mut().zip(&out.row_scale) {
            if let Some(d) = scale {
                row.row.rhs = tau * d;
            }
        }
        out
    }

    /// CPLEX-style LP text. Coefficients are written as exact `p/q`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\\ k-server randomized competitiveness LP");
        let _ = writeln!(
            s,
            "\\ n = {}, k = {}, T = {}, C0 = {}, tau = {}",
            self.n,
            self.k,
            self.horizon,
            self.c0,
            format_rational(&self.tau)
        );
        let _ = writeln!(s, "\\ variables x<i>: (requests | answer configuration indices)");
        for (i, (rho, sigma)) in self.vars.iter().enumerate() {
            let _ = writeln!(s, "\\ x{i} = ({} | {})", key_str(rho), key_str(sigma));
        }
        s.push_str("Minimize\n obj: 0 x0\nSubject To\n");
        for r in &self.rows {
            let _ = write!(s, " {}:", r.name);
            for (idx, (j, a)) in r.row.coeffs.iter().enumerate() {
                let mag = format_rational(&a.abs());
                match (idx, a.is_negative()) {
                    (_, true) => write!(s, " - {mag} x{j}"),
                    (0, false) => write!(s, " {mag} x{j}"),
                    (_, false) => write!(s, " + {mag} x{j}"),
                }
                .expect("write to String");
            }
            let op = match r.row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
            };
            let _ = writeln!(s, " {op} {}", format_rational(&r.row.rhs));
        }
        s.push_str("Bounds\n");
        for j in 0..self.vars.len() {
            let _ = writeln!(s, " x{j} >= 0");
        }
        s.push_str("End\n");
        s
    }
}

pub fn build_lp(
    space: &ConfigSpace,
    c0: usize,
    horizon: usize,
    tau: &Rational,
    var_cap: usize,
) -> Result<LpInstance, LpError> {
    build_lp_with(space, c0, horizon, tau, var_cap, Execution::default())
}

pub fn build_lp_with(
    space: &ConfigSpace,
    c0: usize,
    horizon: usize,
    tau: &Rational,
    var_cap: usize,
    exec: Execution,
) -> Result<LpInstance, LpError> {
    let (n, k) = (space.n(), space.k());
    if k >= n {
        return Err(LpError::DegenerateKEqualsN);
    }
    if horizon == 0 {
        return Err(LpError::ZeroHorizon);
    }
    let required = variable_count(n, k, horizon).unwrap_or(u128::MAX);
    if required > var_cap as u128 {
        return Err(LpError::InstanceTooLarge { required, allowed: var_cap });
    }

    // variables ordered by t, then ρ, then σ
    let mut vars = Vec::with_capacity(required as usize);
    let mut blocks: Vec<Vec<(Vec<usize>, std::ops::Range<usize>)>> = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let mut level = Vec::new();
        for rho in all_sequences(n, t) {
            let start = vars.len();
            for sigma in answer_sequences(space, &rho) {
                vars.push((rho.clone(), sigma));
            }
            level.push((rho, start..vars.len()));
        }
        blocks.push(level);
    }
    let index: HashMap<History, usize> = vars.iter().cloned().enumerate().map(|(i, h)| (h, i)).collect();

    let mut rows = Vec::new();
    let mut row_scale = Vec::new();

    for level in &blocks {
        for (rho, range) in level {
            rows.push(NamedRow {
                name: format!("P/{}", key_str(rho)),
                family: RowFamily::Probability,
                row: LinearRow {
                    coeffs: range.clone().map(|j| (j, Rational::one())).collect(),
                    sense: Sense::Eq,
                    rhs: Rational::one(),
                },
            });
            row_scale.push(None);
        }
    }

    for t in 2..=horizon {
        for (rho, range) in &blocks[t - 1] {
            let parent_rho = &rho[..t - 1];
            let r = rho[t - 1];
            for sigma_prev in answer_sequences(space, parent_rho) {
                let parent = index[&(parent_rho.to_vec(), sigma_prev.clone())];
                let mut coeffs = vec![(parent, -Rational::one())];
                for &c in space.covering(r) {
                    let mut sigma = sigma_prev.clone();
                    sigma.push(c);
                    let j = index[&(rho.clone(), sigma)];
                    debug_assert!(range.contains(&j));
                    coeffs.push((j, Rational::one()));
                }
                rows.push(NamedRow {
                    name: format!("C/{}/{}", key_str(rho), key_str(&sigma_prev)),
                    family: RowFamily::Consistency,
                    row: LinearRow { coeffs, sense: Sense::Eq, rhs: Rational::zero() },
                });
                row_scale.push(None);
            }
        }
    }

    let last = &blocks[horizon - 1];
    let comp_rows = par::map(exec, last, |(rho, range)| {
        let costs: Vec<Rational> = range.clone().map(|j| space.seq_dist(c0, &vars[j].1)).collect();
        let coeffs: Vec<(usize, Rational)> = range
            .clone()
            .zip(&costs)
            .filter(|(_, d)| !d.is_zero())
            .map(|(j, d)| (j, d.clone()))
            .collect();
        range
            .clone()
            .zip(&costs)
            .map(|(j, d)| {
                let row = NamedRow {
                    name: format!("K/{}/{}", key_str(rho), key_str(&vars[j].1)),
                    family: RowFamily::Competitiveness,
                    row: LinearRow { coeffs: coeffs.clone(), sense: Sense::Le, rhs: tau * d },
                };
                (row, Some(d.clone()))
            })
            .collect::<Vec<_>>()
    });
    for (row, scale) in comp_rows.into_iter().flatten() {
        rows.push(row);
        row_scale.push(scale);
    }

    Ok(LpInstance { tau: tau.clone(), horizon, c0, n, k, vars, index, rows, row_scale })
}

/// Exact feasibility; returns a point satisfying every row.
pub fn lp_feasible(instance: &LpInstance) -> Option<Vec<Rational>> {
    let rows: Vec<LinearRow> = instance.rows.iter().map(|r| r.row.clone()).collect();
    find_feasible_point(instance.num_vars(), &rows)
}

/// Conditional answer distributions keyed by `(ρ_t, σ_{t-1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomizedPolicy {
    pub c0: usize,
    pub horizon: usize,
    pub conditionals: BTreeMap<History, Vec<(usize, Rational)>>,
}

impl RandomizedPolicy {
    pub fn distribution(&self, requests: &[usize], answers: &[usize]) -> Option<&[(usize, Rational)]> {
        self.conditionals.get(&(requests.to_vec(), answers.to_vec())).map(Vec::as_slice)
    }

    /// Every distribution is non-negative, sums to exactly 1 and only uses
    /// configurations covering the current request.
    pub fn is_well_formed(&self, space: &ConfigSpace) -> bool {
        self.conditionals.iter().all(|((rho, _), dist)| {
            let r = *rho.last().expect("non-empty request prefix");
            dist.iter().all(|(c, p)| *p >= Rational::zero() && space.config(*c).covers(r))
                && dist.iter().map(|(_, p)| p).sum::<Rational>() == Rational::one()
        })
    }

    /// Deterministic policy: each history maps to a single configuration.
    pub fn point_mass(c0: usize, horizon: usize, answers: BTreeMap<History, usize>) -> Self {
        let conditionals = answers.into_iter().map(|(h, c)| (h, vec![(c, Rational::one())])).collect();
        RandomizedPolicy { c0, horizon, conditionals }
    }
}

/// `x'(ρ_t, σ_{t-1}C) = x(ρ_t, σ_{t-1}C) / Σ_{C ∋ r_t} x(ρ_t, σ_{t-1}C)`;
/// histories with zero mass get the uniform distribution.
pub fn extract_policy(space: &ConfigSpace, instance: &LpInstance, point: &[Rational]) -> RandomizedPolicy {
    let mut conditionals = BTreeMap::new();
    for t in 1..=instance.horizon {
        for rho in all_sequences(instance.n, t) {
            let r = rho[t - 1];
            for sigma_prev in answer_sequences(space, &rho[..t - 1]) {
                let cover = space.covering(r);
                let masses: Vec<Rational> = cover
                    .iter()
                    .map(|&c| {
                        let mut sigma = sigma_prev.clone();
                        sigma.push(c);
                        point[instance.index[&(rho.clone(), sigma)]].clone()
                    })
                    .collect();
                let total: Rational = masses.iter().sum();
                let dist = if total.is_zero() {
                    let p = Rational::new(1.into(), cover.len().into());
                    cover.iter().map(|&c| (c, p.clone())).collect()
                } else {
                    cover.iter().zip(masses).map(|(&c, m)| (c, m / &total)).collect()
                };
                conditionals.insert((rho.clone(), sigma_prev), dist);
            }
        }
    }
    RandomizedPolicy { c0: instance.c0, horizon: instance.horizon, conditionals }
}

/// Exact expected movement cost of `policy` on `requests` (full tree enumeration).
pub fn expected_cost(policy: &RandomizedPolicy, space: &ConfigSpace, requests: &[usize]) -> Rational {
    expected_step_costs(policy, space, requests).into_iter().sum()
}

/// Expected cost contributed by each request.
pub fn expected_step_costs(policy: &RandomizedPolicy, space: &ConfigSpace, requests: &[usize]) -> Vec<Rational> {
    assert!(requests.len() <= policy.horizon, "sequence longer than the policy horizon");
    fn go(
        policy: &RandomizedPolicy,
        space: &ConfigSpace,
        requests: &[usize],
        answers: &mut Vec<usize>,
        prev: usize,
        prob: &Rational,
        out: &mut [Rational],
    ) {
        let t = answers.len();
        if t == requests.len() {
            return;
        }
        let dist = policy
            .distribution(&requests[..=t], answers)
            .expect("policy defines every history up to its horizon");
        for (c, p) in dist {
            if p.is_zero() {
                continue;
            }
            let q = prob * p;
            out[t] += &q * space.dist(prev, *c);
            answers.push(*c);
            go(policy, space, requests, answers, *c, &q, out);
            answers.pop();
        }
    }
    let mut out = vec![Rational::zero(); requests.len()];
    go(policy, space, requests, &mut Vec::new(), policy.c0, &Rational::one(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyCheck {
    pub worst_sequence: Vec<usize>,
    pub worst_ratio: ExtRatio,
    pub sequences_checked: usize,
}

/// Largest `expected_cost / opt_cost` over all `n^T` full-length sequences.
pub fn verify_policy(policy: &RandomizedPolicy, space: &ConfigSpace, exec: Execution) -> PolicyCheck {
    let seqs = all_sequences(space.n(), policy.horizon);
    let ratios = par::map(exec, &seqs, |rho| {
        ExtRatio::of(&expected_cost(policy, space, rho), &opt_cost(space, policy.c0, rho))
    });
    let mut best = 0;
    for (i, r) in ratios.iter().enumerate() {
        if *r > ratios[best] {
            best = i;
        }
    }
    PolicyCheck {
        worst_sequence: seqs[best].clone(),
        worst_ratio: ratios[best].clone(),
        sequences_checked: seqs.len(),
    }
}

#[derive(Debug, Clone)]
pub struct RandBracket {
    pub tau_low: Rational,
    pub tau_high: Rational,
    pub policy: RandomizedPolicy,
    pub probes: usize,
}

/// Bisection on τ over `[1, T·B]` with exact feasibility probes.
pub fn opt_rand_ratio(
    space: &ConfigSpace,
    c0: usize,
    horizon: usize,
    tolerance: &Rational,
    var_cap: usize,
) -> Result<RandBracket, LpError> {
    if *tolerance <= Rational::zero() {
        return Err(LpError::NonPositiveTolerance);
    }
    let one = Rational::one();
    let base = build_lp(space, c0, horizon, &one, var_cap)?;
    let mut probes = 1;
    if let Some(x) = lp_feasible(&base) {
        let policy = extract_policy(space, &base, &x);
        return Ok(RandBracket { tau_low: one.clone(), tau_high: one, policy, probes });
    }
    let mut lo = one;
    let mut hi = upper_ratio_bound(space, horizon);
    let mut hi_point = {
        probes += 1;
        let inst = base.with_tau(&hi);
        let x = lp_feasible(&inst).expect("any deterministic strategy is feasible at T·B");
        (inst, x)
    };
    let two = Rational::from_integer(2.into());
    while &hi - &lo > *tolerance {
        let mid = (&lo + &hi) / &two;
        let inst = base.with_tau(&mid);
        probes += 1;
        match lp_feasible(&inst) {
            Some(x) => {
                hi = mid;
                hi_point = (inst, x);
            }
            None => lo = mid,
        }
    }
    let policy = extract_policy(space, &hi_point.0, &hi_point.1);
    Ok(RandBracket { tau_low: lo, tau_high: hi, policy, probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{Configuration, Metric};
    use crate::rational::{frac, int};

    fn uniform3() -> (ConfigSpace, usize) {
        let s = ConfigSpace::new(Metric::uniform(3), 2).unwrap();
        let c0 = s.index_of(&Configuration::new(vec![0, 1])).unwrap();
        (s, c0)
    }

    #[test]
    fn sizes() {
        let (s, c0) = uniform3();
        let one = build_lp(&s, c0, 1, &int(2), DEFAULT_VAR_CAP).unwrap();
        assert_eq!(one.num_vars(), 6);
        assert_eq!(one.count(RowFamily::Competitiveness), 6);
        assert_eq!(one.count(RowFamily::Probability), 3);
        assert_eq!(one.count(RowFamily::Consistency), 0);
        let two = build_lp(&s, c0, 2, &int(2), DEFAULT_VAR_CAP).unwrap();
        assert_eq!(two.num_vars(), 42);
        assert_eq!(variable_count(3, 2, 2), Some(42));
        assert_eq!(two.count(RowFamily::Consistency), 9 * 2);
        assert!(matches!(
            build_lp(&s, c0, 2, &int(2), 10),
            Err(LpError::InstanceTooLarge { required: 42, allowed: 10 })
        ));
    }

    #[test]
    fn every_variable_in_one_probability_row() {
        let (s, c0) = uniform3();
        let inst = build_lp(&s, c0, 2, &int(2), DEFAULT_VAR_CAP).unwrap();
        let mut seen = vec![0; inst.num_vars()];
        for r in inst.rows().iter().filter(|r| r.family == RowFamily::Probability) {
            for (j, _) in &r.row.coeffs {
                seen[*j] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn feasibility_knife_edge() {
        let (s, c0) = uniform3();
        let inst = build_lp(&s, c0, 2, &frac(3, 2), DEFAULT_VAR_CAP).unwrap();
        assert!(lp_feasible(&inst).is_some());
        assert!(lp_feasible(&inst.with_tau(&(frac(3, 2) - frac(1, 1024)))).is_none());
        assert!(lp_feasible(&inst.with_tau(&int(4))).is_some());
    }

    #[test]
    fn half_half_policy_expected_cost() {
        let (s, c0) = uniform3();
        let c02 = s.index_of(&Configuration::new(vec![0, 2])).unwrap();
        let c12 = s.index_of(&Configuration::new(vec![1, 2])).unwrap();
        let inst = build_lp(&s, c0, 2, &frac(3, 2), DEFAULT_VAR_CAP).unwrap();
        // split the first uncovered request, then follow zero-cost answers
        let mut x = vec![Rational::zero(); inst.num_vars()];
        for r1 in 0..3 {
            let first: Vec<(usize, Rational)> = if r1 == 2 {
                vec![(c02, frac(1, 2)), (c12, frac(1, 2))]
            } else {
                vec![(c0, int(1))]
            };
            for (c1, p) in &first {
                x[inst.var_index(&[r1], &[*c1]).unwrap()] += p;
                for r2 in 0..3 {
                    let c2 = if s.config(*c1).covers(r2) {
                        *c1
                    } else {
                        s.index_of(&s.config(*c1).moved(s.config(*c1).points()[0], r2)).unwrap()
                    };
                    x[inst.var_index(&[r1, r2], &[*c1, c2]).unwrap()] += p;
                }
            }
        }
        assert!(inst.rows().iter().all(|r| r.row.holds(&x)));
        let policy = extract_policy(&s, &inst, &x);
        assert_eq!(policy.distribution(&[2], &[]).unwrap(), &[(c02, frac(1, 2)), (c12, frac(1, 2))]);
        assert!(policy.is_well_formed(&s));
        assert_eq!(expected_cost(&policy, &s, &[2, 0]), frac(3, 2));
    }

    #[test]
    fn zero_mass_histories_are_uniform() {
        let (s, c0) = uniform3();
        let inst = build_lp(&s, c0, 2, &int(4), DEFAULT_VAR_CAP).unwrap();
        let x = lp_feasible(&inst).unwrap();
        let policy = extract_policy(&s, &inst, &x);
        for ((rho, sigma), dist) in &policy.conditionals {
            if sigma.is_empty() {
                continue;
            }
            let mass = x[inst.var_index(&rho[..1], sigma).unwrap()].clone();
            if mass.is_zero() {
                assert!(dist.iter().all(|(_, p)| *p == frac(1, 2)));
            }
        }
    }

    #[test]
    fn bracket_on_uniform_triangle() {
        let (s, c0) = uniform3();
        let res = opt_rand_ratio(&s, c0, 2, &frac(1, 1024), DEFAULT_VAR_CAP).unwrap();
        assert!(res.tau_low < frac(3, 2) && frac(3, 2) <= res.tau_high);
        assert!(&res.tau_high - &res.tau_low <= frac(1, 1024));
        let check = verify_policy(&res.policy, &s, Execution::default());
        assert!(check.worst_ratio <= ExtRatio::Finite(res.tau_high.clone()));
    }

    #[test]
    fn dump_names_rows() {
        let (s, c0) = uniform3();
        let inst = build_lp(&s, c0, 1, &frac(3, 2), DEFAULT_VAR_CAP).unwrap();
        let text = inst.dump();
        assert!(text.contains("Subject To"));
        assert!(text.contains(" P/2: 1 x4 + 1 x5 = 1"));
        assert!(text.contains(" K/2/1: 1 x4 + 1 x5 <= 3/2"));
        assert!(text.trim_end().ends_with("End"));
    }
}

//! Finite metric spaces, server configurations and movement cost.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Deserialize;

use crate::rational::{parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("distance matrix is not square (row {row} has {len} entries, expected {n})")]
    NonSquare { row: usize, len: usize, n: usize },
    #[error("metric needs at least two points")]
    TooFewPoints,
    #[error("{names} point names given for a {n}x{n} distance matrix")]
    NameCountMismatch { names: usize, n: usize },
    #[error("duplicate point name {0:?}")]
    DuplicateName(String),
    #[error("d({i},{i}) must be 0")]
    NonZeroDiagonal { i: usize },
    #[error("negative distance d({i},{j})")]
    NegativeDistance { i: usize, j: usize },
    #[error("d({i},{j}) != d({j},{i})")]
    AsymmetricDistance { i: usize, j: usize },
    #[error("d({i},{j}) is zero for distinct points")]
    ZeroOffDiagonal { i: usize, j: usize },
    #[error("triangle inequality violated: d({i},{j}) > d({i},{l}) + d({l},{j})")]
    TriangleViolation { i: usize, l: usize, j: usize },
    #[error("k = {k} must satisfy 1 <= k <= n = {n}")]
    KExceedsN { k: usize, n: usize },
    #[error("invalid metric file: {0}")]
    Parse(String),
}

/// A validated finite metric with exact rational distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metric {
    names: Vec<String>,
    dist: Vec<Vec<Rational>>,
    gamma: Rational,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDistance {
    Int(i64),
    Text(String),
}

#[derive(Deserialize)]
struct RawMetric {
    points: Vec<String>,
    distances: Vec<Vec<RawDistance>>,
}

impl Metric {
    /// Validates a raw distance matrix. `gamma` is computed but not applied.
    pub fn new(names: Vec<String>, dist: Vec<Vec<Rational>>) -> Result<Self, MetricError> {
        let n = dist.len();
        if n < 2 {
            return Err(MetricError::TooFewPoints);
        }
        for (row, r) in dist.iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::NonSquare { row, len: r.len(), n });
            }
        }
        if names.len() != n {
            return Err(MetricError::NameCountMismatch { names: names.len(), n });
        }
        let mut seen = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if seen.insert(name.as_str(), i).is_some() {
                return Err(MetricError::DuplicateName(name.clone()));
            }
        }
        for i in 0..n {
            if !dist[i][i].is_zero() {
                return Err(MetricError::NonZeroDiagonal { i });
            }
            for j in 0..n {
                if dist[i][j].is_negative() {
                    return Err(MetricError::NegativeDistance { i, j });
                }
                if dist[i][j] != dist[j][i] {
                    return Err(MetricError::AsymmetricDistance { i: i.min(j), j: i.max(j) });
                }
                if i != j && dist[i][j].is_zero() {
                    return Err(MetricError::ZeroOffDiagonal { i: i.min(j), j: i.max(j) });
                }
            }
        }
        for i in 0..n {
            for l in 0..n {
                for j in 0..n {
                    if dist[i][j] > &dist[i][l] + &dist[l][j] {
                        return Err(MetricError::TriangleViolation { i, l, j });
                    }
                }
            }
        }
        let min = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| &dist[i][j])
            .min()
            .expect("n >= 2")
            .clone();
        let gamma = min.recip();
        Ok(Metric { names, dist, gamma })
    }

    /// Points named `p0, p1, ...`.
    pub fn from_matrix(dist: Vec<Vec<Rational>>) -> Result<Self, MetricError> {
        let names = (0..dist.len()).map(|i| format!("p{i}")).collect();
        Metric::new(names, dist)
    }

    /// Parses the JSON metric file format:
    /// `{"points": [...], "distances": [[...], ...]}` with entries given as
    /// integers or `"p/q"` strings.
    pub fn from_json(text: &str) -> Result<Self, MetricError> {
        let raw: RawMetric =
            serde_json::from_str(text).map_err(|e| MetricError::Parse(e.to_string()))?;
        let dist = raw
            .distances
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|d| match d {
                        RawDistance::Int(v) => Ok(crate::rational::int(v)),
                        RawDistance::Text(s) => {
                            parse_rational(&s).map_err(|e| MetricError::Parse(e.to_string()))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Metric::new(raw.points, dist)
    }

    /// All off-diagonal distances equal to one.
    pub fn uniform(n: usize) -> Self {
        let dist = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { Rational::zero() } else { Rational::one() })
                    .collect()
            })
            .collect();
        Metric::from_matrix(dist).expect("uniform metric is valid")
    }

    /// Points on a line at the given (distinct) coordinates.
    pub fn line(coords: &[Rational]) -> Result<Self, MetricError> {
        let dist = coords
            .iter()
            .map(|a| coords.iter().map(|b| (a - b).abs()).collect())
            .collect();
        Metric::from_matrix(dist)
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn d(&self, i: usize, j: usize) -> &Rational {
        &self.dist[i][j]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Normalization factor: reciprocal of the smallest pairwise distance.
    pub fn gamma(&self) -> &Rational {
        &self.gamma
    }

    pub fn max_distance(&self) -> Rational {
        self.dist.iter().flatten().max().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_normalized(&self) -> bool {
        self.gamma.is_one()
    }

    /// Scales every distance by `gamma`, so the minimum distance becomes 1.
    pub fn normalize(&self) -> Metric {
        self.scaled(&self.gamma)
    }

    /// Multiplies all distances by a positive rational.
    pub fn scaled(&self, factor: &Rational) -> Metric {
        assert!(factor.is_positive(), "scale factor must be positive");
        let dist = self
            .dist
            .iter()
            .map(|row| row.iter().map(|d| d * factor).collect())
            .collect();
        Metric { names: self.names.clone(), dist, gamma: &self.gamma / factor }
    }
}

/// A sorted k-subset of point indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(Vec<usize>);

impl Configuration {
    /// Sorts the points; panics on duplicates.
    pub fn new(mut points: Vec<usize>) -> Self {
        points.sort_unstable();
        assert!(points.windows(2).all(|w| w[0] != w[1]), "duplicate point in configuration");
        Configuration(points)
    }

    pub fn points(&self) -> &[usize] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn covers(&self, r: usize) -> bool {
        self.0.binary_search(&r).is_ok()
    }

    /// Replace the server at `from` with one at `to`.
    pub fn moved(&self, from: usize, to: usize) -> Configuration {
        let mut pts: Vec<usize> = self.0.iter().map(|&p| if p == from { to } else { p }).collect();
        pts.sort_unstable();
        Configuration(pts)
    }

    pub fn display<'a>(&'a self, metric: &'a Metric) -> ConfigDisplay<'a> {
        ConfigDisplay { config: self, metric }
    }
}

pub struct ConfigDisplay<'a> {
    config: &'a Configuration,
    metric: &'a Metric,
}

impl fmt::Display for ConfigDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> =
            self.config.0.iter().map(|&p| self.metric.names[p].as_str()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Minimum-cost perfect matching between the servers of `a` and `b`.
pub fn config_dist(metric: &Metric, a: &Configuration, b: &Configuration) -> Rational {
    assert_eq!(a.k(), b.k(), "configurations must have equal size");
    let k = a.k();
    let cost = |i: usize, j: usize| metric.d(a.0[i], b.0[j]);
    if k <= 6 {
        min_matching_permutations(k, cost)
    } else {
        min_matching_subsets(k, cost)
    }
}

fn min_matching_permutations<'a>(k: usize, cost: impl Fn(usize, usize) -> &'a Rational) -> Rational {
    fn go<'a>(
        i: usize,
        k: usize,
        used: &mut [bool],
        acc: Rational,
        best: &mut Option<Rational>,
        cost: &impl Fn(usize, usize) -> &'a Rational,
    ) {
        if i == k {
            if best.as_ref().is_none_or(|b| acc < *b) {
                *best = Some(acc);
            }
            return;
        }
        for j in 0..k {
            if !used[j] {
                used[j] = true;
                go(i + 1, k, used, &acc + cost(i, j), best, cost);
                used[j] = false;
            }
        }
    }
    let mut best = None;
    go(0, k, &mut vec![false; k], Rational::zero(), &mut best, &cost);
    best.unwrap_or_else(Rational::zero)
}

// Held–Karp style DP over subsets of `b`; exact for any k that fits in a u32 mask.
fn min_matching_subsets<'a>(k: usize, cost: impl Fn(usize, usize) -> &'a Rational) -> Rational {
    assert!(k < 32, "configuration too large for subset matching");
    let full = 1usize << k;
    let mut dp: Vec<Option<Rational>> = vec![None; full];
    dp[0] = Some(Rational::zero());
    for mask in 0..full {
        let Some(base) = dp[mask].clone() else { continue };
        let i = mask.count_ones() as usize;
        if i == k {
            continue;
        }
        for j in 0..k {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                let cand = &base + cost(i, j);
                if dp[next].as_ref().is_none_or(|v| cand < *v) {
                    dp[next] = Some(cand);
                }
            }
        }
    }
    dp[full - 1].take().expect("full mask reached")
}

/// Sum of consecutive configuration distances starting from `c0`.
pub fn seq_dist(metric: &Metric, c0: &Configuration, seq: &[Configuration]) -> Rational {
    let mut total = Rational::zero();
    let mut prev = c0;
    for c in seq {
        total += config_dist(metric, prev, c);
        prev = c;
    }
    total
}

/// All k-subsets of the metric's points, in lexicographic order.
pub fn all_configurations(metric: &Metric, k: usize) -> Result<Vec<Configuration>, MetricError> {
    let n = metric.n();
    if k == 0 || k > n {
        return Err(MetricError::KExceedsN { k, n });
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(Configuration(idx.clone()));
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if idx[i] < n - k + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Configurations containing `r`, in lexicographic order.
pub fn covering_configurations(
    metric: &Metric,
    k: usize,
    r: usize,
) -> Result<Vec<Configuration>, MetricError> {
    Ok(all_configurations(metric, k)?.into_iter().filter(|c| c.covers(r)).collect())
}

/// A metric together with every k-configuration and their pairwise distances.
///
/// Configurations are addressed by their index in lexicographic order.
#[derive(Debug, Clone)]
pub struct ConfigSpace {
    metric: Metric,
    k: usize,
    configs: Vec<Configuration>,
    index: HashMap<Configuration, usize>,
    dist: Vec<Rational>,
    covering: Vec<Vec<usize>>,
}

impl ConfigSpace {
    pub fn new(metric: Metric, k: usize) -> Result<Self, MetricError> {
        let configs = all_configurations(&metric, k)?;
        let m = configs.len();
        let index = configs.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        let mut dist = vec![Rational::zero(); m * m];
        for a in 0..m {
            for b in a + 1..m {
                let d = config_dist(&metric, &configs[a], &configs[b]);
                dist[a * m + b] = d.clone();
                dist[b * m + a] = d;
            }
        }
        let covering = (0..metric.n())
            .map(|r| (0..m).filter(|&c| configs[c].covers(r)).collect())
            .collect();
        Ok(ConfigSpace { metric, k, configs, index, dist, covering })
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.metric.n()
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn config(&self, idx: usize) -> &Configuration {
        &self.configs[idx]
    }

    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn dist(&self, a: usize, b: usize) -> &Rational {
        &self.dist[a * self.configs.len() + b]
    }

    /// Indices of configurations covering `r`, ascending.
    pub fn covering(&self, r: usize) -> &[usize] {
        &self.covering[r]
    }

    /// Configurations reachable from `from` by moving at most one server so
    /// that `r` is covered. `[from]` when `r` is already covered.
    pub fn lazy_moves(&self, from: usize, r: usize) -> Vec<usize> {
        let c = &self.configs[from];
        if c.covers(r) {
            return vec![from];
        }
        let mut out: Vec<usize> = c
            .points()
            .iter()
            .map(|&p| self.index[&c.moved(p, r)])
            .collect();
        out.sort_unstable();
        out
    }

    /// Sum of distances along a sequence of configuration indices.
    pub fn seq_dist(&self, c0: usize, seq: &[usize]) -> Rational {
        let mut total = Rational::zero();
        let mut prev = c0;
        for &c in seq {
            total += self.dist(prev, c);
            prev = c;
        }
        total
    }

    /// B: an upper bound on the cost of any reconfiguration.
    pub fn transition_bound(&self) -> Rational {
        self.metric.max_distance() * Rational::from_integer(self.k.into())
    }

    /// Parses a comma-separated list of point names into a configuration index.
    pub fn parse_config(&self, names: &[&str]) -> Result<usize, String> {
        let pts = names
            .iter()
            .map(|n| self.metric.index_of(n).ok_or_else(|| format!("unknown point {n:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        let mut sorted = pts.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.k || pts.len() != self.k {
            return Err(format!("configuration must name {} distinct points", self.k));
        }
        Ok(self.index[&Configuration(sorted)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn line013() -> Metric {
        Metric::line(&[int(0), int(1), int(3)]).unwrap()
    }

    fn cfg(p: &[usize]) -> Configuration {
        Configuration::new(p.to_vec())
    }

    #[test]
    fn validate_examples() {
        let m = Metric::uniform(3);
        assert_eq!(*m.gamma(), int(1));

        let bad = vec![
            vec![int(0), int(1), int(3)],
            vec![int(1), int(0), int(1)],
            vec![int(3), int(1), int(0)],
        ];
        assert!(matches!(Metric::from_matrix(bad), Err(MetricError::TriangleViolation { .. })));

        let half = vec![
            vec![int(0), frac(1, 2), frac(1, 2)],
            vec![frac(1, 2), int(0), frac(1, 2)],
            vec![frac(1, 2), frac(1, 2), int(0)],
        ];
        assert_eq!(*Metric::from_matrix(half).unwrap().gamma(), int(2));
    }

    #[test]
    fn validate_errors() {
        let asym = vec![vec![int(0), int(1)], vec![int(2), int(0)]];
        assert!(matches!(Metric::from_matrix(asym), Err(MetricError::AsymmetricDistance { .. })));
        let zero = vec![vec![int(0), int(0)], vec![int(0), int(0)]];
        assert!(matches!(Metric::from_matrix(zero), Err(MetricError::ZeroOffDiagonal { .. })));
        let ragged = vec![vec![int(0), int(1)], vec![int(1)]];
        assert!(matches!(Metric::from_matrix(ragged), Err(MetricError::NonSquare { .. })));
        let diag = vec![vec![int(1), int(1)], vec![int(1), int(0)]];
        assert!(matches!(Metric::from_matrix(diag), Err(MetricError::NonZeroDiagonal { .. })));
    }

    #[test]
    fn json_input() {
        let text = r#"{"points": ["a","b","c"], "distances": [["0","1/2",1],["1/2",0,"1/2"],[1,"1/2","0"]]}"#;
        let m = Metric::from_json(text).unwrap();
        assert_eq!(m.names(), ["a", "b", "c"]);
        assert_eq!(*m.d(0, 2), int(1));
        assert_eq!(*m.gamma(), int(2));
        assert!(matches!(Metric::from_json("{"), Err(MetricError::Parse(_))));
    }

    #[test]
    fn normalize_examples() {
        let m = Metric::from_matrix(vec![
            vec![int(0), frac(1, 2), int(1)],
            vec![frac(1, 2), int(0), frac(1, 2)],
            vec![int(1), frac(1, 2), int(0)],
        ])
        .unwrap()
        .normalize();
        assert_eq!((m.d(0, 1), m.d(1, 2), m.d(0, 2)), (&int(1), &int(1), &int(2)));
        assert!(m.is_normalized());

        let u = Metric::uniform(3);
        assert_eq!(u.normalize(), u);

        let m = Metric::from_matrix(vec![
            vec![int(0), int(3), int(4)],
            vec![int(3), int(0), int(5)],
            vec![int(4), int(5), int(0)],
        ])
        .unwrap()
        .normalize();
        assert_eq!((m.d(0, 1), m.d(0, 2), m.d(1, 2)), (&int(1), &frac(4, 3), &frac(5, 3)));
        assert_eq!(m.normalize(), m);
    }

    #[test]
    fn config_dist_examples() {
        let u = Metric::uniform(3);
        assert_eq!(config_dist(&u, &cfg(&[0, 1]), &cfg(&[0, 1])), int(0));
        assert_eq!(config_dist(&u, &cfg(&[0, 1]), &cfg(&[0, 2])), int(1));
        // min(1 + 0, 3 + 2) over the two matchings
        assert_eq!(config_dist(&line013(), &cfg(&[0, 2]), &cfg(&[1, 2])), int(1));
    }

    #[test]
    fn matching_routes_agree() {
        // 8 points on a line, k = 7 takes the subset-DP route
        let coords: Vec<Rational> = [0, 1, 3, 4, 8, 9, 15, 20].iter().map(|&v| int(v)).collect();
        let m = Metric::line(&coords).unwrap();
        let a = cfg(&[0, 1, 2, 3, 4, 5, 6]);
        let b = cfg(&[1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(config_dist(&m, &a, &b), int(20));
        let cost = |i: usize, j: usize| m.d(a.points()[i], b.points()[j]);
        assert_eq!(min_matching_permutations(7, cost), min_matching_subsets(7, cost));
    }

    #[test]
    fn seq_dist_examples() {
        let u = Metric::uniform(3);
        let c0 = cfg(&[0, 1]);
        assert_eq!(seq_dist(&u, &c0, &[]), int(0));
        assert_eq!(seq_dist(&u, &c0, std::slice::from_ref(&c0)), int(0));
        assert_eq!(seq_dist(&u, &c0, &[cfg(&[0, 2]), cfg(&[1, 2])]), int(2));
    }

    #[test]
    fn enumeration_examples() {
        let u3 = Metric::uniform(3);
        assert_eq!(all_configurations(&u3, 2).unwrap(), vec![cfg(&[0, 1]), cfg(&[0, 2]), cfg(&[1, 2])]);
        assert_eq!(all_configurations(&u3, 3).unwrap(), vec![cfg(&[0, 1, 2])]);
        assert_eq!(all_configurations(&Metric::uniform(4), 2).unwrap().len(), 6);
        assert!(matches!(all_configurations(&u3, 4), Err(MetricError::KExceedsN { .. })));
        assert!(matches!(all_configurations(&u3, 0), Err(MetricError::KExceedsN { .. })));

        assert_eq!(covering_configurations(&u3, 2, 0).unwrap(), vec![cfg(&[0, 1]), cfg(&[0, 2])]);
        assert_eq!(covering_configurations(&u3, 2, 2).unwrap(), vec![cfg(&[0, 2]), cfg(&[1, 2])]);
        for r in 0..3 {
            assert_eq!(covering_configurations(&u3, 3, r).unwrap(), vec![cfg(&[0, 1, 2])]);
        }
    }

    #[test]
    fn lexicographic_enumeration_matches_filter() {
        let m = Metric::uniform(6);
        for k in 1..=6 {
            let got = all_configurations(&m, k).unwrap();
            let mut want: Vec<Configuration> = (0u32..64)
                .filter(|mask| mask.count_ones() as usize == k)
                .map(|mask| cfg(&(0..6).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>()))
                .collect();
            want.sort();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn lazy_moves_cover() {
        let space = ConfigSpace::new(Metric::uniform(4), 2).unwrap();
        let c01 = space.index_of(&cfg(&[0, 1])).unwrap();
        assert_eq!(space.lazy_moves(c01, 0), vec![c01]);
        let moves: Vec<_> = space.lazy_moves(c01, 3).iter().map(|&i| space.config(i).clone()).collect();
        assert_eq!(moves, vec![cfg(&[0, 3]), cfg(&[1, 3])]);
    }
}

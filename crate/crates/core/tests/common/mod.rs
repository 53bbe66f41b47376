//! Brute-force oracles shared by the integration tests. Nothing here calls the
//! work-function DP, the game solver or the LP.

#![allow(dead_code)]

use kserver_lab::metric::{all_configurations, Configuration, Metric};
use kserver_lab::rational::{int, ExtRatio, Rational};
use num_traits::Zero;
use rand::rngs::StdRng;
use rand::Rng;

/// Minimum matching cost by trying every permutation.
pub fn matching_cost(metric: &Metric, a: &Configuration, b: &Configuration) -> Rational {
    fn perms(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }
    let (pa, pb) = (a.points(), b.points());
    perms(pa.len())
        .into_iter()
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| metric.d(pa[i], pb[j]).clone()).sum::<Rational>())
        .min()
        .unwrap()
}

pub fn path_cost(metric: &Metric, c0: &Configuration, answers: &[Configuration]) -> Rational {
    let mut prev = c0;
    let mut total = Rational::zero();
    for a in answers {
        total += matching_cost(metric, prev, a);
        prev = a;
    }
    total
}

/// Every feasible answer sequence for `requests`.
pub fn all_answer_sequences(metric: &Metric, k: usize, requests: &[usize]) -> Vec<Vec<Configuration>> {
    let configs = all_configurations(metric, k).unwrap();
    let mut out = vec![Vec::new()];
    for &r in requests {
        out = out
            .into_iter()
            .flat_map(|p: Vec<Configuration>| {
                configs.iter().filter(|c| c.covers(r)).map(move |c| {
                    let mut q = p.clone();
                    q.push(c.clone());
                    q
                })
            })
            .collect();
    }
    out
}

/// Offline optimum by enumerating every answer sequence.
pub fn brute_opt(metric: &Metric, k: usize, c0: &Configuration, requests: &[usize]) -> Rational {
    all_answer_sequences(metric, k, requests)
        .iter()
        .map(|s| path_cost(metric, c0, s))
        .min()
        .unwrap()
}

pub fn sequences_up_to(n: usize, horizon: usize) -> Vec<Vec<usize>> {
    let mut all = vec![Vec::new()];
    let mut level = vec![Vec::new()];
    for _ in 0..horizon {
        level = level
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..n).map(move |r| {
                    let mut q = p.clone();
                    q.push(r);
                    q
                })
            })
            .collect();
        all.extend(level.iter().cloned());
    }
    all
}

pub fn sequences_exact(n: usize, len: usize) -> Vec<Vec<usize>> {
    sequences_up_to(n, len).into_iter().filter(|s| s.len() == len).collect()
}

/// Optimal deterministic strict ratio by enumerating every strategy tree: an
/// answer (any covering configuration) for each request prefix up to `horizon`.
pub fn brute_det_value(metric: &Metric, k: usize, c0: &Configuration, horizon: usize) -> Rational {
    let configs = all_configurations(metric, k).unwrap();
    let seqs = sequences_up_to(metric.n(), horizon);
    let prefixes: Vec<&Vec<usize>> = seqs.iter().filter(|s| !s.is_empty()).collect();
    let options: Vec<Vec<&Configuration>> = prefixes
        .iter()
        .map(|p| configs.iter().filter(|c| c.covers(*p.last().unwrap())).collect())
        .collect();
    let opts: Vec<Rational> = seqs.iter().map(|s| brute_opt(metric, k, c0, s)).collect();
    let slot = |p: &[usize]| prefixes.iter().position(|q| q.as_slice() == p).unwrap();
    let slots: Vec<Vec<usize>> = seqs.iter().map(|s| (1..=s.len()).map(|t| slot(&s[..t])).collect()).collect();

    let mut choice = vec![0usize; prefixes.len()];
    let mut best: Option<ExtRatio> = None;
    loop {
        let worst = seqs
            .iter()
            .zip(&opts)
            .zip(&slots)
            .map(|((_, opt), sl)| {
                let answers: Vec<Configuration> = sl.iter().map(|&i| options[i][choice[i]].clone()).collect();
                ExtRatio::of(&path_cost(metric, c0, &answers), opt)
            })
            .max()
            .unwrap();
        if best.as_ref().is_none_or(|b| worst < *b) {
            best = Some(worst);
        }
        // mixed-radix increment
        let mut i = 0;
        loop {
            if i == choice.len() {
                return best.unwrap().finite().cloned().expect("finite optimum");
            }
            choice[i] += 1;
            if choice[i] < options[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Shortest-path closure of random integer edge weights in `1..=max_w`.
pub fn random_metric(rng: &mut StdRng, n: usize, max_w: i64) -> Metric {
    let mut d = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = rng.gen_range(1..=max_w);
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][l] + d[l][j] < d[i][j] {
                    d[i][j] = d[i][l] + d[l][j];
                }
            }
        }
    }
    Metric::from_matrix(d.into_iter().map(|row| row.into_iter().map(int).collect()).collect()).unwrap()
}

pub fn uniform3() -> Metric {
    Metric::uniform(3)
}

pub fn line3() -> Metric {
    Metric::line(&[int(0), int(1), int(3)]).unwrap()
}

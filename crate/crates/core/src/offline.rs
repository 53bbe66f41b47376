//! Optimal offline cost by work-function dynamic programming.

use num_traits::Zero;

use crate::metric::{ConfigSpace, Configuration};
use crate::rational::Rational;

/// `values[c]` is the cheapest way to serve the processed prefix and then
/// stand in configuration `c` (indexed as in the [`ConfigSpace`]).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WorkFunction {
    values: Vec<Rational>,
    prefix_len: usize,
}

impl WorkFunction {
    pub fn init(space: &ConfigSpace, c0: usize) -> Self {
        let values = (0..space.len()).map(|c| space.dist(c0, c).clone()).collect();
        WorkFunction { values, prefix_len: 0 }
    }

    /// `w'(C) = min_{C2 ∋ r} w(C2) + d(C2, C)`.
    pub fn update(&self, space: &ConfigSpace, r: usize) -> Self {
        let covering = space.covering(r);
        let values = (0..space.len())
            .map(|c| {
                covering
                    .iter()
                    .map(|&c2| &self.values[c2] + space.dist(c2, c))
                    .min()
                    .expect("every point is covered by some configuration")
            })
            .collect();
        WorkFunction { values, prefix_len: self.prefix_len + 1 }
    }

    pub fn value(&self, c: usize) -> &Rational {
        &self.values[c]
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    /// Optimal offline cost of the processed prefix.
    pub fn min_value(&self) -> &Rational {
        self.values.iter().min().expect("non-empty configuration space")
    }
}

pub fn opt_cost(space: &ConfigSpace, c0: usize, requests: &[usize]) -> Rational {
    requests
        .iter()
        .fold(WorkFunction::init(space, c0), |w, &r| w.update(space, r))
        .min_value()
        .clone()
}

/// One optimal answer sequence (configuration indices), recovered by
/// backtracking. Ties go to the lexicographically smallest configuration,
/// resolving the latest step first.
pub fn opt_answer_indices(space: &ConfigSpace, c0: usize, requests: &[usize]) -> Vec<usize> {
    let mut wfs = Vec::with_capacity(requests.len() + 1);
    wfs.push(WorkFunction::init(space, c0));
    for &r in requests {
        let next = wfs.last().expect("non-empty").update(space, r);
        wfs.push(next);
    }
    // The answer to request t is the covering C minimising w_{t-1}(C) + d(C, answer_{t+1}).
    let mut answers = vec![0; requests.len()];
    let mut next: Option<usize> = None;
    for t in (0..requests.len()).rev() {
        let w = &wfs[t];
        let mut best: Option<(Rational, usize)> = None;
        for &c in space.covering(requests[t]) {
            let tail = next.map_or_else(Rational::zero, |n| space.dist(c, n).clone());
            let cand = w.value(c) + tail;
            if best.as_ref().is_none_or(|(b, _)| cand < *b) {
                best = Some((cand, c));
            }
        }
        let (_, c) = best.expect("covering set non-empty");
        answers[t] = c;
        next = Some(c);
    }
    answers
}

pub fn opt_answers(space: &ConfigSpace, c0: usize, requests: &[usize]) -> Vec<Configuration> {
    opt_answer_indices(space, c0, requests)
        .into_iter()
        .map(|c| space.config(c).clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Metric;
    use crate::rational::int;

    fn cfg(space: &ConfigSpace, p: &[usize]) -> usize {
        space.index_of(&Configuration::new(p.to_vec())).unwrap()
    }

    #[test]
    fn init_examples() {
        let s = ConfigSpace::new(Metric::uniform(3), 2).unwrap();
        let c0 = cfg(&s, &[0, 1]);
        let w = WorkFunction::init(&s, c0);
        assert_eq!(w.values(), &[int(0), int(1), int(1)]);
        assert_eq!(w.prefix_len(), 0);

        let line = ConfigSpace::new(Metric::line(&[int(0), int(1), int(3)]).unwrap(), 2).unwrap();
        let w = WorkFunction::init(&line, cfg(&line, &[0, 1]));
        assert_eq!(*w.value(cfg(&line, &[0, 2])), int(2));
        assert_eq!(*w.value(cfg(&line, &[0, 1])), int(0));
    }

    #[test]
    fn update_examples() {
        let s = ConfigSpace::new(Metric::uniform(3), 2).unwrap();
        let c0 = cfg(&s, &[0, 1]);
        let w = WorkFunction::init(&s, c0).update(&s, 2);
        assert_eq!(*w.value(cfg(&s, &[0, 2])), int(1));
        assert_eq!(*w.value(cfg(&s, &[1, 2])), int(1));
        assert_eq!(*w.value(cfg(&s, &[0, 1])), int(2));
        assert_eq!(w.prefix_len(), 1);

        let again = w.update(&s, 2);
        assert_eq!(again.values(), w.values());

        let covered = WorkFunction::init(&s, c0).update(&s, 0);
        assert_eq!(*covered.min_value(), int(0));
    }

    #[test]
    fn opt_examples() {
        let s = ConfigSpace::new(Metric::uniform(3), 2).unwrap();
        let c0 = cfg(&s, &[0, 1]);
        assert_eq!(opt_cost(&s, c0, &[0, 1, 1, 0]), int(0));
        assert_eq!(opt_cost(&s, c0, &[2]), int(1));
        assert_eq!(opt_cost(&s, c0, &[2, 0]), int(1));

        assert!(opt_answers(&s, c0, &[]).is_empty());
        assert_eq!(opt_answers(&s, c0, &[2]), vec![Configuration::new(vec![0, 2])]);
        // serving 2 from the server at 1 keeps 0 covered
        assert_eq!(opt_answers(&s, c0, &[2, 0]), vec![Configuration::new(vec![0, 2]); 2]);
    }
}

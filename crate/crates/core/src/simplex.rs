//! Exact phase-one simplex over rationals.
//!
//! Decides whether `{x >= 0 : rows}` is non-empty and returns a vertex if so.
//! Pivoting follows Bland's rule, so the method terminates on degenerate
//! problems. The tableau is dense but row operations only touch the non-zero
//! entries of the pivot row.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
}

/// `Σ coeffs · x  (≤ | =)  rhs`, with sparse coefficients sorted by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, Rational)>,
    pub sense: Sense,
    pub rhs: Rational,
}

impl LinearRow {
    pub fn lhs(&self, x: &[Rational]) -> Rational {
        self.coeffs.iter().map(|(j, a)| a * &x[*j]).sum()
    }

    pub fn holds(&self, x: &[Rational]) -> bool {
        let lhs = self.lhs(x);
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Eq => lhs == self.rhs,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub rows: usize,
    pub rows_after_presolve: usize,
    pub pivots: usize,
}

/// Returns a non-negative point satisfying every row, or `None`.
pub fn find_feasible_point(num_vars: usize, rows: &[LinearRow]) -> Option<Vec<Rational>> {
    find_feasible_point_stats(num_vars, rows).0
}

pub fn find_feasible_point_stats(
    num_vars: usize,
    rows: &[LinearRow],
) -> (Option<Vec<Rational>>, SolveStats) {
    let kept = presolve(rows);
    let mut stats = SolveStats { rows: rows.len(), rows_after_presolve: kept.len(), ..Default::default() };
    let mut tab = Tableau::new(num_vars, &kept);
    stats.pivots = tab.run();
    if !tab.objective_value().is_zero() {
        return (None, stats);
    }
    let x = tab.primal(num_vars);
    assert!(rows.iter().all(|r| r.holds(&x)), "simplex returned a point violating a row");
    (Some(x), stats)
}

// Drops `≤` rows whose coefficient vector repeats an earlier row with a
// smaller or equal right-hand side.
fn presolve(rows: &[LinearRow]) -> Vec<&LinearRow> {
    let mut tightest: HashMap<&[(usize, Rational)], usize> = HashMap::new();
    let mut keep = vec![true; rows.len()];
    for (i, row) in rows.iter().enumerate() {
        if row.sense != Sense::Le {
            continue;
        }
        match tightest.get(row.coeffs.as_slice()) {
            Some(&j) if rows[j].rhs <= row.rhs => keep[i] = false,
            Some(&j) => {
                keep[j] = false;
                tightest.insert(&row.coeffs, i);
            }
            None => {
                tightest.insert(&row.coeffs, i);
            }
        }
    }
    rows.iter().zip(keep).filter_map(|(r, k)| k.then_some(r)).collect()
}

struct Tableau {
    a: Vec<Vec<Rational>>,
    b: Vec<Rational>,
    basis: Vec<usize>,
    /// Reduced costs of the phase-one objective.
    cost: Vec<Rational>,
    /// Current phase-one objective value (sum of artificials).
    value: Rational,
}

impl Tableau {
    fn new(num_vars: usize, rows: &[&LinearRow]) -> Self {
        let m = rows.len();
        // column layout: structural | slack/surplus | artificial
        let mut normalized = Vec::with_capacity(m);
        let mut extra = 0;
        let mut artificials = 0;
        for row in rows {
            let flip = row.rhs.is_negative();
            let sign = if flip { -Rational::one() } else { Rational::one() };
            let coeffs: Vec<(usize, Rational)> =
                row.coeffs.iter().map(|(j, a)| (*j, a * &sign)).collect();
            let rhs = &row.rhs * &sign;
            // Le with rhs >= 0: slack is basic. Ge (flipped Le): surplus + artificial. Eq: artificial.
            let (has_slack, slack_sign, needs_art) = match (row.sense, flip) {
                (Sense::Le, false) => (true, Rational::one(), false),
                (Sense::Le, true) => (true, -Rational::one(), true),
                (Sense::Eq, _) => (false, Rational::zero(), true),
            };
            if has_slack {
                extra += 1;
            }
            if needs_art {
                artificials += 1;
            }
            normalized.push((coeffs, rhs, has_slack, slack_sign, needs_art));
        }
        let artificial_start = num_vars + extra;
        let width = artificial_start + artificials;
        let mut a = vec![vec![Rational::zero(); width]; m];
        let mut b = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_slack = num_vars;
        let mut next_art = artificial_start;
        for (i, (coeffs, rhs, has_slack, slack_sign, needs_art)) in normalized.into_iter().enumerate() {
            for (j, v) in coeffs {
                a[i][j] += v;
            }
            let mut basic = None;
            if has_slack {
                a[i][next_slack] = slack_sign;
                if !needs_art {
                    basic = Some(next_slack);
                }
                next_slack += 1;
            }
            if needs_art {
                a[i][next_art] = Rational::one();
                basic = Some(next_art);
                next_art += 1;
            }
            b.push(rhs);
            basis.push(basic.expect("every row has a basic column"));
        }
        let mut cost = vec![Rational::zero(); width];
        let mut value = Rational::zero();
        for i in 0..m {
            if basis[i] >= artificial_start {
                value += &b[i];
                for j in 0..artificial_start {
                    if !a[i][j].is_zero() {
                        cost[j] -= &a[i][j];
                    }
                }
            }
        }
        Tableau { a, b, basis, cost, value }
    }

    fn objective_value(&self) -> &Rational {
        &self.value
    }

    fn run(&mut self) -> usize {
        let mut pivots = 0;
        while !self.value.is_zero() {
            let Some(col) = self.cost.iter().position(|c| c.is_negative()) else { break };
            let row = self.leaving_row(col).expect("phase one objective is bounded below");
            self.pivot(row, col);
            pivots += 1;
        }
        pivots
    }

    fn leaving_row(&self, col: usize) -> Option<usize> {
        let mut best: Option<(Rational, usize)> = None;
        for (i, row) in self.a.iter().enumerate() {
            if row[col].is_positive() {
                let ratio = &self.b[i] / &row[col];
                let better = match &best {
                    None => true,
                    Some((r, bi)) => ratio < *r || (ratio == *r && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((ratio, i));
                }
            }
        }
        best.map(|(_, i)| i)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.a[row][col].recip();
        let nz: Vec<usize> = (0..self.a[row].len()).filter(|&j| !self.a[row][j].is_zero()).collect();
        for &j in &nz {
            self.a[row][j] *= &inv;
        }
        self.b[row] *= &inv;
        let pivot_row: Vec<(usize, Rational)> = nz.iter().map(|&j| (j, self.a[row][j].clone())).collect();
        let pivot_b = self.b[row].clone();
        for i in 0..self.a.len() {
            if i == row || self.a[i][col].is_zero() {
                continue;
            }
            let factor = self.a[i][col].clone();
            for (j, v) in &pivot_row {
                self.a[i][*j] -= &factor * v;
            }
            self.b[i] -= &factor * &pivot_b;
        }
        if !self.cost[col].is_zero() {
            let factor = self.cost[col].clone();
            for (j, v) in &pivot_row {
                self.cost[*j] -= &factor * v;
            }
            self.value += &factor * &pivot_b;
        }
        self.basis[row] = col;
    }

    fn primal(&self, num_vars: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); num_vars];
        for (i, &j) in self.basis.iter().enumerate() {
            if j < num_vars {
                x[j] = self.b[i].clone();
            }
        }
        x
    }
}

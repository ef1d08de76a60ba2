//! Branch and bound over the LP relaxation of the admission program.
//!
//! Variables are the open entry slots. All constraint coefficients are
//! non-negative, so the feasible set is down-closed: the greedy
//! earliest-slot-first fill is the lexicographically greatest feasible plan,
//! and any LP point can be floored to a feasible integer point.

use super::lp::{maximize, LpOutcome};

const INTEGRALITY_EPS: f64 = 1e-6;

/// A packing program `A x <= r`, `0 <= x <= upper`, integer `x`.
pub(crate) struct Packing<'a> {
    pub a: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    pub upper: Vec<i64>,
    /// Exact feasibility predicate on full variable vectors.
    pub admits: &'a dyn Fn(&[i64]) -> bool,
}

/// Linear objective plus an optional `sum(coef * x) >= floor` side constraint.
pub(crate) struct Goal<'a> {
    pub objective: &'a [f64],
    pub at_least: Option<(&'a [f64], f64)>,
}

impl Goal<'_> {
    fn value(&self, x: &[i64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, &v)| c * v as f64).sum()
    }

    fn side_ok(&self, x: &[i64]) -> bool {
        match self.at_least {
            None => true,
            Some((coef, floor)) => coef.iter().zip(x).map(|(c, &v)| c * v as f64).sum::<f64>() >= floor - 1e-9,
        }
    }
}

impl Packing<'_> {
    pub fn num_vars(&self) -> usize {
        self.upper.len()
    }

    /// Raises each variable from `start` onward, in order, as far as feasibility
    /// and `hi` allow.
    pub fn greedy_fill(&self, x: &mut [i64], start: usize, hi: &[i64]) {
        let mut slack: Vec<f64> = self
            .a
            .iter()
            .zip(&self.residual)
            .map(|(row, r)| r - row.iter().zip(x.iter()).map(|(c, &v)| c * v as f64).sum::<f64>())
            .collect();
        for j in start..self.num_vars() {
            let mut room = (hi[j] - x[j]).max(0) as f64;
            for (row, s) in self.a.iter().zip(&slack) {
                if row[j] > 0.0 {
                    room = room.min(((s + 1e-9) / row[j]).floor().max(0.0));
                }
            }
            let base = x[j];
            x[j] = base + room as i64;
            while x[j] > base && !(self.admits)(x) {
                x[j] -= 1;
            }
            while x[j] < hi[j] {
                x[j] += 1;
                if !(self.admits)(x) {
                    x[j] -= 1;
                    break;
                }
            }
            let added = (x[j] - base) as f64;
            for (row, s) in self.a.iter().zip(slack.iter_mut()) {
                *s -= row[j] * added;
            }
        }
    }

    /// Lexicographically greatest feasible completion of the first `prefix.len()` values.
    pub fn lex_max_completion(&self, prefix: &[i64]) -> Vec<i64> {
        let mut x = vec![0; self.num_vars()];
        x[..prefix.len()].copy_from_slice(prefix);
        self.greedy_fill(&mut x, prefix.len(), &self.upper);
        x
    }

    /// Optimal value of the LP relaxation under bounds `[lo, hi]`, or `None` if empty.
    fn relax(&self, goal: &Goal, lo: &[i64], hi: &[i64]) -> Option<(Vec<f64>, f64)> {
        let n = self.num_vars();
        let mut b: Vec<f64> = Vec::with_capacity(self.a.len() + 1);
        for (row, r) in self.a.iter().zip(&self.residual) {
            let used: f64 = row.iter().zip(lo).map(|(c, &v)| c * v as f64).sum();
            let rhs = r - used;
            if rhs < -1e-9 * r.abs().max(1.0) {
                return None;
            }
            b.push(rhs.max(0.0));
        }
        let mut a = self.a.clone();
        if let Some((coef, floor)) = goal.at_least {
            let used: f64 = coef.iter().zip(lo).map(|(c, &v)| c * v as f64).sum();
            a.push(coef.iter().map(|c| -c).collect());
            b.push(-(floor - used));
        }
        let upper: Vec<f64> = (0..n).map(|j| (hi[j] - lo[j]) as f64).collect();
        if upper.iter().any(|&u| u < 0.0) {
            return None;
        }
        match maximize(goal.objective, &a, &b, &upper) {
            LpOutcome::Infeasible => None,
            LpOutcome::Optimal { y, value } => {
                let base = goal.value(lo);
                Some((y.iter().zip(lo).map(|(yi, &l)| yi + l as f64).collect(), value + base))
            }
        }
    }

    /// Upper bound on the objective from the root relaxation.
    pub fn root_bound(&self, goal: &Goal) -> Option<f64> {
        let lo = vec![0; self.num_vars()];
        self.relax(goal, &lo, &self.upper).map(|(_, v)| v)
    }

    /// LP-guided dive: repeatedly fixes the first fractional variable, rounding
    /// up when the relaxation stays feasible and down otherwise.
    pub fn dive(&self, goal: &Goal, mut lo: Vec<i64>, mut hi: Vec<i64>) -> Option<Vec<i64>> {
        loop {
            let (y, _) = self.relax(goal, &lo, &hi)?;
            let Some(j) = (0..y.len()).find(|&j| (y[j] - y[j].round()).abs() >= INTEGRALITY_EPS) else {
                let x: Vec<i64> = y.iter().map(|v| v.round() as i64).collect();
                return ((self.admits)(&x) && goal.side_ok(&x)).then_some(x);
            };
            let up = y[j].ceil() as i64;
            let (mut l, mut h) = (lo.clone(), hi.clone());
            l[j] = up;
            h[j] = up;
            if up <= hi[j] && self.relax(goal, &l, &h).is_some() {
                lo = l;
                hi = h;
            } else {
                lo[j] = y[j].floor() as i64;
                hi[j] = lo[j];
            }
        }
    }

    /// Depth-first branch and bound. Returns the best integer point strictly
    /// better than `incumbent` (or the incumbent itself when none exists) and
    /// whether the search finished within `budget` nodes, which it decrements.
    /// Objective values must be integral.
    pub fn branch_and_bound(&self, goal: &Goal, lo: Vec<i64>, hi: Vec<i64>, incumbent: (Vec<i64>, f64), budget: &mut u64) -> Search {
        let (mut best, mut best_value) = incumbent;
        let mut stack = vec![(lo, hi)];
        while let Some((lo, hi)) = stack.pop() {
            if *budget == 0 {
                return Search { best, value: best_value, complete: false };
            }
            *budget -= 1;
            let Some((y, bound)) = self.relax(goal, &lo, &hi) else { continue };
            if (bound + INTEGRALITY_EPS).floor() <= best_value {
                continue;
            }

            let rounded: Vec<i64> = y.iter().map(|v| v.round() as i64).collect();
            let integral = y.iter().zip(&rounded).all(|(v, &r)| (v - r as f64).abs() < INTEGRALITY_EPS);
            if integral && (self.admits)(&rounded) && goal.side_ok(&rounded) {
                let value = goal.value(&rounded);
                if value > best_value {
                    best = rounded;
                    best_value = value;
                }
                continue;
            }

            // incumbent from the floored relaxation, topped up greedily
            let mut candidate: Vec<i64> = y.iter().zip(&lo).map(|(v, &l)| ((v + INTEGRALITY_EPS).floor() as i64).max(l)).collect();
            if !(self.admits)(&candidate) {
                candidate.clone_from(&lo);
            }
            if (self.admits)(&candidate) {
                self.greedy_fill(&mut candidate, 0, &hi);
                let value = goal.value(&candidate);
                if goal.side_ok(&candidate) && value > best_value {
                    best = candidate;
                    best_value = value;
                    if (bound + INTEGRALITY_EPS).floor() <= best_value {
                        continue;
                    }
                }
            }

            let branch = if integral {
                // rounding landed just outside the exact predicate: split at the rounded value
                (0..y.len())
                    .filter(|&j| rounded[j] > lo[j])
                    .max_by(|&a, &b| (y[a] - lo[a] as f64).total_cmp(&(y[b] - lo[b] as f64)))
                    .map(|j| (j, rounded[j] as f64 - 0.5))
            } else {
                (0..y.len())
                    .filter(|&j| (y[j] - y[j].round()).abs() >= INTEGRALITY_EPS)
                    .max_by(|&a, &b| {
                        let fa = (y[a] - y[a].floor() - 0.5).abs();
                        let fb = (y[b] - y[b].floor() - 0.5).abs();
                        fb.total_cmp(&fa).then(b.cmp(&a))
                    })
                    .map(|j| (j, y[j]))
            };
            let Some((j, value)) = branch else { continue };
            let (down, up) = (value.floor() as i64, value.ceil() as i64);
            if down >= lo[j] {
                let mut h = hi.clone();
                h[j] = down;
                stack.push((lo.clone(), h));
            }
            if up <= hi[j] {
                let mut l = lo;
                l[j] = up;
                stack.push((l, hi));
            }
        }
        Search { best, value: best_value, complete: true }
    }
}

pub(crate) struct Search {
    pub best: Vec<i64>,
    pub value: f64,
    pub complete: bool,
}

//! Per-slot ticket availability: the occupancy-capped admission program.
//!
//! For open entry slots `s` choose integers `0 <= x[s] <= U[s]` maximizing
//! `sum w[s] * x[s]` subject to
//!
//! * occupancy: `sum_{s <= t} (p[s] x[s] + pc[s] c[s]) Q[s][t] <= C_max` for every open `t`,
//! * entry throughput: `p[s] x[s] + pc[s] c[s] <= E_max`,
//!
//! where `p` is the planning show rate for new issues, `c` the persons already
//! committed and `pc` their planning show rate. Among optimal plans the
//! lexicographically greatest (earliest slot first) is returned.

mod lp;
mod replan;
mod search;

pub use replan::{replan, ReplanInputs};

use serde::{Deserialize, Serialize};

use crate::duration::{predict_occupancy, survival, DurationMatrix, SurvivalMatrix};
use crate::error::{Error, Result};
use crate::time::SlotGrid;
use search::{Goal, Packing};

/// Relative slack allowed on every cap, `1e-9 * max(1, cap)`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Largest instance `brute_force_allocation` will enumerate.
pub const BRUTE_FORCE_MAX_SLOTS: usize = 6;
pub const BRUTE_FORCE_MAX_BOUND: u32 = 8;

fn tolerance(cap: f64) -> f64 {
    FEASIBILITY_TOLERANCE * cap.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub grid: SlotGrid,
    pub occupancy_cap: u32,
    pub entry_cap: u32,
    pub survival: SurvivalMatrix,
    /// Planning show rate applied to newly issued persons, per slot.
    pub show_rate: Vec<f64>,
    /// Persons already issued per slot (or realized entries for closed slots).
    pub committed: Vec<u32>,
    /// Planning show rate applied to the committed persons, per slot.
    pub committed_show_rate: Vec<f64>,
    pub issuance_bound: Vec<u32>,
    pub weights: Vec<u32>,
    /// Slots before this one are history: no issuance and no constraints of their own.
    pub first_open_slot: usize,
    /// Load tolerated above `occupancy_cap` per occupancy row; empty means none.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub occupancy_allowance: Vec<f64>,
    /// Load tolerated above `entry_cap` per slot; empty means none.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entry_allowance: Vec<f64>,
}

impl AllocationProblem {
    /// A fresh day: show rate 1, nothing committed, unbounded issuance, unit weights.
    pub fn new(grid: SlotGrid, occupancy_cap: u32, entry_cap: u32, survival: SurvivalMatrix) -> Self {
        let n = grid.num_slots;
        Self {
            grid,
            occupancy_cap,
            entry_cap,
            survival,
            show_rate: vec![1.0; n],
            committed: vec![0; n],
            committed_show_rate: vec![1.0; n],
            issuance_bound: vec![u32::MAX; n],
            weights: vec![1; n],
            first_open_slot: 0,
            occupancy_allowance: Vec::new(),
            entry_allowance: Vec::new(),
        }
    }

    /// Occupancy limit of row `t`, allowance included.
    pub fn occupancy_limit(&self, t: usize) -> f64 {
        f64::from(self.occupancy_cap) + self.occupancy_allowance.get(t).copied().unwrap_or(0.0)
    }

    /// Entry limit of slot `s`, allowance included.
    pub fn entry_limit(&self, s: usize) -> f64 {
        f64::from(self.entry_cap) + self.entry_allowance.get(s).copied().unwrap_or(0.0)
    }

    /// Raises the limits of rows and slots that committed load alone already
    /// breaks to exactly that load, so nothing more can be added there.
    /// Returns whether any limit moved.
    pub fn tolerate_overloads(&mut self) -> bool {
        let n = self.num_slots();
        let open = self.first_open_slot;
        let entries = self.expected_entries(&vec![0; n]);
        let occ = self.occupancy_of(&entries);
        let mut moved = false;
        let mut entry_allowance = vec![0.0; n];
        for s in open..n {
            let cap = f64::from(self.entry_cap);
            if entries[s] > cap + tolerance(cap) {
                entry_allowance[s] = entries[s] - cap;
                moved = true;
            }
        }
        let mut occupancy_allowance = vec![0.0; occ.len()];
        for t in open..occ.len() {
            let cap = f64::from(self.occupancy_cap);
            if occ[t] > cap + tolerance(cap) {
                occupancy_allowance[t] = occ[t] - cap;
                moved = true;
            }
        }
        if moved {
            self.entry_allowance = entry_allowance;
            self.occupancy_allowance = occupancy_allowance;
        }
        moved
    }

    pub fn num_slots(&self) -> usize {
        self.grid.num_slots
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_slots();
        if self.survival.num_slots() != n {
            return Err(Error::ShapeMismatch(format!("survival matrix has {} rows, grid has {n} slots", self.survival.num_slots())));
        }
        for (name, len) in [
            ("show_rate", self.show_rate.len()),
            ("committed", self.committed.len()),
            ("committed_show_rate", self.committed_show_rate.len()),
            ("issuance_bound", self.issuance_bound.len()),
            ("weights", self.weights.len()),
        ] {
            if len != n {
                return Err(Error::ShapeMismatch(format!("{name} has {len} entries, grid has {n} slots")));
            }
        }
        for (name, rates) in [("show_rate", &self.show_rate), ("committed_show_rate", &self.committed_show_rate)] {
            if let Some(i) = rates.iter().position(|&p| !(p > 0.0 && p <= 1.0)) {
                return Err(Error::invariant(format!("{name}[{i}]"), "must lie in (0, 1]"));
            }
        }
        if self.first_open_slot > n {
            return Err(Error::invariant("first_open_slot", "beyond the grid"));
        }
        for (name, v, len) in
            [("occupancy_allowance", &self.occupancy_allowance, self.survival.horizon()), ("entry_allowance", &self.entry_allowance, n)]
        {
            if !v.is_empty() && v.len() != len {
                return Err(Error::ShapeMismatch(format!("{name} has {} entries, expected {len}", v.len())));
            }
            if let Some(i) = v.iter().position(|&a| !(a >= 0.0 && a.is_finite())) {
                return Err(Error::invariant(format!("{name}[{i}]"), "must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    /// Expected shows per entry slot under the plan `x`.
    pub fn expected_entries(&self, x: &[u32]) -> Vec<f64> {
        (0..self.num_slots())
            .map(|s| self.show_rate[s] * f64::from(x[s]) + self.committed_show_rate[s] * f64::from(self.committed[s]))
            .collect()
    }

    fn occupancy_of(&self, entries: &[f64]) -> Vec<f64> {
        let mut occ = vec![0.0; self.survival.horizon()];
        for (s, &e) in entries.iter().enumerate() {
            for (k, q) in self.survival.tail(s).iter().enumerate() {
                occ[s + k] += e * q;
            }
        }
        occ
    }

    /// Exact feasibility of an integer plan; the single predicate shared by the
    /// solver and the brute-force search.
    pub fn admits(&self, x: &[u32]) -> bool {
        let n = self.num_slots();
        if x.len() != n {
            return false;
        }
        let open = self.first_open_slot;
        if x[..open].iter().any(|&v| v != 0) || x.iter().zip(&self.issuance_bound).any(|(v, u)| v > u) {
            return false;
        }
        let entries = self.expected_entries(x);
        if (open..n).any(|s| entries[s] > self.entry_limit(s) + tolerance(self.entry_limit(s))) {
            return false;
        }
        let occ = self.occupancy_of(&entries);
        (open..occ.len()).all(|t| occ[t] <= self.occupancy_limit(t) + tolerance(self.occupancy_limit(t)))
    }

    fn plan_for(&self, x: Vec<u32>, feasible: bool, proven_optimal: bool) -> AllocationPlan {
        let predicted_occupancy = self.occupancy_of(&self.expected_entries(&x));
        let objective = x.iter().zip(&self.weights).map(|(&v, &w)| u64::from(v) * u64::from(w)).sum();
        AllocationPlan { issuable: x, objective, predicted_occupancy, feasible, proven_optimal }
    }

    /// Checks committed load alone against both constraints.
    fn check_commitments(&self) -> Result<()> {
        let n = self.num_slots();
        let open = self.first_open_slot;
        let zero = vec![0u32; n];
        let entries = self.expected_entries(&zero);
        let infeasible =
            |constraint, slot| Error::InfeasibleCommitments { constraint, slot, plan: Box::new(self.plan_for(zero.clone(), false, false)) };
        if let Some(s) = (open..n).find(|&s| entries[s] > self.entry_limit(s) + tolerance(self.entry_limit(s))) {
            return Err(infeasible("entry", s));
        }
        let occ = self.occupancy_of(&entries);
        if let Some(t) = (open..occ.len()).find(|&t| occ[t] > self.occupancy_limit(t) + tolerance(self.occupancy_limit(t))) {
            return Err(infeasible("occupancy", t));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    /// Additional persons issuable per entry slot.
    pub issuable: Vec<u32>,
    /// `sum w[s] * x[s]`.
    pub objective: u64,
    pub predicted_occupancy: Vec<f64>,
    pub feasible: bool,
    /// Optimality and tie-break were certified within the node budget.
    pub proven_optimal: bool,
}

impl AllocationPlan {
    pub fn total_issuable(&self) -> u64 {
        self.issuable.iter().map(|&v| u64::from(v)).sum()
    }
}

/// Search limits for [`solve_allocation_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Branch-and-bound nodes (relaxations solved) across the optimality
    /// search and the tie-break. Deterministic, unlike a time limit.
    pub node_limit: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { node_limit: DEFAULT_NODE_LIMIT }
    }
}

/// Node budget of [`solve_allocation`].
pub const DEFAULT_NODE_LIMIT: u64 = 20_000;

/// Optimum of the admission program with earliest-slot-first tie-break,
/// under the default node budget.
pub fn solve_allocation(problem: &AllocationProblem) -> Result<AllocationPlan> {
    solve_allocation_with(problem, &SolveOptions::default())
}

/// Optimum of the admission program with earliest-slot-first tie-break.
///
/// When the node budget runs out, the best plan found is returned with
/// `proven_optimal = false`; it is always feasible. Infeasible commitments
/// yield [`Error::InfeasibleCommitments`] carrying an all-zero plan marked
/// infeasible.
pub fn solve_allocation_with(problem: &AllocationProblem, options: &SolveOptions) -> Result<AllocationPlan> {
    problem.validate()?;
    problem.check_commitments()?;
    let n = problem.num_slots();
    let open = problem.first_open_slot;
    let slots: Vec<usize> = (open..n).collect();
    if slots.is_empty() {
        return Ok(problem.plan_for(vec![0; n], true, true));
    }

    let base = problem.expected_entries(&vec![0; n]);
    let base_occ = problem.occupancy_of(&base);
    // without allowances, rows past the last slot are implied by row n-1
    let last_row = if problem.occupancy_allowance.is_empty() { n } else { problem.survival.horizon() };
    let rows: Vec<usize> = (open..last_row).collect();
    let a: Vec<Vec<f64>> =
        rows.iter().map(|&t| slots.iter().map(|&s| problem.show_rate[s] * problem.survival.get(s, t)).collect()).collect();
    let residual: Vec<f64> = rows.iter().map(|&t| (problem.occupancy_limit(t) - base_occ[t]).max(0.0)).collect();
    let upper: Vec<i64> = slots
        .iter()
        .map(|&s| {
            let p = problem.show_rate[s];
            let (e_cap, c_cap) = (problem.entry_limit(s), problem.occupancy_limit(s));
            let by_entry = ((e_cap - base[s]).max(0.0) + tolerance(e_cap)) / p;
            let by_occupancy = ((c_cap - base_occ[s]).max(0.0) + tolerance(c_cap)) / p;
            let bound = by_entry.min(by_occupancy).floor().min(f64::from(problem.issuance_bound[s]));
            bound.max(0.0) as i64
        })
        .collect();

    let to_plan = |vars: &[i64]| -> Vec<u32> {
        let mut x = vec![0u32; n];
        for (j, &s) in slots.iter().enumerate() {
            x[s] = vars[j] as u32;
        }
        x
    };
    let admits = |vars: &[i64]| vars.iter().all(|&v| v >= 0) && problem.admits(&to_plan(vars));
    let packing = Packing { a, residual, upper, admits: &admits };
    let weights: Vec<f64> = slots.iter().map(|&s| f64::from(problem.weights[s])).collect();
    let total = Goal { objective: &weights, at_least: None };
    let value = |x: &[i64]| -> f64 { weights.iter().zip(x).map(|(w, &v)| w * v as f64).sum() };

    // The greedy fill is the lexicographic maximum of the whole feasible set;
    // if it also reaches the relaxation bound it is the answer.
    let greedy = packing.lex_max_completion(&[]);
    let greedy_value = value(&greedy);
    let bound = packing.root_bound(&total).unwrap_or(greedy_value);
    let ceiling = (bound + 1e-6).floor();
    if greedy_value >= ceiling {
        return Ok(problem.plan_for(to_plan(&greedy), true, true));
    }

    let mut incumbent = (greedy.clone(), greedy_value);
    if let Some(x) = packing.dive(&total, vec![0; slots.len()], packing.upper.clone()) {
        let v = value(&x);
        if v > incumbent.1 {
            incumbent = (x, v);
        }
    }
    let mut budget = options.node_limit;
    let (mut current, optimum) = if incumbent.1 >= ceiling {
        incumbent
    } else {
        let search = packing.branch_and_bound(&total, vec![0; slots.len()], packing.upper.clone(), incumbent, &mut budget);
        if !search.complete {
            return Ok(problem.plan_for(to_plan(&search.best), true, false));
        }
        (search.best, search.value)
    };

    // Tie-break: fix slots one at a time to the largest value that still
    // admits an optimal completion.
    let mut prefix: Vec<i64> = Vec::with_capacity(slots.len());
    for j in 0..slots.len() {
        let completion = packing.lex_max_completion(&prefix);
        if value(&completion) >= optimum {
            current = completion;
            break;
        }
        let mut unit = vec![0.0; slots.len()];
        unit[j] = 1.0;
        let goal = Goal { objective: &unit, at_least: Some((&weights, optimum)) };
        let mut lo = vec![0; slots.len()];
        let mut hi = packing.upper.clone();
        for (k, &v) in prefix.iter().enumerate() {
            lo[k] = v;
            hi[k] = v;
        }
        lo[j] = current[j];
        let incumbent_value = current[j] as f64;
        let search = packing.branch_and_bound(&goal, lo, hi, (current.clone(), incumbent_value), &mut budget);
        current = search.best;
        if !search.complete {
            return Ok(problem.plan_for(to_plan(&current), true, false));
        }
        prefix.push(current[j]);
    }
    Ok(problem.plan_for(to_plan(&current), true, true))
}

/// Exhaustive search over every integer plan; the test oracle for
/// [`solve_allocation`]. Guarded to `num_slots <= 6` and `U <= 8`.
pub fn brute_force_allocation(problem: &AllocationProblem) -> Result<AllocationPlan> {
    problem.validate()?;
    let n = problem.num_slots();
    if n > BRUTE_FORCE_MAX_SLOTS {
        return Err(Error::InstanceTooLarge(format!("{n} slots > {BRUTE_FORCE_MAX_SLOTS}")));
    }
    if let Some(u) = problem.issuance_bound.iter().find(|&&u| u > BRUTE_FORCE_MAX_BOUND) {
        return Err(Error::InstanceTooLarge(format!("issuance bound {u} > {BRUTE_FORCE_MAX_BOUND}")));
    }
    problem.check_commitments()?;

    let mut x = vec![0u32; n];
    let mut best: Option<(u64, Vec<u32>)> = None;
    // odometer over every plan in lexicographically decreasing order, so the
    // first plan reaching a value is the lexicographically greatest one
    let bounds: Vec<u32> = (0..n).map(|s| if s < problem.first_open_slot { 0 } else { problem.issuance_bound[s] }).collect();
    x.copy_from_slice(&bounds);
    loop {
        if problem.admits(&x) {
            let value: u64 = x.iter().zip(&problem.weights).map(|(&v, &w)| u64::from(v) * u64::from(w)).sum();
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, x.clone()));
            }
        }
        let mut k = n;
        loop {
            if k == 0 {
                let (_, plan) = best.expect("the all-zero plan is feasible once commitments are");
                return Ok(problem.plan_for(plan, true, true));
            }
            k -= 1;
            if x[k] > 0 {
                x[k] -= 1;
                for v in x.iter_mut().skip(k + 1) {
                    *v = 0;
                }
                for (v, &b) in x.iter_mut().zip(&bounds).skip(k + 1) {
                    *v = b;
                }
                break;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanCheck {
    pub occupancy: Vec<f64>,
    pub feasible: bool,
    pub violations: Vec<String>,
}

/// Recomputes occupancy from scratch with [`predict_occupancy`] and checks every cap.
pub fn verify_plan(problem: &AllocationProblem, plan: &AllocationPlan) -> Result<PlanCheck> {
    let n = problem.num_slots();
    if plan.issuable.len() != n || problem.survival.num_slots() != n {
        return Err(Error::ShapeMismatch(format!("plan has {} slots, problem has {n}", plan.issuable.len())));
    }
    let entries: Vec<f64> = (0..n)
        .map(|s| problem.show_rate[s] * f64::from(plan.issuable[s]) + problem.committed_show_rate[s] * f64::from(problem.committed[s]))
        .collect();
    let occupancy = predict_occupancy(&entries, &problem.survival)?;
    let mut violations = Vec::new();
    let c_cap = f64::from(problem.occupancy_cap);
    let e_cap = f64::from(problem.entry_cap);
    for s in 0..n {
        if plan.issuable[s] > problem.issuance_bound[s] {
            violations.push(format!("slot {s}: issuable {} exceeds bound {}", plan.issuable[s], problem.issuance_bound[s]));
        }
        if s < problem.first_open_slot {
            if plan.issuable[s] > 0 {
                violations.push(format!("slot {s}: issuance in a closed slot"));
            }
        } else if entries[s] > e_cap + tolerance(e_cap) {
            violations.push(format!("slot {s}: expected entries {:.3} exceed entry cap {}", entries[s], problem.entry_cap));
        }
    }
    for (t, &o) in occupancy.iter().enumerate().skip(problem.first_open_slot) {
        if o > c_cap + tolerance(c_cap) {
            violations.push(format!("slot {t}: occupancy {o:.3} exceeds cap {}", problem.occupancy_cap));
        }
    }
    Ok(PlanCheck { occupancy, feasible: violations.is_empty(), violations })
}

/// On-disk form of an allocation problem: durations instead of the survival kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub grid: SlotGrid,
    pub occupancy_cap: u32,
    pub entry_cap: u32,
    /// One row per entry slot: `P(duration = d)` for `d = 1..=D_max`.
    pub durations: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub show_rate: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub committed: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub committed_show_rate: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuance_bound: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<u32>>,
    #[serde(default)]
    pub first_open_slot: usize,
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<(AllocationProblem, DurationMatrix)> {
        self.grid.validate()?;
        let n = self.durations.len();
        let matrix = DurationMatrix::new(self.durations, vec![0; n])?;
        let mut problem = AllocationProblem::new(self.grid, self.occupancy_cap, self.entry_cap, survival(&matrix));
        if let Some(v) = self.show_rate {
            problem.show_rate = v;
        }
        if let Some(v) = self.committed {
            problem.committed = v;
        }
        problem.committed_show_rate = self.committed_show_rate.unwrap_or_else(|| problem.show_rate.clone());
        if let Some(v) = self.issuance_bound {
            problem.issuance_bound = v;
        }
        if let Some(v) = self.weights {
            problem.weights = v;
        }
        problem.first_open_slot = self.first_open_slot;
        problem.validate()?;
        Ok((problem, matrix))
    }

    pub fn from_problem(problem: &AllocationProblem, matrix: &DurationMatrix) -> Self {
        let n = problem.num_slots();
        Self {
            grid: problem.grid,
            occupancy_cap: problem.occupancy_cap,
            entry_cap: problem.entry_cap,
            durations: (0..n).map(|s| matrix.row(s).to_vec()).collect(),
            show_rate: Some(problem.show_rate.clone()),
            committed: Some(problem.committed.clone()),
            committed_show_rate: Some(problem.committed_show_rate.clone()),
            issuance_bound: Some(problem.issuance_bound.clone()),
            weights: Some(problem.weights.clone()),
            first_open_slot: problem.first_open_slot,
        }
    }
}

/// Kiosk-facing availability table: `slot,time,available`.
pub fn availability_table(grid: &SlotGrid, availability: &[u32]) -> String {
    let mut out = String::from("slot,time,available\n");
    for (s, a) in availability.iter().enumerate() {
        out.push_str(&format!("{s},{},{a}\n", crate::time::format_wall_minute(grid.wall_minute_of(s))));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duration::DurationMatrix;

    fn grid(n: usize) -> SlotGrid {
        SlotGrid::new(15, n, 9 * 60).unwrap()
    }

    fn problem(n: usize, pmf: &[f64], cap: u32) -> AllocationProblem {
        let m = DurationMatrix::uniform_rows(n, pmf).unwrap();
        AllocationProblem::new(grid(n), cap, u32::MAX / 2, survival(&m))
    }

    #[test]
    fn single_slot_cap_binds() {
        let p = problem(1, &[1.0], 5);
        assert_eq!(solve_allocation(&p).unwrap().issuable, vec![5]);
    }

    #[test]
    fn two_slot_stays_tie_break() {
        let p = problem(2, &[0.0, 1.0], 10);
        let plan = solve_allocation(&p).unwrap();
        assert_eq!(plan.objective, 10);
        assert_eq!(plan.issuable, vec![10, 0]);
        let mut small = p.clone();
        small.issuance_bound = vec![8, 8];
        let brute = brute_force_allocation(&small).unwrap();
        assert_eq!(brute.issuable, vec![8, 2]);
        assert_eq!(solve_allocation(&small).unwrap().issuable, vec![8, 2]);
    }

    #[test]
    fn show_rate_overbooks() {
        let mut p = problem(1, &[1.0], 8);
        p.show_rate = vec![0.8];
        p.committed_show_rate = vec![0.8];
        assert_eq!(solve_allocation(&p).unwrap().issuable, vec![10]);
    }

    #[test]
    fn greedy_is_not_optimal_here() {
        // slot 0 visitors stay three slots, later ones one slot
        let m = DurationMatrix::new(vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]], vec![0; 3]).unwrap();
        let p = AllocationProblem::new(grid(3), 10, 100, survival(&m));
        let plan = solve_allocation(&p).unwrap();
        assert_eq!(plan.issuable, vec![0, 10, 10]);
        assert_eq!(plan.objective, 20);
    }

    #[test]
    fn entry_cap_and_bounds() {
        let mut p = problem(3, &[1.0], 100);
        p.entry_cap = 7;
        p.issuance_bound = vec![3, 100, 100];
        assert_eq!(solve_allocation(&p).unwrap().issuable, vec![3, 7, 7]);
    }

    #[test]
    fn infeasible_commitments() {
        let mut p = problem(2, &[0.0, 1.0], 10);
        p.committed = vec![6, 6];
        match solve_allocation(&p) {
            Err(Error::InfeasibleCommitments { constraint, slot, plan }) => {
                assert_eq!((constraint, slot), ("occupancy", 1));
                assert!(!plan.feasible);
                assert_eq!(plan.issuable, vec![0, 0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn history_slots_are_fixed() {
        let mut p = problem(3, &[0.0, 1.0], 10);
        p.first_open_slot = 1;
        p.committed = vec![4, 0, 0];
        let plan = solve_allocation(&p).unwrap();
        assert_eq!(plan.issuable, vec![0, 6, 4]);
        assert!(verify_plan(&p, &plan).unwrap().feasible);
    }

    #[test]
    fn brute_force_guards() {
        let p = problem(7, &[1.0], 3);
        assert!(matches!(brute_force_allocation(&p), Err(Error::InstanceTooLarge(_))));
        let mut p = problem(2, &[1.0], 3);
        p.issuance_bound = vec![9, 1];
        assert!(matches!(brute_force_allocation(&p), Err(Error::InstanceTooLarge(_))));
    }

    #[test]
    fn brute_force_trivial_cases() {
        let mut p = problem(3, &[0.5, 0.5], 0);
        p.issuance_bound = vec![4, 4, 4];
        assert_eq!(brute_force_allocation(&p).unwrap().issuable, vec![0, 0, 0]);
        p.occupancy_cap = 1_000_000;
        assert_eq!(brute_force_allocation(&p).unwrap().issuable, vec![4, 4, 4]);
    }

    #[test]
    fn verify_flags_over_cap_plan() {
        let p = problem(2, &[0.0, 1.0], 10);
        let bad = AllocationPlan { issuable: vec![6, 6], objective: 12, predicted_occupancy: vec![], feasible: true, proven_optimal: true };
        let check = verify_plan(&p, &bad).unwrap();
        assert!(!check.feasible);
        assert_eq!(check.occupancy, vec![6.0, 12.0, 6.0]);
        let short = AllocationPlan { issuable: vec![1], ..bad };
        assert!(matches!(verify_plan(&p, &short), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn problem_file_round_trip() {
        let mut p = problem(3, &[0.25, 0.75], 40);
        p.show_rate = vec![0.9, 0.8, 1.0];
        p.committed = vec![1, 2, 3];
        p.committed_show_rate = vec![0.95, 0.85, 1.0];
        let m = DurationMatrix::uniform_rows(3, &[0.25, 0.75]).unwrap();
        let text = toml::to_string(&ProblemFile::from_problem(&p, &m)).unwrap();
        let (back, _) = toml::from_str::<ProblemFile>(&text).unwrap().into_problem().unwrap();
        assert_eq!(back, p);
    }
}

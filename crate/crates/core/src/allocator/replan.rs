use super::{solve_allocation_with, AllocationPlan, AllocationProblem, SolveOptions};
use crate::duration::SurvivalMatrix;
use crate::error::{Error, Result};
use crate::noshow::NoShowModel;
use crate::time::SlotGrid;

/// What the rolling-horizon planner needs from the knowledge base at a slot boundary.
#[derive(Debug, Clone)]
pub struct ReplanInputs<'a> {
    pub grid: SlotGrid,
    pub occupancy_cap: u32,
    pub entry_cap: u32,
    pub survival: &'a SurvivalMatrix,
    pub noshow: &'a NoShowModel,
    /// Divide new issues by the planning show rate; otherwise plan at show rate 1.
    pub overbooking: bool,
    pub safety_margin: f64,
    /// Realized entries (persons) per slot; read for slots before the boundary.
    pub entered: &'a [u32],
    /// Persons sold per visit slot, split by booking gap: `(gap, persons)`.
    pub sold: &'a [Vec<(u32, u32)>],
    pub issuance_bound: Option<&'a [u32]>,
    pub solve: SolveOptions,
}

impl ReplanInputs<'_> {
    fn rate(&self, gap: u32, slot: usize) -> f64 {
        if self.overbooking {
            self.noshow.planning_show_rate(gap, slot, self.safety_margin)
        } else {
            1.0
        }
    }

    /// The admission program for the horizon starting at `boundary`: slots
    /// `>= boundary` are open, earlier ones contribute their realized entries.
    pub fn problem(&self, boundary: usize) -> Result<AllocationProblem> {
        let n = self.grid.num_slots;
        if self.entered.len() != n || self.sold.len() != n {
            return Err(Error::ShapeMismatch(format!("tallies must have {n} slots")));
        }
        let mut p = AllocationProblem::new(self.grid, self.occupancy_cap, self.entry_cap, self.survival.clone());
        p.first_open_slot = boundary.min(n);
        if let Some(bound) = self.issuance_bound {
            p.issuance_bound = bound.to_vec();
        }
        for s in 0..n {
            if s < boundary {
                p.committed[s] = self.entered[s];
                p.issuance_bound[s] = 0;
                continue;
            }
            let persons: u32 = self.sold[s].iter().map(|&(_, g)| g).sum();
            p.committed[s] = persons;
            if persons > 0 {
                let load: f64 = self.sold[s].iter().map(|&(gap, g)| f64::from(g) * self.rate(gap, s)).sum();
                p.committed_show_rate[s] = load / f64::from(persons);
            }
            // sold at any gap up to s - boundary; plan at the highest show rate among them
            p.show_rate[s] = (0..=(s - boundary) as u32).map(|g| self.rate(g, s)).fold(0.0, f64::max);
        }
        Ok(p)
    }
}

/// Re-solves the admission program at slot boundary `boundary`, with sales so
/// far fixed as commitments.
///
/// When committed load alone breaks a cap, the plan is degraded rather than an
/// error: the broken rows are held at their committed load, every slot feeding
/// them gets `x = 0`, the rest is still optimized, and `feasible` is false.
pub fn replan(boundary: usize, inputs: &ReplanInputs) -> Result<AllocationPlan> {
    let mut problem = inputs.problem(boundary)?;
    match solve_allocation_with(&problem, &inputs.solve) {
        Err(Error::InfeasibleCommitments { .. }) => {
            problem.tolerate_overloads();
            let mut plan = solve_allocation_with(&problem, &inputs.solve)?;
            plan.feasible = false;
            Ok(plan)
        }
        other => other,
    }
}

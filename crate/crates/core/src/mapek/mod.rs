//! Monitor, Analyze, Plan, Execute over a knowledge base, one tick per slot boundary.
//!
//! Ordering rule: tick `b` runs after every event with `ts <= start(b)` and
//! before any later event. [`replay`] applies the same rule to a recorded log,
//! so a replayed day ends in the same state as the live one.

mod drift;
mod event;
mod knowledge;

pub use drift::{analyze, Analysis, Verdict};
pub use event::{event_log_string, read_event_log, write_event_log, AnonTag, Event, EventKind};
pub use knowledge::{
    DriftConfig, InsideParty, KnowledgeBase, LoopConfig, ObservedVisit, ReleasePolicy, Snapshot, Tallies, DEFAULT_LEAD_WINDOW,
    TICK_NODE_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::allocator::{replan, AllocationPlan};
use crate::error::{Error, Result};
use crate::noshow::fit_noshow;

/// Ingests one behavior event.
pub fn monitor(kb: &mut KnowledgeBase, event: Event) -> Result<()> {
    kb.monitor(event)
}

/// Refits flagged models, then re-solves the remaining horizon from `boundary`.
/// Returns whether a model was refit.
pub fn plan(kb: &mut KnowledgeBase, analysis: &Analysis, boundary: usize) -> Result<bool> {
    let mut refit = false;
    if analysis.verdict.duration() {
        let k = analysis.duration_scale.expect("duration drift carries a scale");
        let refitted = kb.durations.rescaled(k);
        kb.set_durations(refitted);
        refit = true;
    }
    if analysis.verdict.noshow() {
        if let Some(window) = drift::noshow_window(kb) {
            let edges = kb.noshow.edges().to_vec();
            kb.noshow = fit_noshow(&window, &edges)?;
            refit = true;
        }
    }
    if refit {
        kb.version += 1;
    }
    let sold = kb.sold_by_gap();
    let new_plan: AllocationPlan = replan(boundary, &kb.replan_inputs(&sold))?;
    kb.plan = Some(new_plan);
    kb.tallies.sold_since_plan.iter_mut().for_each(|v| *v = 0);
    Ok(refit)
}

/// The availability kiosks read.
pub fn execute(kb: &KnowledgeBase) -> Snapshot {
    kb.snapshot()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub boundary: usize,
    pub analysis: Analysis,
    pub refit: bool,
    pub version: u64,
    pub objective: u64,
    pub feasible: bool,
    pub snapshot: Snapshot,
}

/// Analyze, plan and execute at a slot boundary.
pub fn tick(kb: &mut KnowledgeBase, boundary: usize) -> Result<TickReport> {
    let n = kb.num_slots();
    if boundary >= n {
        return Err(Error::invariant("tick.boundary", format!("boundary {boundary} outside the {n}-slot day")));
    }
    if let Some(last) = kb.last_tick {
        if boundary <= last {
            return Err(Error::DoubleTick { boundary, last });
        }
    }
    kb.last_tick = Some(boundary);
    kb.now = kb.now.max(kb.config.grid.slot_start_seconds(boundary));
    let analysis = analyze(kb);
    let refit = plan(kb, &analysis, boundary)?;
    let snapshot = execute(kb);
    let plan = kb.plan.as_ref().expect("plan was just stored");
    Ok(TickReport { boundary, analysis, refit, version: kb.version, objective: plan.objective, feasible: plan.feasible, snapshot })
}

/// Folds a day's log into `kb`, firing every tick at its place in the stream.
pub fn replay(kb: &mut KnowledgeBase, events: &[Event]) -> Result<Vec<TickReport>> {
    let last = kb.num_slots() - 1;
    replay_through(kb, events, last)
}

/// [`replay`] that stops before the first event after tick `last_boundary`.
pub fn replay_through(kb: &mut KnowledgeBase, events: &[Event], last_boundary: usize) -> Result<Vec<TickReport>> {
    let n = kb.num_slots();
    if last_boundary >= n {
        return Err(Error::invariant("replay.last_boundary", format!("boundary {last_boundary} outside the {n}-slot day")));
    }
    let grid = kb.config.grid;
    let mut next = kb.last_tick.map_or(0, |b| b + 1);
    let mut reports = Vec::new();
    for event in events {
        while next < n && grid.slot_start_seconds(next) < event.ts {
            if next > last_boundary {
                return Ok(reports);
            }
            reports.push(tick(kb, next)?);
            next += 1;
        }
        kb.monitor(event.clone())?;
    }
    while next <= last_boundary {
        reports.push(tick(kb, next)?);
        next += 1;
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duration::DurationMatrix;
    use crate::noshow::NoShowModel;
    use crate::time::SlotGrid;

    fn kb() -> KnowledgeBase {
        let grid = SlotGrid::new(15, 8, 480).unwrap();
        let durations = DurationMatrix::uniform_rows(8, &[0.2, 0.5, 0.3]).unwrap();
        let noshow = NoShowModel::from_rates(vec![0, 2], vec![0.1, 0.2]).unwrap();
        let mut config = LoopConfig::new(grid, 30, 12);
        config.overbooking = false;
        KnowledgeBase::new(config, durations, noshow).unwrap()
    }

    #[test]
    fn entry_increments_tally() {
        let mut kb = kb();
        kb.monitor(Event::entry(10.0, 5, 3, AnonTag(1))).unwrap();
        assert_eq!(kb.tallies.entered[5], 3);
    }

    #[test]
    fn out_of_order_rejected() {
        let mut kb = kb();
        kb.monitor(Event::booking(100.0, 2, 1, 2)).unwrap();
        assert!(matches!(kb.monitor(Event::booking(99.0, 2, 1, 2)), Err(Error::OutOfOrderEvent { .. })));
    }

    #[test]
    fn orphan_exit_is_tallied_apart() {
        let mut kb = kb();
        kb.monitor(Event::exit(10.0, 1, 4, AnonTag(77))).unwrap();
        assert_eq!(kb.tallies.orphan_exits, 4);
        assert_eq!(kb.tallies.exited, vec![0; 8]);
        assert!(kb.visits.is_empty());
    }

    #[test]
    fn double_tick_rejected() {
        let mut kb = kb();
        tick(&mut kb, 0).unwrap();
        tick(&mut kb, 1).unwrap();
        assert!(matches!(tick(&mut kb, 1), Err(Error::DoubleTick { boundary: 1, last: 1 })));
        assert!(matches!(tick(&mut kb, 0), Err(Error::DoubleTick { .. })));
    }

    #[test]
    fn empty_history_has_no_drift() {
        assert_eq!(analyze(&kb()).verdict, Verdict::None);
    }

    #[test]
    fn execute_subtracts_sales_and_floors() {
        let mut kb = kb();
        tick(&mut kb, 0).unwrap();
        let x = kb.plan.as_ref().unwrap().issuable.clone();
        let s = (0..8).find(|&s| x[s] >= 3).unwrap();
        kb.monitor(Event::booking(1.0, s, 3, s as u32)).unwrap();
        assert_eq!(execute(&kb).availability[s], x[s] - 3);
        kb.monitor(Event::booking(2.0, s, x[s], s as u32)).unwrap();
        assert_eq!(execute(&kb).availability[s], 0);
        assert!(execute(&kb).total() <= kb.plan.as_ref().unwrap().objective);
    }

    #[test]
    fn replanning_without_change_is_idempotent() {
        let mut kb = kb();
        tick(&mut kb, 0).unwrap();
        let first = kb.plan.clone();
        let a = analyze(&kb);
        assert!(!plan(&mut kb, &a, 0).unwrap());
        assert_eq!(kb.plan, first);
    }

    #[test]
    fn release_window_masks_later_slots() {
        let mut kb = kb();
        kb.config.release = ReleasePolicy::SpreadOverDay { lead_slots: 2 };
        tick(&mut kb, 0).unwrap();
        let snap = execute(&kb);
        assert!(snap.availability[2..].iter().all(|&v| v == 0));
        assert!(snap.availability[0] > 0);
    }
}

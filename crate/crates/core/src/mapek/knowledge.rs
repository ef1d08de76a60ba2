use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::event::{AnonTag, Event, EventKind};
use crate::allocator::{AllocationPlan, ReplanInputs, SolveOptions};
use crate::duration::{survival, DurationMatrix, SurvivalMatrix, VisitRecord};
use crate::error::{Error, Result};
use crate::noshow::{NoShowModel, TicketRecord, DEFAULT_SAFETY_MARGIN};
use crate::time::SlotGrid;

pub const DEFAULT_LEAD_WINDOW: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReleasePolicy {
    /// Every slot of the day is bookable from opening.
    AllAtOpen,
    /// Only slots within `lead_slots` of the current slot are bookable.
    SpreadOverDay { lead_slots: usize },
}

impl ReleasePolicy {
    pub fn released(&self, current_slot: usize, slot: usize) -> bool {
        match *self {
            ReleasePolicy::AllAtOpen => slot >= current_slot,
            ReleasePolicy::SpreadOverDay { lead_slots } => slot >= current_slot && slot - current_slot < lead_slots,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReleasePolicy::AllAtOpen => "all_at_open",
            ReleasePolicy::SpreadOverDay { .. } => "spread_over_day",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    /// Completed visits the duration window must hold.
    pub duration_window: usize,
    /// Relative deviation of the window's mean duration that counts as drift.
    pub duration_threshold: f64,
    /// Resolved tickets in the no-show window.
    pub noshow_window: usize,
    pub noshow_threshold: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self { duration_window: 200, duration_threshold: 0.2, noshow_window: 500, noshow_threshold: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub grid: SlotGrid,
    pub occupancy_cap: u32,
    pub entry_cap: u32,
    pub overbooking: bool,
    pub safety_margin: f64,
    pub release: ReleasePolicy,
    pub drift: DriftConfig,
    #[serde(default = "default_tick_solve")]
    pub solve: SolveOptions,
}

/// Per-tick solver budget. The loop re-solves at every boundary, so it trades
/// a certified optimum for a bounded, deterministic cost.
pub const TICK_NODE_LIMIT: u64 = 200;

fn default_tick_solve() -> SolveOptions {
    SolveOptions { node_limit: TICK_NODE_LIMIT }
}

impl LoopConfig {
    pub fn new(grid: SlotGrid, occupancy_cap: u32, entry_cap: u32) -> Self {
        Self {
            grid,
            occupancy_cap,
            entry_cap,
            overbooking: true,
            safety_margin: DEFAULT_SAFETY_MARGIN,
            release: ReleasePolicy::AllAtOpen,
            drift: DriftConfig::default(),
            solve: default_tick_solve(),
        }
    }
}

/// A finished visit reconstructed from an entry/exit pair. `censored` marks
/// visitors flushed at closing, whose true duration is at least the recorded one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedVisit {
    pub entry_slot: usize,
    pub duration_slots: usize,
    pub group_size: u32,
    pub censored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsideParty {
    pub entry_slot: usize,
    pub group_size: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tallies {
    /// Persons booked per visit slot.
    pub sold: Vec<u32>,
    /// Persons booked per visit slot, keyed by booking gap.
    pub sold_by_gap: Vec<BTreeMap<u32, u32>>,
    pub sold_since_plan: Vec<u32>,
    pub shows: Vec<u32>,
    pub noshows: Vec<u32>,
    pub entered: Vec<u32>,
    pub exited: Vec<u32>,
    /// Persons in exit events without a matching entry.
    pub orphan_exits: u32,
    pub last_count: Option<u32>,
}

impl Tallies {
    fn new(n: usize) -> Self {
        Self {
            sold: vec![0; n],
            sold_by_gap: vec![BTreeMap::new(); n],
            sold_since_plan: vec![0; n],
            shows: vec![0; n],
            noshows: vec![0; n],
            entered: vec![0; n],
            exited: vec![0; n],
            orphan_exits: 0,
            last_count: None,
        }
    }
}

/// Current availability as kiosks read it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub boundary: usize,
    pub version: u64,
    pub availability: Vec<u32>,
}

impl Snapshot {
    pub fn total(&self) -> u64 {
        self.availability.iter().map(|&v| u64::from(v)).sum()
    }
}

/// Models, plan, and the day's behavior record. Single writer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub config: LoopConfig,
    pub durations: DurationMatrix,
    pub survival: SurvivalMatrix,
    pub noshow: NoShowModel,
    pub version: u64,
    pub plan: Option<AllocationPlan>,
    pub history: Vec<Event>,
    pub tallies: Tallies,
    /// Entry/exit pairing table; the only place tags are held.
    pub(super) inside: BTreeMap<AnonTag, InsideParty>,
    pub visits: Vec<ObservedVisit>,
    pub tickets: Vec<TicketRecord>,
    /// Latest known time: the last event or the last tick boundary.
    pub now: f64,
    pub last_ts: Option<f64>,
    pub last_tick: Option<usize>,
}

impl KnowledgeBase {
    pub fn new(config: LoopConfig, durations: DurationMatrix, noshow: NoShowModel) -> Result<Self> {
        config.grid.validate()?;
        let n = config.grid.num_slots;
        if durations.num_slots() != n {
            return Err(Error::ShapeMismatch(format!("duration matrix has {} rows, grid has {n} slots", durations.num_slots())));
        }
        if !(0.0..=1.0).contains(&config.safety_margin) {
            return Err(Error::invariant("policy.safety_margin", "must lie in [0, 1]"));
        }
        let survival = survival(&durations);
        Ok(Self {
            config,
            durations,
            survival,
            noshow,
            version: 0,
            plan: None,
            history: Vec::new(),
            tallies: Tallies::new(n),
            inside: BTreeMap::new(),
            visits: Vec::new(),
            tickets: Vec::new(),
            now: 0.0,
            last_ts: None,
            last_tick: None,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.config.grid.num_slots
    }

    /// Clears the day's record; models and version carry over.
    pub fn begin_day(&mut self) {
        let n = self.num_slots();
        self.plan = None;
        self.history.clear();
        self.tallies = Tallies::new(n);
        self.inside.clear();
        self.visits.clear();
        self.tickets.clear();
        self.now = 0.0;
        self.last_ts = None;
        self.last_tick = None;
    }

    pub fn set_durations(&mut self, durations: DurationMatrix) {
        self.survival = survival(&durations);
        self.durations = durations;
    }

    pub fn inside_parties(&self) -> impl Iterator<Item = &InsideParty> {
        self.inside.values()
    }

    pub fn persons_inside(&self) -> u32 {
        self.inside.values().map(|p| p.group_size).sum()
    }

    /// The slot the clock is in; the last slot once the day is over.
    pub fn current_slot(&self) -> usize {
        self.config.grid.slot_at_seconds(self.now).unwrap_or(self.num_slots())
    }

    /// Ingests one event: appends it and updates the tallies. Models are untouched.
    pub fn monitor(&mut self, event: Event) -> Result<()> {
        event.validate()?;
        if let Some(last) = self.last_ts {
            if event.ts < last {
                return Err(Error::OutOfOrderEvent { ts: event.ts, last });
            }
        }
        let n = self.num_slots();
        if event.slot >= n {
            return Err(Error::invariant(format!("event.{}", event.kind), format!("slot {} outside the {n}-slot grid", event.slot)));
        }
        let s = event.slot;
        let g = event.group_size;
        let t = &mut self.tallies;
        match event.kind {
            EventKind::Booking => {
                let gap = event.gap_slots.expect("validated");
                t.sold[s] += g;
                t.sold_since_plan[s] += g;
                *t.sold_by_gap[s].entry(gap).or_insert(0) += g;
            }
            EventKind::Show | EventKind::Noshow => {
                let gap = event.gap_slots.expect("validated") as usize;
                let showed = event.kind == EventKind::Show;
                if showed {
                    t.shows[s] += g;
                } else {
                    t.noshows[s] += g;
                }
                let booking_slot = s.checked_sub(gap).ok_or_else(|| Error::invariant("event.gap_slots", "gap reaches before opening"))?;
                self.tickets.push(TicketRecord { booking_slot, visit_slot: s, group_size: g, showed });
            }
            EventKind::Entry => {
                let tag = event.anon_tag.expect("validated");
                t.entered[s] += g;
                self.inside.insert(tag, InsideParty { entry_slot: s, group_size: g });
            }
            EventKind::Exit => {
                let tag = event.anon_tag.expect("validated");
                match self.inside.remove(&tag) {
                    Some(party) if party.entry_slot <= s => {
                        t.exited[s] += party.group_size;
                        let censored = event.ts >= self.config.grid.day_seconds();
                        self.visits.push(ObservedVisit {
                            entry_slot: party.entry_slot,
                            duration_slots: s - party.entry_slot + 1,
                            group_size: party.group_size,
                            censored,
                        });
                    }
                    Some(party) => {
                        // exit slot before the entry slot: not a usable pairing
                        self.inside.insert(tag, party);
                        t.orphan_exits += g;
                    }
                    None => t.orphan_exits += g,
                }
            }
            EventKind::CountUpdate => t.last_count = Some(g),
        }
        self.now = self.now.max(event.ts);
        self.last_ts = Some(event.ts);
        self.history.push(event);
        Ok(())
    }

    /// Completed visits as duration-fit records; flushed visits keep their truncated duration.
    pub fn visit_records(&self) -> Vec<VisitRecord> {
        self.visits
            .iter()
            .map(|v| VisitRecord { entry_slot: v.entry_slot, duration_slots: v.duration_slots, group_size: v.group_size })
            .collect()
    }

    pub(super) fn sold_by_gap(&self) -> Vec<Vec<(u32, u32)>> {
        self.tallies.sold_by_gap.iter().map(|m| m.iter().map(|(&k, &v)| (k, v)).collect()).collect()
    }

    pub(super) fn replan_inputs<'a>(&'a self, sold: &'a [Vec<(u32, u32)>]) -> ReplanInputs<'a> {
        ReplanInputs {
            grid: self.config.grid,
            occupancy_cap: self.config.occupancy_cap,
            entry_cap: self.config.entry_cap,
            survival: &self.survival,
            noshow: &self.noshow,
            overbooking: self.config.overbooking,
            safety_margin: self.config.safety_margin,
            entered: &self.tallies.entered,
            sold,
            issuance_bound: None,
            solve: self.config.solve,
        }
    }

    /// Availability as of now: plan minus sales since the solve, floored at
    /// zero, masked to the slots the release policy currently exposes.
    pub fn snapshot(&self) -> Snapshot {
        let n = self.num_slots();
        let boundary = self.last_tick.unwrap_or(0);
        let current = self.current_slot().max(boundary);
        let availability = match &self.plan {
            None => vec![0; n],
            Some(plan) => (0..n)
                .map(|s| {
                    if self.config.release.released(current, s) {
                        plan.issuable[s].saturating_sub(self.tallies.sold_since_plan[s])
                    } else {
                        0
                    }
                })
                .collect(),
        };
        Snapshot { boundary, version: self.version, availability }
    }

    /// Canonical serialization; equal states give equal strings.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("knowledge base serializes")
    }
}

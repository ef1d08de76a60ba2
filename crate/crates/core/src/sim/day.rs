use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::config::ScenarioConfig;
use super::result::{DayTotals, SimResult, SlotSeries, TickSummary};
use crate::error::Result;
use crate::kiosk::{KioskQueue, WaitSummary};
use crate::mapek::{self, AnonTag, Event, KnowledgeBase};
use crate::noshow::NoShowModel;
use crate::time::SlotClasses;

// independent random streams, so a policy change does not perturb arrivals
const ARRIVAL_STREAM: u64 = 1;
const BEHAVIOR_STREAM: u64 = 2;

/// Where an intra-slot time falls, as a fraction of the remaining interval.
const EARLIEST: f64 = 0.05;
const SPREAD: f64 = 0.9;

#[derive(Debug, Clone, Copy)]
struct Party {
    arrival: f64,
    size: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Action {
    Booking { party: usize },
    Resolve { slot: usize, size: u32, gap: u32, showed: bool },
    Enter { slot: usize, size: u32, gap: u32, tag: u64 },
    Exit { slot: usize, size: u32, tag: u64 },
    Count { slot: usize },
    Tick { boundary: usize },
}

impl Action {
    /// Order among actions at the same instant: behavior, then counter, then tick.
    fn phase(&self) -> u8 {
        match self {
            Action::Count { .. } => 1,
            Action::Tick { .. } => 2,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scheduled {
    time: f64,
    phase: u8,
    seq: u64,
    action: Action,
}

impl Eq for Scheduled {}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (time, phase, seq)
        other.time.total_cmp(&self.time).then(other.phase.cmp(&self.phase)).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Queue {
    heap: BinaryHeap<Scheduled>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: f64, action: Action) {
        self.heap.push(Scheduled { time, phase: action.phase(), seq: self.seq, action });
        self.seq += 1;
    }
}

fn draw_arrivals(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Party> {
    let grid = &config.grid;
    let demand = &config.demand;
    let len = grid.slot_seconds();
    let mean_party = demand.mean_party_size();
    let mut parties = Vec::new();
    for s in 0..grid.num_slots {
        let persons = demand.arrivals_per_slot[s] * config.context.demand_factor(s);
        let rate = persons / mean_party;
        let count = if rate > 0.0 { Poisson::new(rate).expect("positive rate").sample(rng) as usize } else { 0 };
        let start = grid.slot_start_seconds(s);
        for _ in 0..count {
            let arrival = start + rng.random::<f64>() * len;
            let size =
                if rng.random_bool(demand.group_fraction) { rng.random_range(demand.group_size_min..=demand.group_size_max) } else { 1 };
            parties.push(Party { arrival, size });
        }
    }
    parties.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));
    parties
}

fn within(from: f64, to: f64, rng: &mut ChaCha8Rng) -> f64 {
    from + (to - from) * (EARLIEST + SPREAD * rng.random::<f64>())
}

/// Seed of day `day` in a multi-day run; day 0 uses the scenario seed itself.
pub fn day_seed(seed: u64, day: usize) -> u64 {
    seed.wrapping_add((day as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Simulates one day against `kb`, which is reset for the day first.
pub(crate) fn simulate(config: &ScenarioConfig, kb: &mut KnowledgeBase, seed: u64, day: usize) -> Result<SimResult> {
    config.validate()?;
    kb.begin_day();
    let grid = config.grid;
    let n = grid.num_slots;
    let len = grid.slot_seconds();
    let day_end = grid.day_seconds();
    let classes: SlotClasses = config.slot_classes()?;
    let truth_noshow: NoShowModel = config.noshow.model()?;
    let truth = &config.durations;
    let slot_minutes = f64::from(grid.slot_length_minutes);

    let mut arrival_rng = ChaCha8Rng::seed_from_u64(seed);
    arrival_rng.set_stream(ARRIVAL_STREAM);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BEHAVIOR_STREAM);

    let parties = draw_arrivals(config, &mut arrival_rng);
    let mut kiosks = KioskQueue::new(config.fleet()?)?;
    let service = config.kiosks.service_seconds;
    let mut waits = Vec::with_capacity(parties.len());

    let mut queue = Queue { heap: BinaryHeap::new(), seq: 0 };
    for b in 0..n {
        queue.push(grid.slot_start_seconds(b), Action::Tick { boundary: b });
        queue.push(grid.slot_start_seconds(b + 1), Action::Count { slot: b });
    }
    for (i, p) in parties.iter().enumerate() {
        let start = kiosks.serve(p.arrival);
        waits.push(start - p.arrival);
        queue.push(start + service, Action::Booking { party: i });
    }

    let mut series = SlotSeries::zeros(n);
    let mut totals = DayTotals { arrivals: parties.iter().map(|p| u64::from(p.size)).sum(), ..DayTotals::default() };
    let mut ticks = Vec::with_capacity(n);
    let mut gaps = Vec::new();
    let mut next_tag: u64 = 0;
    let mut inside: u32 = 0;

    while let Some(Scheduled { time, action, .. }) = queue.heap.pop() {
        match action {
            Action::Tick { boundary } => {
                // what each open slot could still take at this plan, plus what it already sold
                let report = mapek::tick(kb, boundary)?;
                for s in boundary..n {
                    let offered = kb.tallies.sold[s] + report.snapshot.availability[s];
                    series.availability[s] = series.availability[s].max(offered);
                }
                ticks.push(TickSummary::from_report(&report));
            }
            Action::Count { slot } => {
                kb.monitor(Event::count_update(time, slot, inside))?;
            }
            Action::Booking { party } => {
                let size = parties[party].size;
                let Some(now_slot) = grid.slot_at_seconds(time) else {
                    totals.rejections += u64::from(size);
                    continue;
                };
                let snapshot = mapek::execute(kb);
                let Some(slot) = (now_slot..n).find(|&s| snapshot.availability[s] >= size) else {
                    totals.rejections += u64::from(size);
                    continue;
                };
                let gap = (slot - now_slot) as u32;
                kb.monitor(Event::booking(time, slot, size, gap))?;
                series.sales[slot] += size;
                totals.issued += u64::from(size);
                gaps.push(f64::from(gap));
                let showed = !rng.random_bool(truth_noshow.predict_noshow(gap, slot));
                if showed {
                    let from = if slot == now_slot { time } else { grid.slot_start_seconds(slot) };
                    let at = within(from, grid.slot_start_seconds(slot + 1), &mut rng);
                    queue.push(at, Action::Enter { slot, size, gap, tag: next_tag });
                    next_tag += 1;
                } else {
                    queue.push(grid.slot_start_seconds(slot + 1), Action::Resolve { slot, size, gap, showed: false });
                }
            }
            Action::Resolve { slot, size, gap, showed } => {
                kb.monitor(Event::resolution(time, slot, size, gap, showed))?;
                totals.noshows += u64::from(size);
            }
            Action::Enter { slot, size, gap, tag } => {
                kb.monitor(Event::resolution(time, slot, size, gap, true))?;
                kb.monitor(Event::entry(time, slot, size, AnonTag(tag)))?;
                totals.shows += u64::from(size);
                series.entries[slot] += size;
                inside += size;

                let class = classes.class_of(slot)?;
                let c = truth.class(class);
                let mut scale = if size > 1 { config.demand.group_duration_multiplier } else { 1.0 };
                if let Some(shift) = truth.shift {
                    if slot >= shift.from_slot {
                        scale *= shift.factor;
                    }
                }
                let minutes = if c.sd_minutes > 0.0 {
                    Normal::new(c.mean_minutes * scale, c.sd_minutes * scale).expect("validated").sample(&mut rng)
                } else {
                    c.mean_minutes * scale
                };
                let d = truth.slots_for(minutes, slot_minutes);
                let exit_slot = slot + d - 1;
                let (exit_slot, at) = if exit_slot >= n {
                    (n - 1, day_end)
                } else if exit_slot == slot {
                    (exit_slot, within(time, grid.slot_start_seconds(slot + 1), &mut rng))
                } else {
                    let start = grid.slot_start_seconds(exit_slot);
                    (exit_slot, within(start, start + len, &mut rng))
                };
                for occ in &mut series.occupancy[slot..=exit_slot] {
                    *occ += size;
                }
                queue.push(at, Action::Exit { slot: exit_slot, size, tag });
            }
            Action::Exit { slot, size, tag } => {
                kb.monitor(Event::exit(time, slot, size, AnonTag(tag)))?;
                series.exits[slot] += size;
                inside -= size;
            }
        }
    }

    let wait_summary = WaitSummary::from_waits(&waits);
    let mean_gap = if gaps.is_empty() { None } else { Some(gaps.iter().sum::<f64>() / gaps.len() as f64) };
    let result = SimResult {
        name: config.name.clone(),
        day,
        seed,
        policy: config.policy.release_policy().name().to_string(),
        slots: series,
        totals,
        waits: wait_summary,
        mean_gap,
        final_version: kb.version,
        ticks,
        events: kb.history.clone(),
    };
    Ok(result)
}

//! Discrete-event visitor simulation driving the control loop.
//!
//! Parties arrive as a per-slot Poisson process, queue at the kiosks, book the
//! earliest slot with room for the whole party, show up or not according to
//! the ground-truth gap curve, enter, dwell and leave. Every behavior is fed to
//! the knowledge base as an event, and the loop ticks at each slot boundary.

mod config;
mod day;
mod result;

pub use config::{
    Adaptation, Capacity, ClassBoundaries, ClassDuration, Demand, DurationShift, DurationTruth, Kiosks, NoShowTruth, Policy, ReleaseKind,
    ScenarioConfig,
};
pub use day::day_seed;
pub use result::{qoe_summary, DayTotals, Qoe, SimResult, SlotSeries, TickSummary};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::duration::{DurationMatrix, VisitRecord};
use crate::error::{Error, Result};
use crate::mapek::KnowledgeBase;
use crate::noshow::{NoShowModel, TicketRecord};

/// A knowledge base seeded with the scenario's ground truth as planning models.
pub fn truthful_knowledge_base(config: &ScenarioConfig) -> Result<KnowledgeBase> {
    config.validate()?;
    KnowledgeBase::new(config.loop_config(), config.duration_matrix()?, config.noshow.model()?)
}

/// One day with a fresh, truthful knowledge base.
pub fn run_day(config: &ScenarioConfig) -> Result<SimResult> {
    let mut kb = truthful_knowledge_base(config)?;
    run_day_with(config, &mut kb, config.seed, 0)
}

/// One day against an existing knowledge base (reset for the day, models kept).
pub fn run_day_with(config: &ScenarioConfig, kb: &mut KnowledgeBase, seed: u64, day: usize) -> Result<SimResult> {
    day::simulate(config, kb, seed, day)
}

/// Per-day changes for [`run_days`]; `None` keeps the scenario's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DayOverride {
    pub release: Option<ReleaseKind>,
    pub lead_window_slots: Option<usize>,
    pub overbooking: Option<bool>,
    pub demand_multiplier: Option<f64>,
}

impl DayOverride {
    pub fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut c = base.clone();
        if let Some(r) = self.release {
            c.policy.release = r;
        }
        if let Some(l) = self.lead_window_slots {
            c.policy.lead_window_slots = l;
        }
        if let Some(o) = self.overbooking {
            c.policy.overbooking = o;
        }
        if let Some(m) = self.demand_multiplier {
            c.context.demand_multiplier = m;
        }
        c
    }
}

/// Consecutive days sharing one knowledge base. Day `i` uses
/// `overrides[i]` when present and seed [`day_seed`]`(seed, i)`.
pub fn run_days(config: &ScenarioConfig, num_days: usize, overrides: &[DayOverride]) -> Result<Vec<SimResult>> {
    let mut kb = truthful_knowledge_base(config)?;
    run_days_in(config, &mut kb, num_days, overrides)
}

/// [`run_days`] against a caller-owned knowledge base, which keeps the final models.
pub fn run_days_in(config: &ScenarioConfig, kb: &mut KnowledgeBase, num_days: usize, overrides: &[DayOverride]) -> Result<Vec<SimResult>> {
    if num_days == 0 {
        return Err(Error::invariant("days", "at least one day"));
    }
    (0..num_days)
        .map(|i| {
            let day_config = overrides.get(i).map_or_else(|| config.clone(), |o| o.apply(config));
            day_config.validate()?;
            let loop_config = day_config.loop_config();
            kb.config.release = loop_config.release;
            kb.config.overbooking = loop_config.overbooking;
            kb.config.safety_margin = loop_config.safety_margin;
            run_day_with(&day_config, kb, day_seed(config.seed, i), i)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Records {
    pub visits: Vec<VisitRecord>,
    pub tickets: Vec<TicketRecord>,
}

fn pick(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// `n` visits drawn from `matrix`, with entry slots weighted by `entry_weights`
/// (uniform when they are all zero) and groups of `group_size` at `group_fraction`.
pub fn sample_visits(
    matrix: &DurationMatrix,
    entry_weights: &[f64],
    n: usize,
    group_fraction: f64,
    group_size: (u32, u32),
    rng: &mut ChaCha8Rng,
) -> Vec<VisitRecord> {
    let slots = matrix.num_slots();
    let uniform = vec![1.0; slots];
    let weights = if entry_weights.iter().sum::<f64>() > 0.0 { entry_weights } else { &uniform };
    let total: f64 = weights.iter().sum();
    (0..n)
        .map(|_| {
            let entry_slot = pick(weights, total, rng);
            let duration_slots = pick(matrix.row(entry_slot), 1.0, rng) + 1;
            let group_size = if rng.random_bool(group_fraction) { rng.random_range(group_size.0..=group_size.1) } else { 1 };
            VisitRecord { entry_slot, duration_slots, group_size }
        })
        .collect()
}

/// `n` tickets with visit slots weighted by `visit_weights`, booking slots
/// uniform over the day up to the visit, and outcomes drawn from `truth`.
pub fn sample_tickets(truth: &NoShowModel, visit_weights: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<TicketRecord> {
    let slots = visit_weights.len();
    let uniform = vec![1.0; slots];
    let weights = if visit_weights.iter().sum::<f64>() > 0.0 { visit_weights } else { &uniform };
    let total: f64 = weights.iter().sum();
    (0..n)
        .map(|_| {
            let visit_slot = pick(weights, total, rng);
            let booking_slot = rng.random_range(0..=visit_slot);
            let gap = (visit_slot - booking_slot) as u32;
            let showed = !rng.random_bool(truth.predict_noshow(gap, visit_slot));
            TicketRecord { booking_slot, visit_slot, group_size: 1, showed }
        })
        .collect()
}

/// Visit and ticket corpora from the scenario's ground truth, without the control loop.
pub fn generate_records(config: &ScenarioConfig, seed: u64, n: usize) -> Result<Records> {
    if n == 0 {
        return Err(Error::invariant("n", "at least one record"));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = &config.demand;
    let visits = sample_visits(
        &config.duration_matrix()?,
        &d.arrivals_per_slot,
        n,
        d.group_fraction,
        (d.group_size_min, d.group_size_max),
        &mut rng,
    );
    let tickets = sample_tickets(&config.noshow.model()?, &d.arrivals_per_slot, n, &mut rng);
    Ok(Records { visits, tickets })
}

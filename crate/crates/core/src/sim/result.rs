use serde::{Deserialize, Serialize};

use crate::kiosk::WaitSummary;
use crate::mapek::{Event, TickReport, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSeries {
    /// Most persons the plan ever accepted for the slot (sold plus still available).
    pub availability: Vec<u32>,
    pub sales: Vec<u32>,
    pub entries: Vec<u32>,
    pub exits: Vec<u32>,
    /// Persons inside during the slot.
    pub occupancy: Vec<u32>,
}

impl SlotSeries {
    pub fn zeros(n: usize) -> Self {
        Self { availability: vec![0; n], sales: vec![0; n], entries: vec![0; n], exits: vec![0; n], occupancy: vec![0; n] }
    }
}

/// Daily totals in persons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DayTotals {
    pub arrivals: u64,
    pub issued: u64,
    pub shows: u64,
    pub noshows: u64,
    pub rejections: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSummary {
    pub boundary: usize,
    pub verdict: Verdict,
    pub duration_deviation: Option<f64>,
    pub noshow_deviation: Option<f64>,
    pub refit: bool,
    pub version: u64,
    pub objective: u64,
    pub feasible: bool,
    pub availability: Vec<u32>,
}

impl TickSummary {
    pub fn from_report(report: &TickReport) -> Self {
        Self {
            boundary: report.boundary,
            verdict: report.analysis.verdict,
            duration_deviation: report.analysis.duration_deviation,
            noshow_deviation: report.analysis.noshow_deviation,
            refit: report.refit,
            version: report.version,
            objective: report.objective,
            feasible: report.feasible,
            availability: report.snapshot.availability.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub name: String,
    pub day: usize,
    pub seed: u64,
    pub policy: String,
    pub slots: SlotSeries,
    pub totals: DayTotals,
    pub waits: WaitSummary,
    /// Mean booking-to-visit gap in slots over bookings; `None` without bookings.
    pub mean_gap: Option<f64>,
    pub final_version: u64,
    pub ticks: Vec<TickSummary>,
    pub events: Vec<Event>,
}

impl SimResult {
    /// Per-person no-show fraction of issued tickets.
    pub fn noshow_rate(&self) -> Option<f64> {
        (self.totals.issued > 0).then(|| self.totals.noshows as f64 / self.totals.issued as f64)
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("result serializes")
    }

    /// Broken person-count balances, empty when the day is consistent.
    pub fn conservation_errors(&self) -> Vec<String> {
        let t = &self.totals;
        let sum = |v: &[u32]| v.iter().map(|&x| u64::from(x)).sum::<u64>();
        let (entries, exits, sales) = (sum(&self.slots.entries), sum(&self.slots.exits), sum(&self.slots.sales));
        let mut errors = Vec::new();
        if t.issued != t.shows + t.noshows {
            errors.push(format!("issued {} != shows {} + no-shows {}", t.issued, t.shows, t.noshows));
        }
        if sales != t.issued {
            errors.push(format!("slot sales {sales} != issued {}", t.issued));
        }
        if entries != t.shows {
            errors.push(format!("entries {entries} != shows {}", t.shows));
        }
        if exits != entries {
            errors.push(format!("exits {exits} != entries {entries}"));
        }
        let mut inside = 0i64;
        for (s, occ) in self.slots.occupancy.iter().enumerate() {
            inside += i64::from(self.slots.entries[s]);
            if i64::from(*occ) != inside {
                errors.push(format!("slot {s}: occupancy {occ} != {inside} inside"));
            }
            inside -= i64::from(self.slots.exits[s]);
        }
        errors
    }
}

/// Quality-of-experience figures for one day. Ratios are `None` when undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qoe {
    pub mean_wait_seconds: f64,
    pub max_wait_seconds: f64,
    pub p95_wait_seconds: f64,
    pub rejection_fraction: Option<f64>,
    pub mean_gap_slots: Option<f64>,
    pub noshow_rate: Option<f64>,
}

pub fn qoe_summary(result: &SimResult) -> Qoe {
    let demand = result.totals.issued + result.totals.rejections;
    Qoe {
        mean_wait_seconds: result.waits.mean,
        max_wait_seconds: result.waits.max,
        p95_wait_seconds: result.waits.p95,
        rejection_fraction: (demand > 0).then(|| result.totals.rejections as f64 / demand as f64),
        mean_gap_slots: result.mean_gap,
        noshow_rate: result.noshow_rate(),
    }
}

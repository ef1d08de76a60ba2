use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::allocator::SolveOptions;
use crate::duration::{DurationMatrix, DEFAULT_MAX_DURATION};
use crate::error::{Error, Result};
use crate::kiosk::{KioskFleet, DEFAULT_SERVICE_SECONDS};
use crate::mapek::{DriftConfig, LoopConfig, ReleasePolicy, DEFAULT_LEAD_WINDOW, TICK_NODE_LIMIT};
use crate::noshow::{NoShowModel, DEFAULT_BUCKET_EDGES, DEFAULT_SAFETY_MARGIN};
use crate::time::{parse_wall_minute, ClassLabel, DayContext, SlotClasses, SlotGrid};

/// A simulated operating day: context, visitor behavior ground truth,
/// capacities, kiosk fleet and policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default)]
    pub grid: SlotGrid,
    #[serde(default)]
    pub classes: ClassBoundaries,
    #[serde(default)]
    pub context: DayContext,
    pub demand: Demand,
    pub durations: DurationTruth,
    #[serde(default)]
    pub noshow: NoShowTruth,
    pub capacity: Capacity,
    #[serde(default)]
    pub kiosks: Kiosks,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default)]
    pub adaptation: Adaptation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassBoundaries {
    /// Starts of late morning, afternoon and evening, as `HH:MM`.
    pub boundaries: [String; 3],
}

impl Default for ClassBoundaries {
    fn default() -> Self {
        Self { boundaries: ["10:30".into(), "13:00".into(), "16:00".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demand {
    /// Expected kiosk arrivals (persons) per slot.
    pub arrivals_per_slot: Vec<f64>,
    #[serde(default = "default_group_fraction")]
    pub group_fraction: f64,
    #[serde(default = "default_group_min")]
    pub group_size_min: u32,
    #[serde(default = "default_group_max")]
    pub group_size_max: u32,
    #[serde(default = "one")]
    pub group_duration_multiplier: f64,
}

fn default_group_fraction() -> f64 {
    0.05
}
fn default_group_min() -> u32 {
    6
}
fn default_group_max() -> u32 {
    15
}
fn one() -> f64 {
    1.0
}

impl Demand {
    /// Expected persons per arriving party.
    pub fn mean_party_size(&self) -> f64 {
        let group_mean = f64::from(self.group_size_min + self.group_size_max) / 2.0;
        (1.0 - self.group_fraction) + self.group_fraction * group_mean
    }
}

/// Normal dwell time in minutes, discretized to slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDuration {
    pub mean_minutes: f64,
    pub sd_minutes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationShift {
    /// Visitors entering at or after this slot stay longer.
    pub from_slot: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationTruth {
    #[serde(default = "default_max_duration")]
    pub max_duration_slots: usize,
    pub early_morning: ClassDuration,
    pub late_morning: ClassDuration,
    pub afternoon: ClassDuration,
    pub evening: ClassDuration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<DurationShift>,
}

fn default_max_duration() -> usize {
    DEFAULT_MAX_DURATION
}

impl DurationTruth {
    pub fn class(&self, label: ClassLabel) -> ClassDuration {
        match label {
            ClassLabel::EarlyMorning => self.early_morning,
            ClassLabel::LateMorning => self.late_morning,
            ClassLabel::Afternoon => self.afternoon,
            ClassLabel::Evening => self.evening,
        }
    }

    /// Slot count for a dwell of `minutes`: nearest slot, clipped to `1..=D_max`.
    pub fn slots_for(&self, minutes: f64, slot_minutes: f64) -> usize {
        let d = (minutes / slot_minutes).round();
        (d.max(1.0) as usize).min(self.max_duration_slots)
    }

    /// Exact distribution of [`Self::slots_for`] applied to the class's normal dwell.
    pub fn class_pmf(&self, label: ClassLabel, slot_minutes: f64) -> Vec<f64> {
        let c = self.class(label);
        let dmax = self.max_duration_slots;
        let mut pmf = vec![0.0; dmax];
        if c.sd_minutes == 0.0 {
            pmf[self.slots_for(c.mean_minutes, slot_minutes) - 1] = 1.0;
            return pmf;
        }
        let normal = Normal::new(c.mean_minutes, c.sd_minutes).expect("validated parameters");
        // round(m / len) = d  <=>  m in [(d - 0.5) len, (d + 0.5) len)
        let mut prev = 0.0;
        for (i, p) in pmf.iter_mut().enumerate().take(dmax - 1) {
            let upper = normal.cdf((i as f64 + 1.5) * slot_minutes);
            *p = upper - prev;
            prev = upper;
        }
        pmf[dmax - 1] = 1.0 - prev;
        pmf
    }

    /// Ground-truth duration matrix over the grid.
    pub fn matrix(&self, grid: &SlotGrid, classes: &SlotClasses) -> Result<DurationMatrix> {
        let len = f64::from(grid.slot_length_minutes);
        let pmfs: Vec<(ClassLabel, Vec<f64>)> = ClassLabel::ALL.iter().map(|&l| (l, self.class_pmf(l, len))).collect();
        DurationMatrix::from_class_pmfs(classes, &pmfs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoShowTruth {
    pub bucket_edges: Vec<u32>,
    /// No-show probability per gap bucket.
    pub rates: Vec<f64>,
}

impl Default for NoShowTruth {
    fn default() -> Self {
        Self { bucket_edges: DEFAULT_BUCKET_EDGES.to_vec(), rates: vec![0.06, 0.14, 0.22, 0.30] }
    }
}

impl NoShowTruth {
    pub fn model(&self) -> Result<NoShowModel> {
        NoShowModel::from_rates(self.bucket_edges.clone(), self.rates.clone())
    }
}

/// Signed so that a negative value in a file is reported as an invariant
/// violation rather than a type error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capacity {
    pub occupancy_cap: i64,
    #[serde(default = "default_entry_cap")]
    pub entry_cap: i64,
}

fn default_entry_cap() -> i64 {
    268
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kiosks {
    pub count: i64,
    pub service_seconds: f64,
}

impl Default for Kiosks {
    fn default() -> Self {
        Self { count: 7, service_seconds: DEFAULT_SERVICE_SECONDS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReleaseKind {
    AllAtOpen,
    SpreadOverDay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub overbooking: bool,
    pub safety_margin: f64,
    pub release: ReleaseKind,
    pub lead_window_slots: usize,
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            overbooking: true,
            safety_margin: DEFAULT_SAFETY_MARGIN,
            release: ReleaseKind::AllAtOpen,
            lead_window_slots: DEFAULT_LEAD_WINDOW,
        }
    }
}

impl Policy {
    pub fn release_policy(&self) -> ReleasePolicy {
        match self.release {
            ReleaseKind::AllAtOpen => ReleasePolicy::AllAtOpen,
            ReleaseKind::SpreadOverDay => ReleasePolicy::SpreadOverDay { lead_slots: self.lead_window_slots },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adaptation {
    pub duration_window: usize,
    pub duration_threshold: f64,
    pub noshow_window: usize,
    pub noshow_threshold: f64,
    /// Branch-and-bound nodes per re-solve.
    #[serde(default = "default_node_limit")]
    pub solver_node_limit: u64,
}

fn default_node_limit() -> u64 {
    TICK_NODE_LIMIT
}

impl Default for Adaptation {
    fn default() -> Self {
        let d = DriftConfig::default();
        Self {
            duration_window: d.duration_window,
            duration_threshold: d.duration_threshold,
            noshow_window: d.noshow_window,
            noshow_threshold: d.noshow_threshold,
            solver_node_limit: TICK_NODE_LIMIT,
        }
    }
}

fn check_probability(field: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invariant(field, format!("{p} is not a probability")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = &self.grid;
        grid.validate()?;
        self.slot_classes()?;
        self.context.validate(grid)?;

        let d = &self.demand;
        if d.arrivals_per_slot.len() != grid.num_slots {
            return Err(Error::invariant(
                "demand.arrivals_per_slot",
                format!("{} values for {} slots", d.arrivals_per_slot.len(), grid.num_slots),
            ));
        }
        if let Some(i) = d.arrivals_per_slot.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::invariant(format!("demand.arrivals_per_slot[{i}]"), "must be a finite count >= 0"));
        }
        check_probability("demand.group_fraction", d.group_fraction)?;
        if d.group_size_min < 6 {
            return Err(Error::invariant("demand.group_size_min", "groups have at least 6 members"));
        }
        if d.group_size_max < d.group_size_min {
            return Err(Error::invariant("demand.group_size_max", "must be >= group_size_min"));
        }
        if !(d.group_duration_multiplier > 0.0 && d.group_duration_multiplier.is_finite()) {
            return Err(Error::invariant("demand.group_duration_multiplier", "must be positive"));
        }

        let t = &self.durations;
        if t.max_duration_slots == 0 {
            return Err(Error::invariant("durations.max_duration_slots", "must be >= 1"));
        }
        for label in ClassLabel::ALL {
            let c = t.class(label);
            if !(c.mean_minutes > 0.0 && c.mean_minutes.is_finite()) {
                return Err(Error::invariant(format!("durations.{label}.mean_minutes"), "must be positive"));
            }
            if !(c.sd_minutes >= 0.0 && c.sd_minutes.is_finite()) {
                return Err(Error::invariant(format!("durations.{label}.sd_minutes"), "must be >= 0"));
            }
        }
        if let Some(shift) = t.shift {
            if !(shift.factor > 0.0 && shift.factor.is_finite()) {
                return Err(Error::invariant("durations.shift.factor", "must be positive"));
            }
            if shift.from_slot >= grid.num_slots {
                return Err(Error::invariant("durations.shift.from_slot", "outside the grid"));
            }
        }

        if self.noshow.rates.len() != self.noshow.bucket_edges.len() {
            return Err(Error::invariant("noshow.rates", "one rate per bucket edge"));
        }
        for (i, &r) in self.noshow.rates.iter().enumerate() {
            check_probability(&format!("noshow.rates[{i}]"), r)?;
        }
        self.noshow.model()?;

        let cap = self.capacity;
        if !(0..=i64::from(u32::MAX)).contains(&cap.occupancy_cap) {
            return Err(Error::invariant("capacity.occupancy_cap (C_max)", format!("{} must be >= 0", cap.occupancy_cap)));
        }
        if !(0..=i64::from(u32::MAX)).contains(&cap.entry_cap) {
            return Err(Error::invariant("capacity.entry_cap (E_max)", format!("{} must be >= 0", cap.entry_cap)));
        }
        if !(1..=i64::from(u32::MAX)).contains(&self.kiosks.count) {
            return Err(Error::invariant("kiosks.count", "at least one kiosk"));
        }
        self.fleet()?;

        check_probability("policy.safety_margin", self.policy.safety_margin)?;
        if self.policy.release == ReleaseKind::SpreadOverDay && self.policy.lead_window_slots == 0 {
            return Err(Error::invariant("policy.lead_window_slots", "must be >= 1"));
        }
        let a = self.adaptation;
        if !(a.duration_threshold >= 0.0 && a.noshow_threshold >= 0.0) {
            return Err(Error::invariant("adaptation", "thresholds must be >= 0"));
        }
        Ok(())
    }

    pub fn slot_classes(&self) -> Result<SlotClasses> {
        let b = &self.classes.boundaries;
        let minutes = [parse_wall_minute(&b[0])?, parse_wall_minute(&b[1])?, parse_wall_minute(&b[2])?];
        if minutes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invariant("classes.boundaries", "must be nondecreasing"));
        }
        Ok(SlotClasses::from_boundaries(&self.grid, minutes))
    }

    pub fn fleet(&self) -> Result<KioskFleet> {
        KioskFleet::new(self.kiosks.count.clamp(0, i64::from(u32::MAX)) as u32, self.kiosks.service_seconds)
    }

    pub fn occupancy_cap(&self) -> u32 {
        self.capacity.occupancy_cap as u32
    }

    pub fn entry_cap(&self) -> u32 {
        self.capacity.entry_cap as u32
    }

    pub fn duration_matrix(&self) -> Result<DurationMatrix> {
        self.durations.matrix(&self.grid, &self.slot_classes()?)
    }

    /// Control-loop settings for this scenario.
    pub fn loop_config(&self) -> LoopConfig {
        let a = self.adaptation;
        LoopConfig {
            grid: self.grid,
            occupancy_cap: self.occupancy_cap(),
            entry_cap: self.entry_cap(),
            overbooking: self.policy.overbooking,
            safety_margin: self.policy.safety_margin,
            release: self.policy.release_policy(),
            drift: DriftConfig {
                duration_window: a.duration_window,
                duration_threshold: a.duration_threshold,
                noshow_window: a.noshow_window,
                noshow_threshold: a.noshow_threshold,
            },
            solve: SolveOptions { node_limit: a.solver_node_limit },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                }
                None => "scenario".to_string(),
            };
            Error::parse(location, e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

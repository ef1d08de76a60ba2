//! Discretized operating day: the slot grid, slot classes and day context.

use std::fmt;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minutes from midnight.
pub type WallMinute = u32;

/// The operating day split into equal-length entry slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotGrid {
    pub slot_length_minutes: u32,
    pub num_slots: usize,
    pub opening_minute: WallMinute,
}

impl Default for SlotGrid {
    /// 44 slots of 15 minutes from 08:00 (08:00 to 19:00).
    fn default() -> Self {
        Self { slot_length_minutes: 15, num_slots: 44, opening_minute: 8 * 60 }
    }
}

impl SlotGrid {
    pub fn new(slot_length_minutes: u32, num_slots: usize, opening_minute: WallMinute) -> Result<Self> {
        let grid = Self { slot_length_minutes, num_slots, opening_minute };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slot_length_minutes == 0 {
            return Err(Error::invariant("grid.slot_length_minutes", "must be positive"));
        }
        if self.num_slots == 0 {
            return Err(Error::invariant("grid.num_slots", "must be positive"));
        }
        if self.closing_minute() > 24 * 60 {
            return Err(Error::invariant("grid", "operating day runs past midnight"));
        }
        Ok(())
    }

    pub fn closing_minute(&self) -> WallMinute {
        self.opening_minute + self.slot_length_minutes * self.num_slots as u32
    }

    pub fn slot_seconds(&self) -> f64 {
        f64::from(self.slot_length_minutes) * 60.0
    }

    /// Length of the operating day in seconds.
    pub fn day_seconds(&self) -> f64 {
        self.slot_seconds() * self.num_slots as f64
    }

    /// Slot containing `wall_minute`, or `None` outside operating hours.
    pub fn slot_of(&self, wall_minute: WallMinute) -> Option<usize> {
        if wall_minute < self.opening_minute {
            return None;
        }
        let slot = ((wall_minute - self.opening_minute) / self.slot_length_minutes) as usize;
        (slot < self.num_slots).then_some(slot)
    }

    /// Slot containing `seconds` measured from opening.
    pub fn slot_at_seconds(&self, seconds: f64) -> Option<usize> {
        if seconds < 0.0 {
            return None;
        }
        let slot = (seconds / self.slot_seconds()).floor() as usize;
        (slot < self.num_slots).then_some(slot)
    }

    pub fn wall_minute_of(&self, slot: usize) -> WallMinute {
        self.opening_minute + slot as u32 * self.slot_length_minutes
    }

    pub fn slot_start_seconds(&self, slot: usize) -> f64 {
        slot as f64 * self.slot_seconds()
    }

    /// First slot starting at or after `wall_minute`, clamped to the grid.
    fn boundary_slot(&self, wall_minute: WallMinute) -> usize {
        if wall_minute <= self.opening_minute {
            return 0;
        }
        let offset = wall_minute - self.opening_minute;
        (offset.div_ceil(self.slot_length_minutes) as usize).min(self.num_slots)
    }
}

pub fn format_wall_minute(minute: WallMinute) -> String {
    format!("{:02}:{:02}", minute / 60, minute % 60)
}

/// Parses `HH:MM`.
pub fn parse_wall_minute(text: &str) -> Result<WallMinute> {
    let time =
        chrono::NaiveTime::parse_from_str(text.trim(), "%H:%M").map_err(|e| Error::parse(format!("time '{text}'"), e.to_string()))?;
    Ok(chrono::Timelike::hour(&time) * 60 + chrono::Timelike::minute(&time))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    EarlyMorning,
    LateMorning,
    Afternoon,
    Evening,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [ClassLabel::EarlyMorning, ClassLabel::LateMorning, ClassLabel::Afternoon, ClassLabel::Evening];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::EarlyMorning => "early_morning",
            ClassLabel::LateMorning => "late_morning",
            ClassLabel::Afternoon => "afternoon",
            ClassLabel::Evening => "evening",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotClass {
    pub label: ClassLabel,
    pub slots: Range<usize>,
}

/// A partition of the grid's slots into labelled classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotClasses {
    num_slots: usize,
    classes: Vec<SlotClass>,
}

impl SlotClasses {
    /// Builds a partition, rejecting gaps, overlaps and slots past the grid.
    pub fn new(grid: &SlotGrid, mut classes: Vec<SlotClass>) -> Result<Self> {
        classes.retain(|c| !c.slots.is_empty());
        classes.sort_by_key(|c| c.slots.start);
        let mut next = 0;
        for class in &classes {
            if class.slots.start != next {
                return Err(Error::invariant(
                    "classes",
                    format!("slot ranges must partition the grid; {} starts at {} but {} expected", class.label, class.slots.start, next),
                ));
            }
            next = class.slots.end;
        }
        if next != grid.num_slots {
            return Err(Error::invariant("classes", format!("slot ranges cover [0, {next}) but the grid has {} slots", grid.num_slots)));
        }
        Ok(Self { num_slots: grid.num_slots, classes })
    }

    /// Default boundaries at 10:30, 13:00 and 16:00.
    pub fn default_for(grid: &SlotGrid) -> Self {
        Self::from_boundaries(grid, [10 * 60 + 30, 13 * 60, 16 * 60])
    }

    /// Classes split at three wall-clock boundaries (rounded up to slot starts).
    pub fn from_boundaries(grid: &SlotGrid, boundaries: [WallMinute; 3]) -> Self {
        let mut edges = vec![0];
        edges.extend(boundaries.iter().map(|&b| grid.boundary_slot(b)));
        edges.push(grid.num_slots);
        for i in 1..edges.len() {
            edges[i] = edges[i].max(edges[i - 1]);
        }
        let classes = ClassLabel::ALL
            .iter()
            .enumerate()
            .map(|(i, &label)| SlotClass { label, slots: edges[i]..edges[i + 1] })
            .filter(|c| !c.slots.is_empty())
            .collect();
        Self { num_slots: grid.num_slots, classes }
    }

    pub fn class_of(&self, slot: usize) -> Result<ClassLabel> {
        self.classes.iter().find(|c| c.slots.contains(&slot)).map(|c| c.label).ok_or(Error::UnpartitionedSlot { slot })
    }

    pub fn get(&self, label: ClassLabel) -> Option<&SlotClass> {
        self.classes.iter().find(|c| c.label == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SlotClass> {
        self.classes.iter()
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    /// Class label for every slot of the grid.
    pub fn labels(&self) -> Vec<ClassLabel> {
        let mut labels = vec![ClassLabel::EarlyMorning; self.num_slots];
        for class in &self.classes {
            for slot in class.slots.clone() {
                labels[slot] = class.label;
            }
        }
        labels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialEvent {
    pub label: String,
    pub slots: Range<usize>,
    /// Multiplies arrival demand inside the interval.
    #[serde(default = "one")]
    pub demand_factor: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayContext {
    pub date: NaiveDate,
    #[serde(default)]
    pub free_day: bool,
    #[serde(default = "one")]
    pub demand_multiplier: f64,
    #[serde(default)]
    pub special_events: Vec<SpecialEvent>,
}

impl Default for DayContext {
    fn default() -> Self {
        Self {
            date: NaiveDate::from_ymd_opt(2019, 3, 5).expect("valid date"),
            free_day: true,
            demand_multiplier: 1.0,
            special_events: Vec::new(),
        }
    }
}

impl DayContext {
    pub fn validate(&self, grid: &SlotGrid) -> Result<()> {
        if !(self.demand_multiplier >= 0.0 && self.demand_multiplier.is_finite()) {
            return Err(Error::invariant("context.demand_multiplier", "must be a finite value >= 0"));
        }
        for event in &self.special_events {
            if event.slots.start > event.slots.end || event.slots.end > grid.num_slots {
                return Err(Error::invariant("context.special_events", format!("interval of '{}' lies outside the grid", event.label)));
            }
            if !(event.demand_factor >= 0.0 && event.demand_factor.is_finite()) {
                return Err(Error::invariant("context.special_events.demand_factor", "must be a finite value >= 0"));
            }
        }
        Ok(())
    }

    /// Demand factor for one slot: the day multiplier times any special events covering it.
    pub fn demand_factor(&self, slot: usize) -> f64 {
        self.special_events.iter().filter(|e| e.slots.contains(&slot)).fold(self.demand_multiplier, |acc, e| acc * e.demand_factor)
    }
}

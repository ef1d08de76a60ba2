//! Bundled fixtures, available offline.

use serde::Deserialize;

use crate::allocator::{AllocationProblem, ProblemFile};
use crate::error::{Error, Result};
use crate::sim::{DayOverride, ScenarioConfig};

pub const DEFAULT_SCENARIO_TOML: &str = include_str!("../fixtures/default_scenario.toml");
pub const FIVE_DAY_SCHEDULE_TOML: &str = include_str!("../fixtures/five_day_schedule.toml");
pub const ALLOCATOR_4SLOT_TOML: &str = include_str!("../fixtures/allocator_4slot.toml");

pub fn default_scenario() -> Result<ScenarioConfig> {
    ScenarioConfig::from_toml(DEFAULT_SCENARIO_TOML)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Schedule {
    day: Vec<DayOverride>,
}

/// Parses a `[[day]]` list of per-day overrides.
pub fn parse_schedule(text: &str) -> Result<Vec<DayOverride>> {
    toml::from_str::<Schedule>(text).map(|s| s.day).map_err(|e| Error::parse("schedule", e.message().to_string()))
}

/// The five-day release schedule of the no-show trend run.
pub fn five_day_schedule() -> Vec<DayOverride> {
    parse_schedule(FIVE_DAY_SCHEDULE_TOML).expect("bundled schedule parses")
}

pub fn allocator_4slot() -> AllocationProblem {
    let file: ProblemFile = toml::from_str(ALLOCATOR_4SLOT_TOML).expect("bundled problem parses");
    file.into_problem().expect("bundled problem is valid").0
}

#![allow(dead_code)]

use admitflow::fixtures::default_scenario;
use admitflow::sim::ScenarioConfig;

pub fn scenario() -> ScenarioConfig {
    default_scenario().unwrap()
}

/// Every visitor of a class stays exactly its mean dwell.
pub fn fixed_durations(mut c: ScenarioConfig) -> ScenarioConfig {
    let d = &mut c.durations;
    for class in [&mut d.early_morning, &mut d.late_morning, &mut d.afternoon, &mut d.evening] {
        class.sd_minutes = 0.0;
    }
    c
}

pub fn everyone_shows(mut c: ScenarioConfig) -> ScenarioConfig {
    c.noshow.rates = vec![0.0; c.noshow.rates.len()];
    c
}

//! Summary tables over a simulate output directory: daily visitors, visit
//! durations, predicted against simulated exits, and no-shows by slot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use admitflow::duration::parse_matrix_table;
use admitflow::io::{self, flushed_predicted_exits, load_events, parse_daily_summary, parse_slot_series, records_from_events};

use crate::{Failure, Outcome};

fn read(dir: &Path, name: &str) -> Result<String, Failure> {
    fs::read_to_string(dir.join(name)).map_err(|e| Failure::Io(format!("{}: {e}", dir.join(name).display())))
}

fn table(dir: &Path, name: &str, title: &str, body: &str, out: &mut String) -> Result<(), Failure> {
    fs::write(dir.join(name), body)?;
    let _ = writeln!(out, "## {title}\n{body}");
    Ok(())
}

pub fn run(dir: &Path) -> Outcome {
    let marker = dir.join(io::FAILURE_MARKER);
    if marker.exists() {
        let why = fs::read_to_string(&marker).unwrap_or_default();
        return Err(Failure::Precondition(format!("{} holds a failed run: {}", dir.display(), why.trim())));
    }
    let manifest = io::read_manifest(dir)?;
    let days = parse_daily_summary(&read(dir, io::DAILY_SUMMARY_FILE)?)?;
    let matrix = parse_matrix_table(&read(dir, io::DURATION_MODEL_FILE)?)?;
    let slot_minutes = {
        let scenario = admitflow::sim::ScenarioConfig::from_toml(&read(dir, io::SCENARIO_FILE)?)?;
        scenario.grid.slot_length_minutes
    };
    let mut out = String::new();

    let mut daily = String::from("day,date,policy,issued,shows,noshows,noshow_percent,rejections\n");
    for d in &days {
        let pct = d.noshow_rate.map_or_else(String::new, |r| format!("{:.2}", r * 100.0));
        let _ = writeln!(daily, "{},{},{},{},{},{},{pct},{}", d.day, d.date, d.policy, d.issued, d.shows, d.noshows, d.rejections);
    }
    table(dir, "report_daily_visitors.csv", "Daily visitors", &daily, &mut out)?;

    let dmax = matrix.max_duration();
    let mut visits_by_d = vec![(0u64, 0u64); dmax];
    let n = matrix.num_slots();
    let mut predicted = vec![0.0; n];
    let mut simulated = vec![0.0; n];
    let mut by_slot = vec![(0u64, 0u64); n];
    for day in 0..manifest.days {
        let records = records_from_events(&load_events(&dir.join(io::events_file(day)))?);
        for v in &records.visits {
            let e = &mut visits_by_d[v.duration_slots.min(dmax) - 1];
            e.0 += 1;
            e.1 += u64::from(v.group_size);
        }
        for t in &records.tickets {
            if let Some(e) = by_slot.get_mut(t.visit_slot) {
                e.0 += 1;
                e.1 += u64::from(!t.showed);
            }
        }
        let series = parse_slot_series(&read(dir, &io::slots_file(day))?)?;
        let entries: Vec<u32> = series.iter().map(|r| r.entries).collect();
        for (acc, p) in predicted.iter_mut().zip(flushed_predicted_exits(&entries, &matrix)?) {
            *acc += p / manifest.days as f64;
        }
        for (acc, r) in simulated.iter_mut().zip(&series) {
            *acc += f64::from(r.exits) / manifest.days as f64;
        }
    }

    let mut hist = String::from("duration_slots,minutes,visits,persons\n");
    for (d, (visits, persons)) in visits_by_d.iter().enumerate() {
        let _ = writeln!(hist, "{},{},{visits},{persons}", d + 1, (d as u32 + 1) * slot_minutes);
    }
    table(dir, "report_duration_histogram.csv", "Visit durations", &hist, &mut out)?;

    let mut exits = String::from("slot,predicted_exits,simulated_exits\n");
    for t in 0..n {
        let _ = writeln!(exits, "{t},{:.3},{:.3}", predicted[t], simulated[t]);
    }
    let mae = predicted.iter().zip(&simulated).map(|(p, s)| (p - s).abs()).sum::<f64>() / n as f64;
    let peak = simulated.iter().copied().fold(0.0, f64::max);
    table(dir, "report_exits.csv", "Predicted and simulated exits (mean per day)", &exits, &mut out)?;
    let _ = writeln!(out, "mean absolute error {mae:.3}, peak simulated exits {peak:.3}\n");

    let mut noshow = String::from("slot,tickets,noshows,rate\n");
    for (s, (tickets, missed)) in by_slot.iter().enumerate() {
        let rate = if *tickets > 0 { format!("{:.4}", *missed as f64 / *tickets as f64) } else { String::new() };
        let _ = writeln!(noshow, "{s},{tickets},{missed},{rate}");
    }
    table(dir, "report_noshow_by_slot.csv", "No-shows by visit slot", &noshow, &mut out)?;
    Ok(out)
}

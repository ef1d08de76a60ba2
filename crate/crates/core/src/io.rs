//! Files in and out: scenario and event-log loading, the daily no-show table,
//! CSV series, model dumps and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::duration::{predict_exits, write_matrix_table, DurationMatrix, VisitRecord};
use crate::error::{Error, Result};
use crate::mapek::{read_event_log, write_event_log, AnonTag, Event, EventKind, KnowledgeBase};
use crate::noshow::{write_model_table, TicketRecord};
use crate::sim::{qoe_summary, DayOverride, Records, ScenarioConfig, SimResult};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Name of the marker left in an output directory when a run fails.
pub const FAILURE_MARKER: &str = "FAILED";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DAILY_SUMMARY_FILE: &str = "daily_summary.csv";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const DURATION_MODEL_FILE: &str = "duration_model.txt";
pub const NOSHOW_MODEL_FILE: &str = "noshow_model.txt";

pub fn slots_file(day: usize) -> String {
    format!("day_{:02}_slots.csv", day + 1)
}

pub fn events_file(day: usize) -> String {
    format!("day_{:02}_events.jsonl", day + 1)
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| with_path(path, e))
}

fn locate(path: &Path, err: Error) -> Error {
    match err {
        Error::Parse { location, message } => Error::parse(format!("{}: {location}", path.display()), message),
        other => other,
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let config = ScenarioConfig::from_toml(&read_text(path)?).map_err(|e| locate(path, e))?;
    config.validate()?;
    Ok(config)
}

/// Reads one day's event log; out-of-order or malformed lines are reported by line number.
pub fn load_events(path: &Path) -> Result<Vec<Event>> {
    let file = fs::File::open(path).map_err(|e| with_path(path, e))?;
    read_event_log(BufReader::new(file)).map_err(|e| locate(path, e))
}

/// Visits (paired entry and exit) and resolved tickets recorded in a day's log.
/// Entries without an exit are dropped; exits without an entry are ignored.
pub fn records_from_events(events: &[Event]) -> Records {
    let mut open: BTreeMap<AnonTag, (usize, u32)> = BTreeMap::new();
    let mut visits = Vec::new();
    let mut tickets = Vec::new();
    for e in events {
        match e.kind {
            EventKind::Entry => {
                if let Some(tag) = e.anon_tag {
                    open.insert(tag, (e.slot, e.group_size));
                }
            }
            EventKind::Exit => {
                if let Some((entry_slot, group_size)) = e.anon_tag.and_then(|t| open.remove(&t)) {
                    let duration_slots = e.slot.saturating_sub(entry_slot) + 1;
                    visits.push(VisitRecord { entry_slot, duration_slots, group_size });
                }
            }
            EventKind::Show | EventKind::Noshow => {
                let gap = e.gap_slots.unwrap_or(0) as usize;
                tickets.push(TicketRecord {
                    booking_slot: e.slot.saturating_sub(gap),
                    visit_slot: e.slot,
                    group_size: e.group_size,
                    showed: e.kind == EventKind::Show,
                });
            }
            EventKind::Booking | EventKind::CountUpdate => {}
        }
    }
    Records { visits, tickets }
}

/// One row of a daily issued/no-show table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRow {
    pub date: NaiveDate,
    pub issued: u32,
    pub noshow: u32,
    /// The percentage as printed in the source, one decimal.
    pub printed_percent: f64,
}

impl DailyRow {
    /// Expands the row into per-person tickets, the no-shows first.
    pub fn tickets(&self) -> Vec<TicketRecord> {
        (0..self.issued).map(|i| TicketRecord { booking_slot: 0, visit_slot: 0, group_size: 1, showed: i >= self.noshow }).collect()
    }
}

/// The five consecutive free days of issued tickets and no-shows, verbatim.
pub const NOSHOW_TABLE_CSV: &str = include_str!("../fixtures/noshow_table.csv");

/// Parses `date,issued,noshow,percent` rows after a header line.
pub fn parse_daily_table(text: &str) -> Result<Vec<DailyRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("line {}", i + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [date, issued, noshow, percent] = fields[..] else {
            return Err(Error::parse(loc, "expected 4 fields"));
        };
        let bad = |what: &str| Error::parse(loc.clone(), format!("bad {what}"));
        let row = DailyRow {
            date: date.parse().map_err(|_| bad("date"))?,
            issued: issued.parse().map_err(|_| bad("issued count"))?,
            noshow: noshow.parse().map_err(|_| bad("no-show count"))?,
            printed_percent: percent.parse().map_err(|_| bad("percentage"))?,
        };
        if row.noshow > row.issued {
            return Err(Error::invariant(format!("{loc}.noshow"), "exceeds issued"));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("daily table rows"));
    }
    Ok(rows)
}

pub fn noshow_table() -> Vec<DailyRow> {
    parse_daily_table(NOSHOW_TABLE_CSV).expect("bundled table parses")
}

/// Per-slot series: `slot,availability,sales,entries,exits,occupancy`.
pub fn slot_series_csv(result: &SimResult) -> String {
    let s = &result.slots;
    let mut out = String::from("slot,availability,sales,entries,exits,occupancy\n");
    for i in 0..s.occupancy.len() {
        let _ = writeln!(out, "{i},{},{},{},{},{:.3}", s.availability[i], s.sales[i], s.entries[i], s.exits[i], f64::from(s.occupancy[i]));
    }
    out
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.decimals$}"))
}

pub const DAILY_SUMMARY_HEADER: &str = "day,date,policy,seed,arrivals,issued,shows,noshows,noshow_rate,rejections,rejection_fraction,mean_gap_slots,mean_wait_s,p95_wait_s,max_wait_s,model_version";

/// One line per day; dates count on from the scenario's date.
pub fn daily_summary_csv(config: &ScenarioConfig, results: &[SimResult]) -> String {
    let mut out = format!("{DAILY_SUMMARY_HEADER}\n");
    for r in results {
        let q = qoe_summary(r);
        let date = config.context.date.checked_add_days(Days::new(r.day as u64)).unwrap_or(config.context.date);
        let t = &r.totals;
        let _ = writeln!(
            out,
            "{},{date},{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{}",
            r.day + 1,
            r.policy,
            r.seed,
            t.arrivals,
            t.issued,
            t.shows,
            t.noshows,
            opt(q.noshow_rate, 4),
            t.rejections,
            opt(q.rejection_fraction, 4),
            opt(q.mean_gap_slots, 4),
            q.mean_wait_seconds,
            q.p95_wait_seconds,
            q.max_wait_seconds,
            r.final_version,
        );
    }
    out
}

/// A parsed daily summary line.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySummaryRow {
    pub day: usize,
    pub date: String,
    pub policy: String,
    pub issued: u64,
    pub shows: u64,
    pub noshows: u64,
    pub noshow_rate: Option<f64>,
    pub rejections: u64,
    pub mean_gap_slots: Option<f64>,
}

pub fn parse_daily_summary(text: &str) -> Result<Vec<DailySummaryRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == DAILY_SUMMARY_HEADER => {}
        _ => return Err(Error::parse("line 1", "unexpected daily summary header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let loc = format!("line {}", i + 1);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != DAILY_SUMMARY_HEADER.split(',').count() {
            return Err(Error::parse(loc, "wrong number of fields"));
        }
        let int = |k: usize| f[k].parse::<u64>().map_err(|_| Error::parse(loc.clone(), format!("bad integer in column {}", k + 1)));
        let real = |k: usize| -> Result<Option<f64>> {
            if f[k].is_empty() {
                Ok(None)
            } else {
                f[k].parse().map(Some).map_err(|_| Error::parse(loc.clone(), format!("bad number in column {}", k + 1)))
            }
        };
        rows.push(DailySummaryRow {
            day: int(0)? as usize,
            date: f[1].to_string(),
            policy: f[2].to_string(),
            issued: int(5)?,
            shows: int(6)?,
            noshows: int(7)?,
            noshow_rate: real(8)?,
            rejections: int(9)?,
            mean_gap_slots: real(11)?,
        });
    }
    Ok(rows)
}

/// One line of a per-slot series file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRow {
    pub slot: usize,
    pub availability: u32,
    pub sales: u32,
    pub entries: u32,
    pub exits: u32,
    pub occupancy: f64,
}

pub fn parse_slot_series(text: &str) -> Result<Vec<SlotRow>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let loc = format!("line {}", i + 1);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::parse(loc, "expected 6 fields"));
        }
        let int = |k: usize| f[k].parse::<u32>().map_err(|_| Error::parse(loc.clone(), format!("bad integer in column {}", k + 1)));
        let occupancy = f[5].parse::<f64>().map_err(|_| Error::parse(loc.clone(), "bad occupancy"))?;
        out.push(SlotRow { slot: int(0)? as usize, availability: int(1)?, sales: int(2)?, entries: int(3)?, exits: int(4)?, occupancy });
    }
    Ok(out)
}

/// Expected exits per slot for realized `entries`, with exits past closing
/// folded into the last slot as the end-of-day flush does.
pub fn flushed_predicted_exits(entries: &[u32], matrix: &DurationMatrix) -> Result<Vec<f64>> {
    let n = entries.len();
    let e: Vec<f64> = entries.iter().map(|&v| f64::from(v)).collect();
    let mut exits = predict_exits(&e, matrix)?;
    let overflow: f64 = exits[n..].iter().sum();
    exits.truncate(n);
    if let Some(last) = exits.last_mut() {
        *last += overflow;
    }
    Ok(exits)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
}

/// What a bundle was produced from, and digests of what it contains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact_version: String,
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
    pub days: usize,
    pub overrides: Vec<DayOverride>,
    pub files: Vec<ManifestFile>,
}

/// Writes a complete report bundle for a run into `dir`. The manifest is
/// written last, so a directory without one is incomplete.
pub fn write_bundle(
    dir: &Path,
    config: &ScenarioConfig,
    overrides: &[DayOverride],
    results: &[SimResult],
    kb: &KnowledgeBase,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    for stale in [MANIFEST_FILE, FAILURE_MARKER] {
        let p = dir.join(stale);
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    let scenario_text = config.to_toml();
    let mut files: Vec<(String, Vec<u8>)> = vec![
        (SCENARIO_FILE.to_string(), scenario_text.clone().into_bytes()),
        (DAILY_SUMMARY_FILE.to_string(), daily_summary_csv(config, results).into_bytes()),
    ];
    for r in results {
        files.push((slots_file(r.day), slot_series_csv(r).into_bytes()));
        let mut log = Vec::new();
        write_event_log(&mut log, &r.events)?;
        files.push((events_file(r.day), log));
    }
    files.push((DURATION_MODEL_FILE.to_string(), write_matrix_table(&kb.durations).into_bytes()));
    files.push((NOSHOW_MODEL_FILE.to_string(), write_model_table(&kb.noshow).into_bytes()));

    let mut listed = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        fs::write(dir.join(name), bytes)?;
        listed.push(ManifestFile { name: name.clone(), sha256: sha256_hex(bytes) });
    }
    let manifest = Manifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        scenario: config.name.clone(),
        config_sha256: sha256_hex(scenario_text.as_bytes()),
        seed: config.seed,
        days: results.len(),
        overrides: overrides.to_vec(),
        files: listed,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

/// Marks `dir` as holding a failed run.
pub fn mark_failed(dir: &Path, diagnostic: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest = dir.join(MANIFEST_FILE);
    if manifest.exists() {
        fs::remove_file(manifest)?;
    }
    let marker = dir.join(FAILURE_MARKER);
    fs::write(&marker, format!("{diagnostic}\n"))?;
    Ok(marker)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = read_text(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(format!("{}: line {}", path.display(), e.line()), e.to_string()))
}

//! Acceptance suite: one PASS/FAIL line per criterion, each under its time limit.
//!
//! Runs without the libtest harness so the lines print in order. The process
//! fails when a criterion fails unless it is listed in `KNOWN_UNATTAINABLE`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use admitflow::allocator::{brute_force_allocation, solve_allocation, AllocationProblem};
use admitflow::duration::{fit_duration_matrix, survival, DurationMatrix};
use admitflow::fixtures::{default_scenario, five_day_schedule};
use admitflow::io::{flushed_predicted_exits, noshow_table};
use admitflow::mapek::{replay_through, EventKind};
use admitflow::noshow::{daily_noshow_rate, fit_noshow};
use admitflow::sim::{
    day_seed, generate_records, run_day, run_day_with, run_days_in, truthful_knowledge_base, DurationShift, ScenarioConfig, SimResult,
};
use admitflow::time::SlotGrid;
use admitflow::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail, with the reason printed next to the verdict.
const KNOWN_UNATTAINABLE: &[(u32, &str)] = &[(2, "the 2019-03-06 row prints 18.9 but its own counts give 1360/7290 = 18.66")];

const TABLE_PERCENT: [f64; 5] = [19.7, 18.9, 17.4, 12.9, 11.9];
const TABLE_TOLERANCE_PP: f64 = 0.05;
const ORACLE_INSTANCES: usize = 200;
const SAFETY_DAYS: usize = 100;
const OVERFLOW_FRACTION_LIMIT: f64 = 0.05;
const RECOVERY_N: usize = 10_000;
const ROW_L1_LIMIT: f64 = 0.05;
const BUCKET_RATE_LIMIT: f64 = 0.02;
const EXIT_DAYS: usize = 10;
const EXIT_MAE_FRACTION: f64 = 0.10;
const TREND_TARGETS: (f64, f64) = (19.7, 11.9);
const TREND_TOLERANCE_PP: f64 = 2.0;
const DRIFT_FROM_SLOT: usize = 16;
const DRIFT_FACTOR: f64 = 1.5;
const DRIFT_VISIT_LIMIT: usize = 200;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Days simulated by criteria 4 to 7, checked again by criterion 10.
#[derive(Default)]
struct Ledger {
    days: usize,
    errors: Vec<String>,
    matrices: Vec<DurationMatrix>,
}

impl Ledger {
    fn record(&mut self, label: &str, r: &SimResult) {
        self.days += 1;
        self.errors.extend(r.conservation_errors().into_iter().map(|e| format!("{label} day {}: {e}", r.day)));
    }
}

fn admitflow(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_admitflow")).args(args).env_remove("ADMITFLOW_OUT").output().expect("binary runs")
}

fn kiosk_sizing() -> Verdict {
    let o = admitflow(&["size-kiosks", "268", "15", "600"]);
    let text = String::from_utf8_lossy(&o.stdout);
    let k = text.lines().next().unwrap_or("");
    let pass = o.status.success() && k == "7" && text.contains("6,660.0,no") && text.contains("7,570.0,yes");
    verdict(pass, format!("k = {k}; table {}", text.lines().skip(2).take(2).collect::<Vec<_>>().join(" ")))
}

fn table_reproduction() -> Verdict {
    let mut worst = (0.0, String::new());
    let mut shown = Vec::new();
    for (row, printed) in noshow_table().iter().zip(TABLE_PERCENT) {
        let pct = 100.0 * daily_noshow_rate(&row.tickets()).expect("nonempty day");
        shown.push(format!("{pct:.2}"));
        let off = (pct - printed).abs();
        if off > worst.0 {
            worst = (off, row.date.to_string());
        }
    }
    verdict(worst.0 <= TABLE_TOLERANCE_PP, format!("rates {}; worst {} off by {:.2} pp", shown.join(" "), worst.1, worst.0))
}

fn random_problem(rng: &mut ChaCha8Rng) -> AllocationProblem {
    let n = rng.random_range(1..=5);
    let d = rng.random_range(1..=3);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..d).map(|_| f64::from(rng.random_range(0..4u32))).collect();
            let total: f64 = raw.iter().sum();
            if total == 0.0 {
                (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()
            } else {
                raw.iter().map(|v| v / total).collect()
            }
        })
        .collect();
    let matrix = DurationMatrix::new(rows, vec![0; n]).expect("valid rows");
    let grid = SlotGrid::new(15, n, 480).expect("valid grid");
    let mut p = AllocationProblem::new(grid, rng.random_range(0..=6), rng.random_range(0..=6), survival(&matrix));
    let rates = [1.0, 0.9, 0.8, 0.75, 0.5];
    for s in 0..n {
        p.issuance_bound[s] = rng.random_range(0..=6);
        p.show_rate[s] = rates[rng.random_range(0..rates.len())];
    }
    p
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a11_0ca7);
    let mut mismatches = Vec::new();
    for i in 0..ORACLE_INSTANCES {
        let p = random_problem(&mut rng);
        match (solve_allocation(&p), brute_force_allocation(&p)) {
            (Ok(a), Ok(b)) if a.objective == b.objective && a.issuable == b.issuable => {}
            (Err(Error::InfeasibleCommitments { .. }), Err(Error::InfeasibleCommitments { .. })) => {}
            _ => mismatches.push(i),
        }
    }
    verdict(mismatches.is_empty(), format!("{ORACLE_INSTANCES} instances, mismatches {mismatches:?}"))
}

fn fixed_durations(mut c: ScenarioConfig) -> ScenarioConfig {
    let d = &mut c.durations;
    for class in [&mut d.early_morning, &mut d.late_morning, &mut d.afternoon, &mut d.evening] {
        class.sd_minutes = 0.0;
    }
    c
}

fn overflow_days(c: &ScenarioConfig, label: &str, ledger: &mut Ledger) -> (usize, usize) {
    let (mut over, mut slot_days) = (0, 0);
    for day in 0..SAFETY_DAYS {
        let mut kb = truthful_knowledge_base(c).expect("valid scenario");
        let r = run_day_with(c, &mut kb, day_seed(c.seed, day), day).expect("day runs");
        ledger.record(label, &r);
        slot_days += r.slots.occupancy.len();
        over += r.slots.occupancy.iter().filter(|&&o| o > c.occupancy_cap()).count();
    }
    (over, slot_days)
}

fn occupancy_safety(ledger: &mut Ledger) -> Verdict {
    let base = fixed_durations(default_scenario().expect("bundled scenario"));
    let mut exact = base.clone();
    exact.noshow.rates = vec![0.0; exact.noshow.rates.len()];
    exact.policy.safety_margin = 0.0;
    let (hard, hard_total) = overflow_days(&exact, "exact", ledger);

    let mut stochastic = base;
    stochastic.policy.safety_margin = 0.05;
    let (soft, soft_total) = overflow_days(&stochastic, "no-show", ledger);
    let fraction = soft as f64 / soft_total as f64;
    verdict(
        hard == 0 && fraction <= OVERFLOW_FRACTION_LIMIT,
        format!(
            "show rate 1: {hard}/{hard_total} slot-days over C_max; stochastic no-show: {soft}/{soft_total} = {:.1}%",
            100.0 * fraction
        ),
    )
}

fn model_recovery() -> Verdict {
    let full = default_scenario().expect("bundled scenario");
    // one slot per class, so each fitted row sees a quarter of the visits
    let mut small = full.clone();
    small.grid.num_slots = 4;
    small.classes.boundaries = ["08:15".into(), "08:30".into(), "08:45".into()];
    small.demand.arrivals_per_slot = vec![100.0; 4];
    let truth = small.duration_matrix().expect("valid truth");
    let visits = generate_records(&small, full.seed, RECOVERY_N).expect("records").visits;
    let fitted = fit_duration_matrix(&visits, &small.slot_classes().expect("classes"), truth.max_duration(), 30).expect("fit");
    let l1 =
        (0..truth.num_slots()).map(|s| fitted.row(s).iter().zip(truth.row(s)).map(|(a, b)| (a - b).abs()).sum::<f64>()).fold(0.0, f64::max);

    let tickets = generate_records(&full, full.seed, RECOVERY_N).expect("records").tickets;
    let model = fit_noshow(&tickets, &full.noshow.bucket_edges).expect("fit");
    let dev = model.rates().iter().zip(&full.noshow.rates).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    verdict(l1 <= ROW_L1_LIMIT && dev <= BUCKET_RATE_LIMIT, format!("max row L1 {l1:.4}; max bucket rate error {dev:.4}"))
}

fn exit_prediction(ledger: &mut Ledger) -> Verdict {
    let c = default_scenario().expect("bundled scenario");
    let mut kb = truthful_knowledge_base(&c).expect("valid scenario");
    let results = run_days_in(&c, &mut kb, EXIT_DAYS, &[]).expect("days run");
    let n = c.grid.num_slots;
    let (mut predicted, mut simulated) = (vec![0.0; n], vec![0.0; n]);
    for r in &results {
        ledger.record("exits", r);
        let p = flushed_predicted_exits(&r.slots.entries, &kb.durations).expect("shapes match");
        for t in 0..n {
            predicted[t] += p[t] / EXIT_DAYS as f64;
            simulated[t] += f64::from(r.slots.exits[t]) / EXIT_DAYS as f64;
        }
    }
    ledger.matrices.push(kb.durations.clone());
    let mae = predicted.iter().zip(&simulated).map(|(p, s)| (p - s).abs()).sum::<f64>() / n as f64;
    // the closing slot collects everyone still inside; the peak is taken before it
    let peak = simulated[..n - 1].iter().copied().fold(0.0, f64::max);
    verdict(
        mae <= EXIT_MAE_FRACTION * peak,
        format!("MAE {mae:.2} persons/slot vs peak {peak:.1} ({:.1}%), final version {}", 100.0 * mae / peak, kb.version),
    )
}

fn noshow_trend(ledger: &mut Ledger) -> Verdict {
    let c = default_scenario().expect("bundled scenario");
    let mut kb = truthful_knowledge_base(&c).expect("valid scenario");
    let days = run_days_in(&c, &mut kb, 5, &five_day_schedule()).expect("days run");
    ledger.matrices.push(kb.durations.clone());
    let rates: Vec<f64> = days.iter().map(|r| r.noshow_rate().expect("tickets issued")).collect();
    let mut monotone = true;
    for (i, w) in days.windows(2).enumerate() {
        ledger.record("trend", &w[0]);
        let (a, b) = (rates[i], rates[i + 1]);
        let se = (a * (1.0 - a) / w[0].totals.issued as f64 + b * (1.0 - b) / w[1].totals.issued as f64).sqrt();
        monotone &= b <= a + 2.0 * se;
    }
    ledger.record("trend", days.last().expect("five days"));
    let (first, last) = (100.0 * rates[0], 100.0 * rates[4]);
    let pass = (first - TREND_TARGETS.0).abs() <= TREND_TOLERANCE_PP && (last - TREND_TARGETS.1).abs() <= TREND_TOLERANCE_PP && monotone;
    let shown: Vec<String> = rates.iter().map(|r| format!("{:.2}", 100.0 * r)).collect();
    verdict(pass, format!("no-show % by day {}; monotone within 2 se: {monotone}", shown.join(" ")))
}

fn drift_response(ledger: &mut Ledger) -> Verdict {
    let mut c = default_scenario().expect("bundled scenario");
    c.durations.shift = Some(DurationShift { from_slot: DRIFT_FROM_SLOT, factor: DRIFT_FACTOR });
    let r = run_day(&c).expect("day runs");
    ledger.record("drift", &r);
    let Some(flag) = r.ticks.iter().find(|t| t.verdict.duration()) else {
        return verdict(false, "duration drift never flagged".into());
    };
    let cutoff = c.grid.slot_start_seconds(flag.boundary);
    let mut late = HashSet::new();
    let mut completed = 0;
    for e in r.events.iter().take_while(|e| e.ts <= cutoff) {
        match e.kind {
            EventKind::Entry if e.slot >= DRIFT_FROM_SLOT => {
                late.insert(e.anon_tag);
            }
            EventKind::Exit if late.contains(&e.anon_tag) => completed += 1,
            _ => {}
        }
    }

    let mut stale = truthful_knowledge_base(&c).expect("valid scenario");
    stale.config.drift.duration_window = 0;
    stale.begin_day();
    let reports = replay_through(&mut stale, &r.events, flag.boundary).expect("log replays");
    let old = &reports.last().expect("ticks replayed").snapshot.availability;
    let affected: Vec<usize> = (flag.boundary..c.grid.num_slots).filter(|&s| old[s] > 0).collect();
    let lower = affected.iter().all(|&s| flag.availability[s] < old[s]);
    let (new_total, old_total): (u32, u32) = (affected.iter().map(|&s| flag.availability[s]).sum(), affected.iter().map(|&s| old[s]).sum());
    verdict(
        completed <= DRIFT_VISIT_LIMIT && flag.version == 1 && !affected.is_empty() && lower,
        format!(
            "flagged at slot {} after {completed} post-shift visits, version {}; {} affected slots offer {new_total} vs stale {old_total}",
            flag.boundary,
            flag.version,
            affected.len()
        ),
    )
}

fn bundle_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("bundle directory")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).expect("readable"))
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let root = tempfile::tempdir().expect("temp dir");
    let mut bundles = Vec::new();
    for run in ["a", "b"] {
        let out = root.path().join(run);
        let o = admitflow(&["simulate", "--days", "5", "--policy", "five-day", "--out", out.to_str().expect("utf-8 path")]);
        if !o.status.success() {
            return verdict(false, format!("simulate failed: {}", String::from_utf8_lossy(&o.stderr).trim()));
        }
        bundles.push(bundle_bytes(&out));
    }
    let names: Vec<&str> = bundles[0].iter().map(|(n, _)| n.as_str()).collect();
    verdict(bundles[0] == bundles[1], format!("{} files compared across two runs", names.len()))
}

fn conservation(ledger: &mut Ledger) -> Verdict {
    let c = default_scenario().expect("bundled scenario");
    let mut errors = ledger.errors.clone();
    let mut matrices = ledger.matrices.clone();
    matrices.push(c.duration_matrix().expect("truth"));
    for (i, m) in matrices.iter().enumerate() {
        for s in 0..m.num_slots() {
            if (m.row(s).iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                errors.push(format!("matrix {i} row {s} does not sum to 1"));
            }
            if !survival(m).tail(s).windows(2).all(|w| w[0] >= w[1]) {
                errors.push(format!("matrix {i} survival row {s} increases"));
            }
        }
    }
    let first = errors.first().cloned().unwrap_or_default();
    verdict(errors.is_empty() && ledger.days > 0, format!("{} days, {} violations {first}", ledger.days, errors.len()))
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();
    let mut unexpected = 0;
    let mut report = |id: u32, name: &str, limit_s: u64, run: &mut dyn FnMut(&mut Ledger) -> Verdict| {
        let start = Instant::now();
        let v = run(&mut ledger);
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(limit_s);
        let pass = v.pass && in_time;
        let known = KNOWN_UNATTAINABLE.iter().find(|(k, _)| *k == id).map(|(_, why)| *why);
        let mark = if pass { "PASS" } else { "FAIL" };
        let timing = format!("{:.2} s of {limit_s} s", elapsed.as_secs_f64());
        let note = match (pass, known) {
            (false, Some(why)) => format!(" [known unattainable: {why}]"),
            (false, None) if !in_time => " [over time limit]".to_string(),
            _ => String::new(),
        };
        println!("criterion {id:>2} {name:<28} {mark}  {} ({timing}){note}", v.detail);
        if !pass && known.is_none() {
            unexpected += 1;
        }
    };

    report(1, "kiosk sizing", 1, &mut |_| kiosk_sizing());
    report(2, "daily no-show table", 1, &mut |_| table_reproduction());
    report(3, "allocator oracle", 10, &mut |_| oracle_equivalence());
    report(4, "occupancy safety", 60, &mut occupancy_safety);
    report(5, "model recovery", 10, &mut |_| model_recovery());
    report(6, "exit prediction", 60, &mut exit_prediction);
    report(7, "no-show trend", 60, &mut noshow_trend);
    report(8, "drift response", 30, &mut drift_response);
    report(9, "determinism", 30, &mut |_| determinism());
    report(10, "conservation", 1, &mut conservation);

    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria failed unexpectedly");
        ExitCode::FAILURE
    }
}

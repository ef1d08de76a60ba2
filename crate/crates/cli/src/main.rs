use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use admitflow::allocator::{solve_allocation, AllocationPlan, ProblemFile};
use admitflow::duration::{fit_duration_matrix, write_matrix_table, DEFAULT_MIN_ROW_SAMPLES};
use admitflow::fixtures;
use admitflow::io::{self, load_events, load_scenario, records_from_events};
use admitflow::kiosk::{min_kiosks, wait_table};
use admitflow::mapek::{replay, ReleasePolicy};
use admitflow::noshow::{daily_noshow_rate, fit_noshow, write_model_table, DEFAULT_BUCKET_EDGES};
use admitflow::sim::{run_days_in, truthful_knowledge_base, DayOverride, ReleaseKind, ScenarioConfig};
use admitflow::Error;

mod report;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "ADMITFLOW_OUT";

#[derive(Parser)]
#[command(name = "admitflow", version, about = "Timed-entry ticket allocation, simulation and reporting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    AllAtOpen,
    SpreadOverDay,
    /// The bundled five-day release schedule.
    FiveDay,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate days and write a report bundle.
    Simulate {
        /// Scenario file; the bundled default when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = OUT_ENV)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        days: usize,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// Per-day overrides as a `[[day]]` list; takes precedence over `--policy`.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Solve an allocation problem file and print the plan.
    Allocate {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a duration matrix from event logs.
    FitDuration {
        #[arg(required = true)]
        events: Vec<PathBuf>,
        /// Scenario supplying the grid and slot classes.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MIN_ROW_SAMPLES)]
        min_row_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a no-show model from event logs, or report per-day rates of a daily table.
    FitNoshow {
        events: Vec<PathBuf>,
        /// Daily `date,issued,noshow,percent` table; `bundled` for the built-in one.
        #[arg(long, conflicts_with = "events")]
        daily_table: Option<String>,
        /// Gap bucket starts in slots, comma separated.
        #[arg(long, value_delimiter = ',')]
        edges: Option<Vec<u32>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smallest kiosk fleet keeping the worst-case wait within a bound.
    SizeKiosks {
        /// Persons arriving at once.
        arrivals: u32,
        /// Seconds per booking.
        service_seconds: f64,
        /// Largest acceptable wait in seconds.
        max_wait_seconds: f64,
    },
    /// Fold an event log through the control loop and print the tick trace.
    Replay {
        events: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// Where to write the final knowledge base as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summary tables from a simulate output directory.
    Report {
        #[arg(env = OUT_ENV)]
        dir: PathBuf,
    },
}

/// Failure classes, each with its own exit status.
#[derive(Debug)]
enum Failure {
    Parse(String),
    Precondition(String),
    Io(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) => 3,
            Failure::Precondition(_) => 4,
            Failure::Io(_) => 5,
            Failure::Internal(_) => 6,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m) | Failure::Precondition(m) | Failure::Io(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Parse { .. } => Failure::Parse(m),
            Error::Io(_) => Failure::Io(m),
            Error::InfeasibleCommitments { .. } => Failure::Internal(m),
            _ => Failure::Precondition(m),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<String, Failure>;

fn scenario_or_default(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    Ok(match path {
        Some(p) => load_scenario(p)?,
        None => fixtures::default_scenario()?,
    })
}

fn overrides_for(policy: Option<PolicyArg>, days: usize) -> Vec<DayOverride> {
    let single = |release| DayOverride { release: Some(release), ..Default::default() };
    match policy {
        None => Vec::new(),
        Some(PolicyArg::AllAtOpen) => vec![single(ReleaseKind::AllAtOpen); days],
        Some(PolicyArg::SpreadOverDay) => vec![single(ReleaseKind::SpreadOverDay); days],
        Some(PolicyArg::FiveDay) => fixtures::five_day_schedule(),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => {
            fs::write(p, text)?;
            Ok(format!("wrote {}\n", p.display()))
        }
        None => Ok(text.to_string()),
    }
}

fn simulate(
    scenario: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    days: usize,
    policy: Option<PolicyArg>,
    schedule: Option<&Path>,
) -> Outcome {
    let mut config = scenario_or_default(scenario)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let overrides = match schedule {
        Some(p) => fixtures::parse_schedule(&fs::read_to_string(p)?)?,
        None => overrides_for(policy, days),
    };
    let run = || -> Result<_, Error> {
        let mut kb = truthful_knowledge_base(&config)?;
        let results = run_days_in(&config, &mut kb, days, &overrides)?;
        let manifest = io::write_bundle(out, &config, &overrides, &results, &kb)?;
        Ok((results, manifest))
    };
    let (results, manifest) = run().map_err(|e| {
        let _ = io::mark_failed(out, &e.to_string());
        Failure::from(e)
    })?;
    let mut text = io::daily_summary_csv(&config, &results);
    let _ = writeln!(text, "wrote {} files to {} (config {})", manifest.files.len() + 1, out.display(), &manifest.config_sha256[..12]);
    Ok(text)
}

fn plan_text(plan: &AllocationPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "objective = {}", plan.objective);
    let _ = writeln!(out, "feasible = {}", plan.feasible);
    let _ = writeln!(out, "proven_optimal = {}", plan.proven_optimal);
    let _ = writeln!(out, "slot,issuable,predicted_occupancy");
    for (t, occ) in plan.predicted_occupancy.iter().enumerate() {
        let x = plan.issuable.get(t).map_or_else(String::new, u32::to_string);
        let _ = writeln!(out, "{t},{x},{occ:.3}");
    }
    out
}

fn allocate(problem: &Path, out: Option<&Path>) -> Outcome {
    let text = fs::read_to_string(problem)?;
    let file: ProblemFile = toml::from_str(&text).map_err(|e| {
        let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Failure::Parse(format!("{}: line {line}: {}", problem.display(), e.message()))
    })?;
    let (problem, _) = file.into_problem()?;
    let plan = match solve_allocation(&problem) {
        Ok(plan) => plan,
        Err(Error::InfeasibleCommitments { constraint, slot, plan }) => {
            eprintln!("warning: committed load alone violates the {constraint} constraint at slot {slot}");
            *plan
        }
        Err(e) => return Err(e.into()),
    };
    emit(out, &plan_text(&plan))
}

fn fit_duration(events: &[PathBuf], scenario: Option<&Path>, min_row_samples: usize, out: Option<&Path>) -> Outcome {
    let config = scenario_or_default(scenario)?;
    let mut visits = Vec::new();
    for p in events {
        visits.extend(records_from_events(&load_events(p)?).visits);
    }
    let matrix = fit_duration_matrix(&visits, &config.slot_classes()?, config.durations.max_duration_slots, min_row_samples)?;
    emit(out, &write_matrix_table(&matrix))
}

fn fit_noshow_cmd(events: &[PathBuf], daily_table: Option<&str>, edges: Option<Vec<u32>>, out: Option<&Path>) -> Outcome {
    if let Some(source) = daily_table {
        let rows = if source == "bundled" { io::noshow_table() } else { io::parse_daily_table(&fs::read_to_string(source)?)? };
        let mut text = String::from("date,issued,noshow,rate,percent,printed_percent\n");
        for row in &rows {
            let rate = daily_noshow_rate(&row.tickets())?;
            let _ = writeln!(text, "{},{},{},{rate:.4},{:.2},{:.1}", row.date, row.issued, row.noshow, rate * 100.0, row.printed_percent);
        }
        return emit(out, &text);
    }
    if events.is_empty() {
        return Err(Failure::Precondition("give event logs or --daily-table".into()));
    }
    let mut tickets = Vec::new();
    for p in events {
        tickets.extend(records_from_events(&load_events(p)?).tickets);
    }
    let edges = edges.unwrap_or_else(|| DEFAULT_BUCKET_EDGES.to_vec());
    let model = fit_noshow(&tickets, &edges)?;
    emit(out, &write_model_table(&model))
}

fn size_kiosks(arrivals: u32, service: f64, max_wait: f64) -> Outcome {
    let k = min_kiosks(arrivals, service, max_wait)?;
    let mut out = format!("{k}\nkiosks,worst_case_wait_s,within_bound\n");
    for (kk, wait) in wait_table(arrivals, service, k)? {
        let _ = writeln!(out, "{kk},{wait:.1},{}", if wait <= max_wait { "yes" } else { "no" });
    }
    Ok(out)
}

fn replay_cmd(events: &Path, scenario: Option<&Path>, policy: Option<PolicyArg>, out: Option<&Path>) -> Outcome {
    let config = scenario_or_default(scenario)?;
    let mut kb = truthful_knowledge_base(&config)?;
    match policy {
        Some(PolicyArg::AllAtOpen) => kb.config.release = ReleasePolicy::AllAtOpen,
        Some(PolicyArg::SpreadOverDay) => kb.config.release = ReleasePolicy::SpreadOverDay { lead_slots: config.policy.lead_window_slots },
        Some(PolicyArg::FiveDay) => return Err(Failure::Precondition("replay takes a single-day policy".into())),
        None => {}
    }
    let log = load_events(events)?;
    kb.begin_day();
    let reports = replay(&mut kb, &log)?;
    let mut text = String::from("boundary,verdict,refit,version,objective,feasible,available\n");
    for r in &reports {
        let verdict = serde_json::to_string(&r.analysis.verdict).unwrap_or_default();
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            r.boundary,
            verdict.trim_matches('"'),
            r.refit,
            r.version,
            r.objective,
            r.feasible,
            r.snapshot.total()
        );
    }
    if let Some(p) = out {
        fs::write(p, kb.canonical_json())?;
    }
    Ok(text)
}

fn dispatch(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate { scenario, seed, out, days, policy, schedule } => {
            simulate(scenario.as_deref(), seed, &out, days, policy, schedule.as_deref())
        }
        Command::Allocate { problem, out } => allocate(&problem, out.as_deref()),
        Command::FitDuration { events, scenario, min_row_samples, out } => {
            fit_duration(&events, scenario.as_deref(), min_row_samples, out.as_deref())
        }
        Command::FitNoshow { events, daily_table, edges, out } => fit_noshow_cmd(&events, daily_table.as_deref(), edges, out.as_deref()),
        Command::SizeKiosks { arrivals, service_seconds, max_wait_seconds } => size_kiosks(arrivals, service_seconds, max_wait_seconds),
        Command::Replay { events, scenario, policy, out } => replay_cmd(&events, scenario.as_deref(), policy, out.as_deref()),
        Command::Report { dir } => report::run(&dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

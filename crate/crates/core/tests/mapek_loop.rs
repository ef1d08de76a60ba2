mod common;

use std::collections::HashSet;

use admitflow::mapek::{read_event_log, replay_through, EventKind};
use admitflow::sim::{run_day, truthful_knowledge_base, DurationShift};
use admitflow::Error;
use common::scenario;

const MIDDAY: usize = 16;

#[test]
fn lengthened_visits_are_flagged_and_cut_availability() {
    let mut c = scenario();
    c.durations.shift = Some(DurationShift { from_slot: MIDDAY, factor: 1.5 });
    let r = run_day(&c).unwrap();
    assert_eq!(r.conservation_errors(), Vec::<String>::new());

    let flag = r.ticks.iter().find(|t| t.verdict.duration()).expect("duration drift flagged");
    assert!(flag.boundary > MIDDAY);
    assert!(r.ticks.iter().take_while(|t| t.boundary < MIDDAY).all(|t| t.version == 0));
    assert_eq!(flag.version, 1);
    assert!(flag.refit);

    let cutoff = c.grid.slot_start_seconds(flag.boundary);
    let mut late_entries = HashSet::new();
    let mut completed = 0;
    for e in r.events.iter().take_while(|e| e.ts <= cutoff) {
        match e.kind {
            EventKind::Entry if e.slot >= MIDDAY => {
                late_entries.insert(e.anon_tag);
            }
            EventKind::Exit if late_entries.contains(&e.anon_tag) => completed += 1,
            _ => {}
        }
    }
    assert!(completed <= 200, "{completed} post-shift visits before the flag");

    let mut stale = truthful_knowledge_base(&c).unwrap();
    stale.config.drift.duration_window = 0;
    stale.begin_day();
    let reports = replay_through(&mut stale, &r.events, flag.boundary).unwrap();
    let stale_tick = reports.last().unwrap();
    assert_eq!(stale_tick.boundary, flag.boundary);
    assert_eq!(stale_tick.version, 0);
    let mut compared = 0;
    for s in flag.boundary..c.grid.num_slots {
        let old = stale_tick.snapshot.availability[s];
        if old > 0 {
            assert!(flag.availability[s] < old, "slot {s}: {} vs stale {old}", flag.availability[s]);
            compared += 1;
        }
    }
    assert!(compared > 0);
}

#[test]
fn unchanged_durations_are_not_flagged() {
    let r = run_day(&scenario()).unwrap();
    assert!(r.ticks.iter().all(|t| !t.verdict.duration()));
    assert!(r.ticks.iter().filter_map(|t| t.duration_deviation).all(|d| d < 0.1));
}

#[test]
fn more_noshows_than_planned_trigger_a_refit() {
    let truth = scenario();
    let mut optimistic = truth.clone();
    optimistic.noshow.rates = truth.noshow.rates.iter().map(|r| r / 3.0).collect();

    let mut kb = truthful_knowledge_base(&optimistic).unwrap();
    let r = admitflow::sim::run_day_with(&truth, &mut kb, truth.seed, 0).unwrap();
    let flag = r.ticks.iter().find(|t| t.verdict.noshow()).expect("no-show drift flagged");
    assert_eq!(flag.version, 1);
    for (refit, planned) in kb.noshow.rates().iter().zip(&optimistic.noshow.rates) {
        assert!(refit > planned, "{refit} vs {planned}");
    }

    let control = run_day(&truth).unwrap();
    assert!(control.ticks.iter().all(|t| !t.verdict.noshow()));
}

#[test]
fn event_log_errors_name_the_line() {
    let log = concat!(
        r#"{"ts":10.0,"kind":"booking","slot":0,"group_size":1,"gap_slots":0,"anon_tag":null}"#,
        "\n",
        r#"{"ts":5.0,"kind":"booking","slot":0,"group_size":1,"gap_slots":0,"anon_tag":null}"#,
        "\n"
    );
    match read_event_log(log.as_bytes()) {
        Err(Error::Parse { location, message }) => {
            assert_eq!(location, "line 2");
            assert!(message.contains("out-of-order"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    match read_event_log("\n{not json}\n".as_bytes()) {
        Err(Error::Parse { location, .. }) => assert_eq!(location, "line 2"),
        other => panic!("{other:?}"),
    }
}

use admitflow::kiosk::{min_kiosks, simulate_kiosk_queue, worst_case_wait, KioskFleet};
use proptest::prelude::*;

/// Round-by-round oracle: every `tau` seconds, up to `k` waiting people start.
fn batch_wait_by_rounds(arrivals: u32, k: u32, tau: f64) -> f64 {
    let mut waiting = arrivals;
    let mut clock = 0.0;
    loop {
        let served = waiting.min(k);
        waiting -= served;
        if waiting == 0 {
            return clock;
        }
        clock += tau;
    }
}

#[test]
fn closed_form_matches_simulation_on_full_grid() {
    for k in 1..=20 {
        let fleet = KioskFleet::new(k, 15.0).unwrap();
        for a in 1..=1000u32 {
            let closed = worst_case_wait(a, &fleet).unwrap();
            let batch = vec![0.0; a as usize];
            let (_, summary) = simulate_kiosk_queue(&batch, &fleet).unwrap();
            assert_eq!(closed, summary.max, "A={a} k={k}");
            assert_eq!(closed, batch_wait_by_rounds(a, k, 15.0), "A={a} k={k}");
        }
    }
}

proptest! {
    #[test]
    fn adding_a_kiosk_never_hurts(mut times in prop::collection::vec(0.0f64..900.0, 1..200), k in 1u32..10) {
        times.sort_by(f64::total_cmp);
        let (a, _) = simulate_kiosk_queue(&times, &KioskFleet::new(k, 15.0).unwrap()).unwrap();
        let (b, _) = simulate_kiosk_queue(&times, &KioskFleet::new(k + 1, 15.0).unwrap()).unwrap();
        for (wa, wb) in a.iter().zip(&b) {
            prop_assert!(*wb >= 0.0);
            prop_assert!(wb <= wa);
        }
    }

    #[test]
    fn sizing_is_minimal_and_monotone(a in 1u32..800, tau in 1.0f64..60.0, w in 0.0f64..2000.0, dw in 0.0f64..500.0) {
        let k = min_kiosks(a, tau, w).unwrap();
        prop_assert!(worst_case_wait(a, &KioskFleet::new(k, tau).unwrap()).unwrap() <= w);
        if k > 1 {
            prop_assert!(worst_case_wait(a, &KioskFleet::new(k - 1, tau).unwrap()).unwrap() > w);
        }
        prop_assert!(min_kiosks(a, tau, w + dw).unwrap() <= k);
        prop_assert!(min_kiosks(a + 1, tau, w).unwrap() >= k);
        prop_assert!(min_kiosks(a, tau + 1.0, w).unwrap() >= k);
    }
}

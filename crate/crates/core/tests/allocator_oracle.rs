use admitflow::allocator::{brute_force_allocation, solve_allocation, verify_plan, AllocationProblem};
use admitflow::duration::{predict_occupancy, survival, DurationMatrix};
use admitflow::time::SlotGrid;
use admitflow::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pmf(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| f64::from(rng.random_range(0..4u32))).collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut p = vec![0.0; d];
        p[0] = 1.0;
        return p;
    }
    raw.iter().map(|v| v / total).collect()
}

fn random_problem(rng: &mut ChaCha8Rng) -> AllocationProblem {
    let n = rng.random_range(1..=5);
    let d = rng.random_range(1..=3);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_pmf(rng, d)).collect();
    let matrix = DurationMatrix::new(rows, vec![0; n]).unwrap();
    let grid = SlotGrid::new(15, n, 480).unwrap();
    let mut p = AllocationProblem::new(grid, rng.random_range(0..=6), rng.random_range(0..=6), survival(&matrix));
    let rates = [1.0, 0.9, 0.75, 0.5];
    for s in 0..n {
        p.issuance_bound[s] = rng.random_range(0..=6);
        p.show_rate[s] = rates[rng.random_range(0..rates.len())];
        p.weights[s] = rng.random_range(1..=3);
        if rng.random_bool(0.25) {
            p.committed[s] = rng.random_range(0..=2);
            p.committed_show_rate[s] = rates[rng.random_range(0..rates.len())];
        }
    }
    if rng.random_bool(0.2) {
        p.first_open_slot = rng.random_range(0..n);
    }
    p
}

#[test]
fn solver_matches_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a11_0c47);
    let mut solved = 0;
    let mut infeasible = 0;
    for i in 0..400 {
        let p = random_problem(&mut rng);
        match (solve_allocation(&p), brute_force_allocation(&p)) {
            (Ok(fast), Ok(slow)) => {
                assert_eq!(fast.objective, slow.objective, "instance {i}: {p:?}");
                assert_eq!(fast.issuable, slow.issuable, "instance {i}: {p:?}");
                assert!(verify_plan(&p, &fast).unwrap().feasible, "instance {i}");
                solved += 1;
            }
            (Err(Error::InfeasibleCommitments { .. }), Err(Error::InfeasibleCommitments { .. })) => infeasible += 1,
            (a, b) => panic!("instance {i}: solver {a:?} vs brute force {b:?}"),
        }
    }
    assert!(solved >= 200, "only {solved} solved, {infeasible} infeasible");
}

#[test]
fn lengthened_durations_never_raise_the_objective() {
    let grid = SlotGrid::new(15, 8, 480).unwrap();
    let short = DurationMatrix::uniform_rows(8, &[0.2, 0.5, 0.3]).unwrap();
    let long = short.rescaled(1.5);
    let a = solve_allocation(&AllocationProblem::new(grid, 40, 25, survival(&short))).unwrap();
    let b = solve_allocation(&AllocationProblem::new(grid, 40, 25, survival(&long))).unwrap();
    assert!(b.objective <= a.objective);
}

#[test]
fn occupancy_matches_independent_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let p = random_problem(&mut rng);
        let Ok(plan) = solve_allocation(&p) else { continue };
        let entries = p.expected_entries(&plan.issuable);
        let occ = predict_occupancy(&entries, &p.survival).unwrap();
        for (a, b) in occ.iter().zip(&plan.predicted_occupancy) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn random_plans_verdict_agrees_with_direct_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let p = random_problem(&mut rng);
        let n = p.num_slots();
        let x: Vec<u32> = (0..n).map(|s| if s < p.first_open_slot { 0 } else { rng.random_range(0..=4) }).collect();
        let Ok(template) = solve_allocation(&p) else { continue };
        let mut plan = template.clone();
        plan.issuable = x.clone();

        // direct evaluation, independent of the library's occupancy code
        let e: Vec<f64> = (0..n).map(|s| p.show_rate[s] * f64::from(x[s]) + p.committed_show_rate[s] * f64::from(p.committed[s])).collect();
        let mut ok = x.iter().zip(&p.issuance_bound).all(|(v, u)| v <= u);
        for t in p.first_open_slot..n {
            ok &= e[t] <= f64::from(p.entry_cap) + 1e-9;
            let mut occ = 0.0;
            for (s, es) in e.iter().enumerate().take(t + 1) {
                occ += es * p.survival.get(s, t);
            }
            ok &= occ <= f64::from(p.occupancy_cap) + 1e-9;
        }
        assert_eq!(verify_plan(&p, &plan).unwrap().feasible, ok, "{p:?} {x:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn caps_are_monotone(seed in any::<u64>(), extra_c in 0u32..4, extra_e in 0u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng);
        let mut q = p.clone();
        q.occupancy_cap += extra_c;
        q.entry_cap += extra_e;
        if let (Ok(a), Ok(b)) = (solve_allocation(&p), solve_allocation(&q)) {
            prop_assert!(b.objective >= a.objective);
        }
    }

    #[test]
    fn commitments_are_antitone(seed in any::<u64>(), slot in 0usize..5, extra in 1u32..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng);
        let mut q = p.clone();
        let s = slot % p.num_slots();
        q.committed[s] += extra;
        if let (Ok(a), Ok(b)) = (solve_allocation(&p), solve_allocation(&q)) {
            prop_assert!(b.objective <= a.objective);
        }
    }

    #[test]
    fn identical_problems_give_identical_plans(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng);
        let a = solve_allocation(&p).ok();
        let b = solve_allocation(&p.clone()).ok();
        prop_assert_eq!(a, b);
    }
}

mod common;

use evosi::degree::{sample_iid_degrees, DegreeCounts};
use evosi::epidemic::{
    avosi_jump_distribution, drift, infection_allowed, run_ab_avosi, run_ab_avosi_observed, run_avosi,
    run_avosi_observed, run_evosi, snapshot, EpidemicParams, EpidemicState, InitialRule, JumpKind,
};
use evosi::harness::{stage1_report, ExperimentPlan};
use evosi::{rng, DegreeModel, DegreeSequence, MultiGraph};
use proptest::prelude::*;

fn state(n: usize, x_infected: u64, s_k: Vec<u64>, infected: u64) -> EpidemicState {
    let sus_edges: u64 = s_k.iter().enumerate().map(|(k, &s)| k as u64 * s).sum();
    let susceptible = s_k.iter().sum();
    EpidemicState { n, x_total: x_infected + sus_edges, x_infected, s_k, infected, susceptible, t: 0.0, jumps: 0 }
}

#[test]
fn evosi_single_edge_without_rewiring() {
    let g = MultiGraph::from_edges(2, vec![(0, 1)]);
    let mut p = EpidemicParams::new(2.0, 0.0, 2);
    p.initial = InitialRule::Vertex(0);
    for s in 0..200 {
        assert_eq!(run_evosi(&g, &p, s).unwrap().final_size, 2);
    }
}

#[test]
fn evosi_isolated_seed() {
    let g = MultiGraph::from_edges(3, vec![(1, 2)]);
    let mut p = EpidemicParams::new(1.0, 1.0, 3);
    p.initial = InitialRule::Vertex(0);
    let rec = run_evosi(&g, &p, 9).unwrap();
    assert_eq!(rec.final_size, 1);
    assert_eq!(rec.gamma, Some(0.0));
    assert_eq!(rec.jumps, 0);
}

#[test]
fn evosi_path_matches_exact_law() {
    // Path 0-1-2 seeded at the end: a rewired edge may land anywhere.
    let edges = [(0u8, 1u8), (1, 2)];
    let exact = common::evosi_final_size_law(3, &edges, 0, 1.0, 0.5);
    let g = MultiGraph::from_edges(3, vec![(0, 1), (1, 2)]);
    let mut p = EpidemicParams::new(1.0, 0.5, 3);
    p.initial = InitialRule::Vertex(0);
    let trials = 100_000u64;
    let mut counts = [0u64; 4];
    for s in 0..trials {
        counts[run_evosi(&g, &p, rng::trial_seed(71, s)).unwrap().final_size as usize] += 1;
    }
    assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for k in 1..=3 {
        let sd = (exact[k] * (1.0 - exact[k]) / trials as f64).sqrt();
        assert!((counts[k] as f64 / trials as f64 - exact[k]).abs() < 4.0 * sd.max(1e-4), "k={k}");
    }
}

#[test]
fn avosi_isolated_seed() {
    let seq = DegreeSequence::new(vec![0, 0, 0, 0]);
    let rec = run_avosi(&seq, &EpidemicParams::new(1.0, 1.0, 4), 3).unwrap();
    assert_eq!(rec.final_size, 1);
    assert_eq!(rec.jumps, 0);
}

#[test]
fn jump_law_examples() {
    // lambda = rho, X_t - 1 = 100, S_3 = 10: 3 * 10 / 100 / 2.
    let s = state(200, 71, vec![0, 0, 0, 10], 190);
    let law = avosi_jump_distribution(&s, &EpidemicParams::new(1.0, 1.0, 200)).unwrap();
    assert!((law.probability(JumpKind::Infect(3)) - 0.15).abs() < 1e-15);

    let s = state(50, 1, vec![0, 3, 2], 45);
    let law = avosi_jump_distribution(&s, &EpidemicParams::new(1.0, 2.0, 50)).unwrap();
    assert_eq!(law.probability(JumpKind::PairInfected), 0.0);

    let s = state(30, 9, vec![], 30);
    let law = avosi_jump_distribution(&s, &EpidemicParams::new(1.0, 3.0, 30)).unwrap();
    assert_eq!(law.rewire_to_susceptible(), 0.0);
    assert!((law.probability(JumpKind::RewireToInfected) - 0.75).abs() < 1e-15);
}

#[test]
fn lone_infected_half_edge_absorbs() {
    let s = state(3, 1, vec![0, 0, 0], 1);
    assert!(avosi_jump_distribution(&s, &EpidemicParams::new(1.0, 0.0, 3)).is_err());
    assert!(s.absorbed());
}

#[test]
fn ab_guard() {
    assert!(!infection_allowed(1, 2));
    assert!(!infection_allowed(2, 2));
    assert!(infection_allowed(2, 0));
}

#[test]
fn ab_equals_avosi_without_rewiring() {
    let model = DegreeModel::regular(3).unwrap();
    let seq = sample_iid_degrees(&model, 500, &mut rng::stream(1, rng::GRAPH));
    let p = EpidemicParams::new(1.0, 0.0, 500);
    for s in 0..500 {
        let a = run_avosi(&seq, &p, s).unwrap();
        let b = run_ab_avosi(&seq, &p, s).unwrap();
        assert_eq!((a.final_size, a.jumps), (b.final_size, b.jumps), "seed {s}");
    }
}

#[test]
fn drift_examples() {
    let n = 10_000usize;
    let counts = DegreeCounts::from_sequence(&DegreeSequence::new(vec![3; n]));
    let s = EpidemicState::initial(&counts, 3);
    let p = EpidemicParams::new(1.0, 1.0, n);
    let nf = n as f64;
    let xm1 = 3.0 * nf - 1.0;
    let expected = -2.0 * xm1 + 9.0 * (nf - 1.0) - (nf - 1.0) / nf * xm1;
    assert!((drift(&s, &p) - expected).abs() < 1e-9);
    assert!(drift(&s, &p).abs() < nf.ln());

    let s = state(10, 7, vec![0; 4], 10);
    assert_eq!(drift(&s, &p), -2.0 * 6.0);
}

/// Largest `|drift - m1 delta n t| / (n t^2 + n^{2/3})` seen along surviving paths.
fn drift_constant(n: usize, trials: u64) -> f64 {
    let model = DegreeModel::regular(3).unwrap();
    let seq = DegreeSequence::new(vec![3; n]);
    let mut p = EpidemicParams::new(1.0, 1.0, n);
    let nf = n as f64;
    let horizon = 2.0 * nf.powf(-1.0 / 3.0);
    p.checkpoints = vec![horizon];
    p.stop_after_checkpoints = true;
    let m1_delta = 3.0 * evosi::degree::delta(&model);
    let mut worst: f64 = 0.0;
    for s in 0..trials {
        let mut path = Vec::new();
        run_avosi_observed(&seq, &p, s, |st| {
            if st.t <= horizon {
                path.push((st.t, drift(st, &p)));
            }
        })
        .unwrap();
        for (t, d) in path {
            worst = worst.max((d - m1_delta * nf * t).abs() / (nf * t * t + nf.powf(2.0 / 3.0)));
        }
    }
    worst
}

#[test]
fn drift_tracks_linear_growth() {
    let small = drift_constant(10_000, 300);
    let large = drift_constant(100_000, 100);
    assert!(small < 20.0 && large < 20.0, "constants {small} {large}");
}

#[test]
fn snapshots_at_start_and_after_absorption() {
    let n = 100;
    let seq = DegreeSequence::new(vec![3; n]);
    let mut p = EpidemicParams::new(1.0, 1.0, n);
    p.checkpoints = vec![0.0, 1e9];
    for s in 0..50 {
        let rec = run_avosi(&seq, &p, s).unwrap();
        assert_eq!(rec.checkpoints[0].x_infected, 3);
        assert_eq!(rec.checkpoints[0].jumps, 0);
        assert_eq!(rec.checkpoints[1].x_infected, 0);
        assert_eq!(rec.checkpoints[1].infected, rec.final_size);
    }
    let st = state(5, 2, vec![0, 3], 2);
    let c = snapshot(&st, 0.25);
    assert_eq!((c.t, c.x_infected, c.x_total, c.infected), (0.25, 2, 5, 2));
}

#[test]
fn jump_counts_concentrate_at_early_checkpoint() {
    let mut plan = ExperimentPlan::new(DegreeModel::regular(3).unwrap(), 1.0, vec![1_000_000], 20_000, 12);
    plan.q = 0.1;
    let r = &stage1_report(&plan).unwrap()[0];
    assert!((r.jump_budget - 6000.0).abs() < 1e-6);
    assert!(r.survival.successes >= 100, "{} survivors", r.survival.successes);
    assert!(r.jump_window_rate >= 0.99, "rate {}", r.jump_window_rate);
}

fn small_case() -> impl Strategy<Value = (Vec<u32>, f64, f64, u64)> {
    (prop::collection::vec(0u32..6, 2..60), 0.1f64..3.0, 0.0f64..3.0, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn ledger_and_pool_monotonicity((mut degrees, lambda, rho, seed) in small_case()) {
        if degrees.iter().sum::<u32>() % 2 == 1 {
            degrees[0] += 1;
        }
        let n = degrees.len();
        let seq = DegreeSequence::new(degrees);
        let p = EpidemicParams::new(lambda, rho, n);
        for ab in [false, true] {
            let mut prev: Option<u64> = None;
            let mut ok = true;
            let mut check = |s: &EpidemicState| {
                ok &= s.ledger_holds();
                if let Some(x) = prev {
                    ok &= x == s.x_total || x == s.x_total + 2;
                }
                prev = Some(s.x_total);
            };
            let rec = if ab {
                run_ab_avosi_observed(&seq, &p, seed, &mut check).unwrap()
            } else {
                run_avosi_observed(&seq, &p, seed, &mut check).unwrap()
            };
            prop_assert!(ok);
            prop_assert!(rec.final_size >= 1 && rec.final_size as usize <= n);
        }
    }

    #[test]
    fn jump_law_is_normalized(
        s_k in prop::collection::vec(0u64..30, 1..10),
        infected in 1u64..40,
        x_infected in 1u64..60,
        lambda in 0.05f64..5.0,
        rho in 0.0f64..5.0,
    ) {
        let n = (infected + s_k.iter().sum::<u64>()) as usize;
        let st = state(n, x_infected, s_k, infected);
        prop_assume!(st.x_total >= 2);
        let law = avosi_jump_distribution(&st, &EpidemicParams::new(lambda, rho, n)).unwrap();
        prop_assert_eq!(law.pairing.iter().map(|p| p.1).sum::<u64>(), st.x_total - 1);
        prop_assert_eq!(law.rewiring.iter().map(|p| p.1).sum::<u64>(), n as u64);
        let total: f64 = law.probabilities().iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn evosi_final_size_in_range(mut degrees in prop::collection::vec(0u32..5, 2..40), seed in any::<u64>()) {
        if degrees.iter().sum::<u32>() % 2 == 1 {
            degrees[0] += 1;
        }
        let n = degrees.len();
        let g = evosi::graph::build_configuration_model(&DegreeSequence::new(degrees), &mut rng::stream(seed, rng::GRAPH)).unwrap();
        let rec = run_evosi(&g, &EpidemicParams::new(1.0, 1.0, n), seed).unwrap();
        prop_assert!(rec.final_size >= 1 && rec.final_size as usize <= n);
    }
}

use evosi::harness::{
    emit, estimate_outbreak_probability, estimates_csv, stage1_report, stage2_report, stage3_report, to_jsonl,
    Estimate, ExperimentPlan, LambdaMode, SequenceMode, Simulator, Summary, TOLERANCE_NOTE,
};
use evosi::stats::wilson_interval;
use evosi::{rng, DegreeModel, Error};
use rand::Rng;

fn regular3() -> DegreeModel {
    DegreeModel::regular(3).unwrap()
}

#[test]
fn wilson_interval_coverage() {
    for (p, trials) in [(0.02, 500u64), (0.3, 200), (0.5, 50)] {
        let mut r = rng::stream(5, rng::DETAIL);
        let covered = (0..1000)
            .filter(|_| {
                let hits = (0..trials).filter(|_| r.random::<f64>() < p).count() as u64;
                wilson_interval(hits, trials).contains(p)
            })
            .count();
        assert!(covered >= 930, "p={p}: {covered}/1000");
    }
}

#[test]
fn impossible_threshold_gives_zero() {
    let mut plan = ExperimentPlan::new(regular3(), 1.0, vec![200, 400], 300, 1);
    plan.epsilon = 1.1;
    for e in estimate_outbreak_probability(&plan).unwrap() {
        assert_eq!(e.successes, 0);
        assert_eq!(e.value, 0.0);
    }
}

fn scaled_at(lambda: LambdaMode, n: usize, trials: u64, seed: u64) -> Estimate {
    let mut plan = ExperimentPlan::new(regular3(), 1.0, vec![n], trials, seed);
    plan.lambda_mode = lambda;
    estimate_outbreak_probability(&plan).unwrap()[0]
}

#[test]
fn subcritical_rate_suppresses_outbreaks() {
    let critical = scaled_at(LambdaMode::Critical, 10_000, 20_000, 3);
    let low = scaled_at(LambdaMode::Explicit(0.1), 10_000, 20_000, 3);
    assert!(critical.successes >= 100);
    assert!(low.scaled < 0.1 * critical.scaled, "{} vs {}", low.scaled, critical.scaled);
}

#[test]
fn scaled_probability_is_size_independent() {
    let small = scaled_at(LambdaMode::Explicit(1.0), 2000, 50_000, 4);
    let large = scaled_at(LambdaMode::Explicit(1.0), 16_000, 50_000, 4);
    let (a, b) = (small.scaled_ci().widened(1.25), large.scaled_ci().widened(1.25));
    assert!(a.overlaps(&b), "n=2000: {:.4} {a:?}; n=16000: {:.4} {b:?}", small.scaled, large.scaled);
}

#[test]
fn scaled_probability_is_threshold_independent() {
    let at = |eps: f64| {
        let mut plan = ExperimentPlan::new(regular3(), 1.0, vec![16_000], 20_000, 6);
        plan.epsilon = eps;
        estimate_outbreak_probability(&plan).unwrap()[0]
    };
    let est: Vec<Estimate> = [0.02, 0.05, 0.1].into_iter().map(at).collect();
    for i in 0..3 {
        for j in i + 1..3 {
            assert!(est[i].ci().overlaps(&est[j].ci()), "{:?}", est.iter().map(|e| e.value).collect::<Vec<_>>());
        }
    }
}

#[test]
fn fixed_and_resampled_sequences_agree_for_regular_degrees() {
    let mut plan = ExperimentPlan::new(regular3(), 1.0, vec![1000], 2000, 8);
    let resampled = estimate_outbreak_probability(&plan).unwrap();
    plan.sequence_mode = SequenceMode::Fixed;
    let fixed = estimate_outbreak_probability(&plan).unwrap();
    assert_eq!(resampled, fixed);
}

#[test]
fn outputs_are_deterministic_across_pool_sizes() {
    let plan = {
        let mut p = ExperimentPlan::new(DegreeModel::poisson(3.0).unwrap(), 1.0, vec![500, 1000], 3000, 21);
        p.simulator = Simulator::Evosi;
        p
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let est = estimate_outbreak_probability(&plan).unwrap();
            let json = serde_json::to_string(&Summary::new(&plan, est.clone())).unwrap();
            (estimates_csv(&est), json, to_jsonl(&est))
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn emit_writes_files() {
    let dir = std::env::temp_dir().join(format!("evosi-emit-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("out.csv");
    let est = vec![Estimate::from_counts(1000, 5, 100)];
    emit(Some(&path), &estimates_csv(&est)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("n,trials,successes,value,ci_low,ci_high,scaled\n1000,100,5,0.05,"));
    std::fs::remove_dir_all(dir).unwrap();
    let summary = Summary::new(&ExperimentPlan::new(regular3(), 1.0, vec![1000], 100, 0), est);
    assert_eq!(summary.note, TOLERANCE_NOTE);
    assert!(summary.fit.is_none());
}

#[test]
fn stage1_without_rewiring_uses_plain_budget() {
    let mut plan = ExperimentPlan::new(regular3(), 0.0, vec![1000], 500, 2);
    plan.lambda_mode = LambdaMode::Explicit(1.0);
    plan.q = 0.1;
    let r = &stage1_report(&plan).unwrap()[0];
    // 1 + rho/lambda = 1.
    assert!((r.jump_budget - 3.0 * 0.1 * 100.0).abs() < 1e-9);
    assert!(r.endpoints.iter().all(|&x| x > 0.0));
}

#[test]
fn stage2_diffusion_at_scale() {
    let mut plan = ExperimentPlan::new(regular3(), 1.0, vec![1_000_000], 150_000, 31);
    plan.q = 0.5;
    plan.big_q = 3.0;
    plan.s_grid = vec![1.0, 1.5, 2.0];
    let r = &stage2_report(&plan).unwrap()[0];
    assert!(r.survivors >= 3000, "{} survivors", r.survivors);
    let first = r.points[0];
    assert_eq!((first.s, first.mean, first.variance), (0.5, 0.0, 0.0));
    let mid = r.points.iter().find(|p| p.s == 1.5).unwrap();
    // c_diff^2 = m3 - 3 m2 + 2 m1 = 6 and s - q = 1.
    assert!((mid.predicted_variance - 6.0).abs() < 1e-12);
    assert!((mid.variance - 6.0).abs() <= 0.25 * 6.0, "variance {}", mid.variance);
}

#[test]
fn negative_drift_prevents_takeoff() {
    let mut plan = ExperimentPlan::new(DegreeModel::poisson(1.25).unwrap(), 1.0, vec![100_000], 60_000, 41);
    plan.q = 0.5;
    plan.big_q = 8.0;
    let r = &stage2_report(&plan).unwrap()[0];
    assert!(r.survivors >= 100, "{} survivors", r.survivors);
    assert!(r.takeoff.value < 0.02, "takeoff {}", r.takeoff.value);
}

#[test]
fn stage2_needs_ordered_times() {
    let mut plan = ExperimentPlan::new(regular3(), 1.0, vec![1000], 10, 0);
    plan.q = 2.0;
    plan.big_q = 1.0;
    assert!(matches!(stage2_report(&plan), Err(Error::InvalidParameter(_))));
}

#[test]
fn stage3_unreachable_threshold() {
    let mut plan = ExperimentPlan::new(regular3(), 1.0, vec![2000], 500, 9);
    plan.big_q = 1e4;
    let r = &stage3_report(&plan).unwrap()[0];
    assert_eq!(r.conditioned, 0);
    assert!(r.outbreak.is_none() && r.band_constant.is_none());
}

#[test]
fn stage3_takeoff_leads_to_outbreak() {
    let mut plan = ExperimentPlan::new(regular3(), 1.0, vec![100_000], 10_000, 13);
    plan.big_q = 5.0;
    let r = &stage3_report(&plan).unwrap()[0];
    let out = r.outbreak.expect("some trials pass the threshold");
    assert!(out.trials >= 50, "{} conditioned", out.trials);
    assert!(out.value >= 0.9, "{}", out.value);
    assert!(r.band_constant.unwrap().is_finite());
}

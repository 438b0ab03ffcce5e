use std::collections::HashMap;

use evosi::graph::build_configuration_model;
use evosi::{rng, DegreeSequence, Error, HalfEdgePool, MultiGraph};
use proptest::prelude::*;

fn canonical(g: &MultiGraph) -> Vec<(u32, u32)> {
    let mut e: Vec<(u32, u32)> = g.edges().iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    e.sort_unstable();
    e
}

fn frequencies(degrees: Vec<u32>, builds: u64, seed: u64) -> HashMap<Vec<(u32, u32)>, u64> {
    let seq = DegreeSequence::new(degrees);
    let mut counts = HashMap::new();
    for i in 0..builds {
        let g = build_configuration_model(&seq, &mut rng::stream(rng::trial_seed(seed, i), rng::GRAPH)).unwrap();
        *counts.entry(canonical(&g)).or_insert(0) += 1;
    }
    counts
}

#[test]
fn forced_matchings() {
    for seed in 0..20 {
        let g = build_configuration_model(&DegreeSequence::new(vec![1, 1]), &mut rng::stream(seed, rng::GRAPH)).unwrap();
        assert_eq!(canonical(&g), vec![(0, 1)]);
        let g = build_configuration_model(&DegreeSequence::new(vec![2, 0]), &mut rng::stream(seed, rng::GRAPH)).unwrap();
        assert_eq!(canonical(&g), vec![(0, 0)]);
    }
}

#[test]
fn odd_sum_is_rejected() {
    let err = build_configuration_model(&DegreeSequence::new(vec![1, 2]), &mut rng::stream(0, rng::GRAPH));
    assert!(matches!(err, Err(Error::OddDegreeSum(3))));
}

#[test]
fn four_leaves_match_uniformly() {
    let counts = frequencies(vec![1, 1, 1, 1], 100_000, 3);
    assert_eq!(counts.len(), 3);
    for m in [vec![(0, 1), (2, 3)], vec![(0, 2), (1, 3)], vec![(0, 3), (1, 2)]] {
        let f = counts[&m] as f64 / 1e5;
        assert!((f - 1.0 / 3.0).abs() < 0.01, "{m:?}: {f}");
    }
}

#[test]
fn relabelling_equal_degrees_preserves_law() {
    // Six half-edges have 15 matchings: 8 triangles, 1 with three loops and
    // 2 for each loop-plus-double-edge configuration.
    let builds = 150_000u64;
    let counts = frequencies(vec![2, 2, 2], builds, 4);
    let exact = [
        (vec![(0, 1), (0, 2), (1, 2)], 8.0 / 15.0),
        (vec![(0, 0), (1, 1), (2, 2)], 1.0 / 15.0),
        (vec![(0, 0), (1, 2), (1, 2)], 2.0 / 15.0),
        (vec![(0, 2), (0, 2), (1, 1)], 2.0 / 15.0),
        (vec![(0, 1), (0, 1), (2, 2)], 2.0 / 15.0),
    ];
    assert_eq!(counts.len(), exact.len());
    for (m, p) in exact {
        let f = counts[&m] as f64 / builds as f64;
        let sd = (p * (1.0 - p) / builds as f64).sqrt();
        assert!((f - p).abs() < 5.0 * sd, "{m:?}: {f} vs {p}");
    }
}

#[test]
fn pool_draws_are_uniform() {
    let k = 10;
    let pool = HalfEdgePool::new(&DegreeSequence::new(vec![1; k]));
    let draws = 1_000_000u32;
    let mut hits = vec![0u32; k];
    let mut r = rng::stream(8, rng::GRAPH);
    for _ in 0..draws {
        hits[pool.draw(&mut r).unwrap() as usize] += 1;
    }
    let p = 1.0 / k as f64;
    let sd = (p * (1.0 - p) / draws as f64).sqrt();
    for h in hits {
        assert!((h as f64 / draws as f64 - p).abs() < 5.0 * sd);
    }
}

#[test]
fn pool_edge_cases() {
    let mut r = rng::stream(1, rng::GRAPH);
    let single = HalfEdgePool::new(&DegreeSequence::new(vec![1]));
    assert_eq!(single.draw(&mut r).unwrap(), 0);
    let mut two = HalfEdgePool::new(&DegreeSequence::new(vec![1, 1]));
    assert!(two.remove(0));
    assert!(!two.remove(0));
    for _ in 0..10 {
        assert_eq!(two.draw(&mut r).unwrap(), 1);
    }
    assert_eq!(two.take(&mut r).unwrap(), 1);
    assert!(two.is_empty());
    assert!(matches!(two.draw(&mut r), Err(Error::EmptyPool)));
}

#[test]
fn pool_stays_uniform_after_removals() {
    let mut pool = HalfEdgePool::new(&DegreeSequence::new(vec![1; 6]));
    pool.remove(0);
    pool.remove(3);
    let mut r = rng::stream(2, rng::GRAPH);
    let mut hits = [0u32; 6];
    for _ in 0..400_000 {
        hits[pool.draw(&mut r).unwrap() as usize] += 1;
    }
    assert_eq!(hits[0] + hits[3], 0);
    for i in [1, 2, 4, 5] {
        assert!((hits[i] as f64 / 4e5 - 0.25).abs() < 5.0 * (0.25 * 0.75 / 4e5f64).sqrt());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn degrees_are_preserved(mut degrees in prop::collection::vec(0u32..7, 1..40), seed in any::<u64>()) {
        if degrees.iter().sum::<u32>() % 2 == 1 {
            degrees[0] += 1;
        }
        let seq = DegreeSequence::new(degrees.clone());
        let g = build_configuration_model(&seq, &mut rng::stream(seed, rng::GRAPH)).unwrap();
        prop_assert_eq!(g.edges().len() as u32, degrees.iter().sum::<u32>() / 2);
        for (v, &d) in degrees.iter().enumerate() {
            prop_assert_eq!(g.degree(v), d as usize);
        }
    }
}

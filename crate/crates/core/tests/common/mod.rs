//! Shared oracles for the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

type Edges = Vec<(u8, u8)>;

fn normalize(mut edges: Edges) -> Edges {
    for e in edges.iter_mut() {
        if e.0 > e.1 {
            *e = (e.1, e.0);
        }
    }
    edges.sort_unstable();
    edges
}

/// Exact final-size law of evoSI on a tiny multigraph, by enumerating the
/// reachable (edge multiset, infected set) states and iterating the embedded
/// jump chain to its absorption probabilities. Entry `k` is `P(final = k)`.
pub fn evosi_final_size_law(n: usize, edges: &[(u8, u8)], seed: u8, lambda: f64, rho: f64) -> Vec<f64> {
    assert!(n <= 8);
    let start = (normalize(edges.to_vec()), 1u8 << seed);
    let mut index: HashMap<(Edges, u8), usize> = HashMap::new();
    let mut states = vec![start.clone()];
    index.insert(start, 0);
    let mut moves: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let (edges, inf) = states[i].clone();
        let is_inf = |v: u8| inf & (1 << v) != 0;
        let si: Vec<usize> = (0..edges.len()).filter(|&e| is_inf(edges[e].0) != is_inf(edges[e].1)).collect();
        let mut out = Vec::new();
        let total = si.len() as f64 * (lambda + rho);
        for &e in &si {
            let (a, b) = edges[e];
            let s_end = if is_inf(a) { b } else { a };
            let mut targets = vec![((edges.clone(), inf | (1 << s_end)), lambda / total)];
            for w in 0..n as u8 {
                let mut next = edges.clone();
                next[e] = (s_end, w);
                targets.push(((normalize(next), inf), rho / (total * n as f64)));
            }
            for (state, p) in targets {
                let j = *index.entry(state.clone()).or_insert_with(|| {
                    states.push(state);
                    states.len() - 1
                });
                out.push((j, p));
            }
        }
        moves.push(out);
        i += 1;
    }
    let mut law = vec![vec![0.0; n + 1]; states.len()];
    for (s, (_, inf)) in states.iter().enumerate() {
        if moves[s].is_empty() {
            law[s][inf.count_ones() as usize] = 1.0;
        }
    }
    for _ in 0..200_000 {
        let mut change: f64 = 0.0;
        for s in 0..states.len() {
            if moves[s].is_empty() {
                continue;
            }
            let mut next = vec![0.0; n + 1];
            for &(j, p) in &moves[s] {
                for k in 0..=n {
                    next[k] += p * law[j][k];
                }
            }
            for k in 0..=n {
                change = change.max((next[k] - law[s][k]).abs());
            }
            law[s] = next;
        }
        if change < 1e-15 {
            break;
        }
    }
    law[0].clone()
}

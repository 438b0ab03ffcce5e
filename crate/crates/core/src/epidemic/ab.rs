//! AB-avoSI: avoSI with infection and rewiring stamps on every half-edge.
//!
//! Each half-edge `h` carries `A(h)`, the time it was first infected, and
//! `B(h)`, the time it last rewired (zero if never). An infected half-edge
//! `h` pairing with a susceptible `h'` infects only when `B(h') < A(h)`;
//! blocked pairs are still consumed. The clock is the jump index: the jump
//! numbered `l` happens at stamp `2l`, and the initial vertex's half-edges
//! get stamp 1, so they precede every event but follow "never rewired".

use rand::Rng;

use super::jump::sample_jump;
use super::{uniform_vertex_degree, Clock, EpidemicParams, EpidemicState, InitialRule, JumpKind, TrialRecord};
use crate::degree::{DegreeCounts, DegreeSequence};
use crate::error::Result;
use crate::rng;

const INITIAL_STAMP: u64 = 1;

/// The AB guard: `h` may infect `h'` only when `B(h') < A(h)`.
pub fn infection_allowed(a_source: u64, b_target: u64) -> bool {
    b_target < a_source
}

/// Per-half-edge stamps.
#[derive(Debug, Clone, Default)]
pub struct AbIndices {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
}

struct Swappable {
    items: Vec<u32>,
}

impl Swappable {
    fn push(&mut self, x: u32, pos: &mut [u32]) {
        pos[x as usize] = self.items.len() as u32;
        self.items.push(x);
    }

    fn remove(&mut self, x: u32, pos: &mut [u32]) {
        let at = pos[x as usize] as usize;
        self.items.swap_remove(at);
        if let Some(&moved) = self.items.get(at) {
            pos[moved as usize] = at as u32;
        }
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.items[rng.random_range(0..self.items.len())]
    }
}

struct World {
    /// Unpaired half-edges held by each susceptible vertex.
    held: Vec<Swappable>,
    held_pos: Vec<u32>,
    buckets: Vec<Swappable>,
    bucket_pos: Vec<u32>,
    infected_pool: Swappable,
    pool_pos: Vec<u32>,
    stamps: AbIndices,
}

impl World {
    fn build(counts: &DegreeCounts, seed_degree: usize) -> (Self, u32) {
        let total = counts.total_degree() as usize;
        let n = counts.n;
        let mut w = World {
            held: (0..n).map(|_| Swappable { items: Vec::new() }).collect(),
            held_pos: vec![0; total],
            buckets: (0..counts.counts.len() + 5).map(|_| Swappable { items: Vec::new() }).collect(),
            bucket_pos: vec![0; n],
            infected_pool: Swappable { items: Vec::with_capacity(total) },
            pool_pos: vec![0; total],
            stamps: AbIndices { a: vec![0; total], b: vec![0; total] },
        };
        let mut h = 0u32;
        let mut v = 0u32;
        let mut seed_vertex = None;
        for (k, &c) in counts.counts.iter().enumerate() {
            for _ in 0..c {
                for _ in 0..k {
                    w.held[v as usize].push(h, &mut w.held_pos);
                    h += 1;
                }
                if k == seed_degree && seed_vertex.is_none() {
                    seed_vertex = Some(v);
                } else {
                    w.buckets[k].push(v, &mut w.bucket_pos);
                }
                v += 1;
            }
        }
        let seed_vertex = seed_vertex.expect("seed degree present");
        w.infect_vertex(seed_vertex, INITIAL_STAMP);
        (w, seed_vertex)
    }

    fn infect_vertex(&mut self, v: u32, now: u64) {
        let items = std::mem::take(&mut self.held[v as usize].items);
        for h in items {
            if self.stamps.a[h as usize] == 0 {
                self.stamps.a[h as usize] = now;
            }
            self.infected_pool.push(h, &mut self.pool_pos);
        }
    }

    fn move_bucket(&mut self, v: u32, from: usize, to: usize) {
        if to >= self.buckets.len() {
            self.buckets.resize_with(to + 5, || Swappable { items: Vec::new() });
        }
        self.buckets[from].remove(v, &mut self.bucket_pos);
        self.buckets[to].push(v, &mut self.bucket_pos);
    }
}

/// Simulates AB-avoSI on the configuration model of `seq`.
///
/// Jump categories come from the same stream and law as [`super::run_avosi`],
/// so without rewiring the two trajectories coincide; concrete vertices and
/// half-edges are drawn from a separate detail stream.
pub fn run_ab_avosi(seq: &DegreeSequence, params: &EpidemicParams, seed: u64) -> Result<TrialRecord> {
    params.validate()?;
    let counts = DegreeCounts::from_sequence(seq);
    let seed_degree = match params.initial {
        InitialRule::Uniform => uniform_vertex_degree(&counts, &mut rng::stream(seed, rng::DEGREES)),
        InitialRule::Vertex(v) => seq.degrees()[v] as usize,
    };
    Ok(simulate(&counts, seed_degree, params, seed, |_| {}))
}

/// AB-avoSI from degree counts with a uniformly chosen initial vertex.
pub fn run_ab_avosi_counts(counts: &DegreeCounts, params: &EpidemicParams, seed: u64) -> Result<TrialRecord> {
    params.validate()?;
    let seed_degree = uniform_vertex_degree(counts, &mut rng::stream(seed, rng::DEGREES));
    Ok(simulate(counts, seed_degree, params, seed, |_| {}))
}

/// Runs AB-avoSI and passes every post-jump state to `observe`.
pub fn run_ab_avosi_observed<F: FnMut(&EpidemicState)>(
    seq: &DegreeSequence,
    params: &EpidemicParams,
    seed: u64,
    observe: F,
) -> Result<TrialRecord> {
    params.validate()?;
    let counts = DegreeCounts::from_sequence(seq);
    let seed_degree = match params.initial {
        InitialRule::Uniform => uniform_vertex_degree(&counts, &mut rng::stream(seed, rng::DEGREES)),
        InitialRule::Vertex(v) => seq.degrees()[v] as usize,
    };
    Ok(simulate(&counts, seed_degree, params, seed, observe))
}

fn simulate<F: FnMut(&EpidemicState)>(
    counts: &DegreeCounts,
    seed_degree: usize,
    params: &EpidemicParams,
    seed: u64,
    mut observe: F,
) -> TrialRecord {
    let mut state = EpidemicState::initial(counts, seed_degree);
    let (mut w, _) = World::build(counts, seed_degree);
    let mut jumps = rng::stream(seed, rng::JUMPS);
    let mut detail = rng::stream(seed, rng::DETAIL);
    let mut clock = Clock::new(&params.checkpoints, rng::stream(seed, rng::CLOCK));
    let pair = params.pair_probability();
    let threshold = params.outbreak_size();
    let mut stopped_early = false;

    while !state.absorbed() {
        if params.should_stop(state.infected, clock.done()) {
            stopped_early = true;
            break;
        }
        let rate = state.total_rate(params);
        clock.advance(&mut state, rate);
        let kind = sample_jump(&state, pair, &mut jumps);
        let now = 2 * (state.jumps + 1);
        let h = w.infected_pool.pick(&mut detail);
        match kind {
            JumpKind::Infect(k) => {
                let v = w.buckets[k].pick(&mut detail);
                let target = w.held[v as usize].pick(&mut detail);
                w.infected_pool.remove(h, &mut w.pool_pos);
                w.held[v as usize].remove(target, &mut w.held_pos);
                if infection_allowed(w.stamps.a[h as usize], w.stamps.b[target as usize]) {
                    w.buckets[k].remove(v, &mut w.bucket_pos);
                    w.infect_vertex(v, now);
                    state.apply(kind);
                } else {
                    w.move_bucket(v, k, k - 1);
                    state.s_k[k] -= 1;
                    state.s_k[k - 1] += 1;
                    state.x_infected -= 1;
                    state.x_total -= 2;
                    state.jumps += 1;
                }
            }
            JumpKind::PairInfected => {
                let len = w.infected_pool.items.len();
                let at = w.pool_pos[h as usize] as usize;
                let mut r = detail.random_range(0..len - 1);
                if r >= at {
                    r += 1;
                }
                let other = w.infected_pool.items[r];
                w.infected_pool.remove(h, &mut w.pool_pos);
                w.infected_pool.remove(other, &mut w.pool_pos);
                state.apply(kind);
            }
            JumpKind::RewireToSusceptible(k) => {
                let v = w.buckets[k].pick(&mut detail);
                w.infected_pool.remove(h, &mut w.pool_pos);
                w.held[v as usize].push(h, &mut w.held_pos);
                w.stamps.b[h as usize] = now;
                w.move_bucket(v, k, k + 1);
                state.apply(kind);
            }
            JumpKind::RewireToInfected => {
                w.stamps.b[h as usize] = now;
                state.apply(kind);
            }
        }
        debug_assert_eq!(w.infected_pool.items.len() as u64, state.x_infected);
        observe(&state);
    }
    clock.finish(&state);
    TrialRecord {
        seed,
        n: params.n,
        lambda: params.lambda,
        rho: params.rho,
        final_size: state.infected,
        gamma: (clock.running() && !stopped_early).then_some(state.t),
        jumps: state.jumps,
        outbreak: state.infected as f64 > threshold,
        stopped_early,
        checkpoints: clock.records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::run_avosi;

    #[test]
    fn guard_blocks_later_rewiring() {
        assert!(!infection_allowed(1, 2));
        assert!(infection_allowed(1, 0));
        assert!(infection_allowed(4, 2));
    }

    #[test]
    fn no_rewiring_matches_avosi_path_by_path() {
        let seq = DegreeSequence::new((0..600).map(|i| 1 + (i % 4) as u32).collect());
        let p = EpidemicParams::new(1.0, 0.0, 600);
        for s in 0..300 {
            let a = run_avosi(&seq, &p, s).unwrap();
            let b = run_ab_avosi(&seq, &p, s).unwrap();
            assert_eq!(a.final_size, b.final_size);
            assert_eq!(a.jumps, b.jumps);
        }
    }
}

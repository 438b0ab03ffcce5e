//! evoSI on an explicit multigraph, by the Gillespie direct method.
//!
//! Every S–I edge fires at rate `lambda + rho`, so each event picks a uniform
//! S–I edge and then either infects its susceptible end or lets the
//! susceptible end drop the infected neighbour and reconnect to a uniformly
//! chosen vertex. Self-loops and multi-edges are allowed.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{snapshot, Checkpoint, EpidemicParams, EpidemicState, InitialRule, TrialRecord};
use crate::error::{Error, Result};
use crate::graph::MultiGraph;
use crate::rng;

const ABSENT: u32 = u32::MAX;

struct Dynamic {
    ends: Vec<[u32; 2]>,
    /// Incident `(edge, side)` stubs per vertex.
    incident: Vec<Vec<(u32, u8)>>,
    stub_pos: Vec<[u32; 2]>,
    infected: Vec<bool>,
    si: Vec<u32>,
    si_pos: Vec<u32>,
}

impl Dynamic {
    fn new(graph: &MultiGraph) -> Self {
        let n = graph.n();
        let m = graph.edges().len();
        let mut d = Dynamic {
            ends: Vec::with_capacity(m),
            incident: vec![Vec::new(); n],
            stub_pos: vec![[0; 2]; m],
            infected: vec![false; n],
            si: Vec::new(),
            si_pos: vec![ABSENT; m],
        };
        for (e, &(a, b)) in graph.edges().iter().enumerate() {
            d.ends.push([a, b]);
            d.attach(e as u32, 0, a);
            d.attach(e as u32, 1, b);
        }
        d
    }

    fn attach(&mut self, e: u32, side: u8, v: u32) {
        self.stub_pos[e as usize][side as usize] = self.incident[v as usize].len() as u32;
        self.incident[v as usize].push((e, side));
        self.ends[e as usize][side as usize] = v;
    }

    fn detach(&mut self, e: u32, side: u8) {
        let v = self.ends[e as usize][side as usize] as usize;
        let at = self.stub_pos[e as usize][side as usize] as usize;
        self.incident[v].swap_remove(at);
        if let Some(&(moved, s)) = self.incident[v].get(at) {
            self.stub_pos[moved as usize][s as usize] = at as u32;
        }
    }

    fn is_si(&self, e: u32) -> bool {
        let [a, b] = self.ends[e as usize];
        self.infected[a as usize] != self.infected[b as usize]
    }

    fn sync(&mut self, e: u32) {
        let live = self.si_pos[e as usize] != ABSENT;
        match (self.is_si(e), live) {
            (true, false) => {
                self.si_pos[e as usize] = self.si.len() as u32;
                self.si.push(e);
            }
            (false, true) => {
                let at = self.si_pos[e as usize] as usize;
                self.si.swap_remove(at);
                if let Some(&moved) = self.si.get(at) {
                    self.si_pos[moved as usize] = at as u32;
                }
                self.si_pos[e as usize] = ABSENT;
            }
            _ => {}
        }
    }

    fn infect(&mut self, v: u32) {
        self.infected[v as usize] = true;
        for i in 0..self.incident[v as usize].len() {
            let (e, _) = self.incident[v as usize][i];
            self.sync(e);
        }
    }
}

/// Simulates evoSI on `graph`; times are in the process's own clock.
///
/// The event stream picks edges and outcomes, the clock stream draws holding
/// times and the degree stream picks the initial vertex.
pub fn run_evosi(graph: &MultiGraph, params: &EpidemicParams, seed: u64) -> Result<TrialRecord> {
    params.validate()?;
    if graph.n() != params.n {
        return Err(Error::InvalidParameter(format!("graph has {} vertices, params say {}", graph.n(), params.n)));
    }
    let mut events = rng::stream(seed, rng::JUMPS);
    let mut clock_rng = rng::stream(seed, rng::CLOCK);
    let start = match params.initial {
        InitialRule::Uniform => rng::stream(seed, rng::DEGREES).random_range(0..graph.n()),
        InitialRule::Vertex(v) => v,
    } as u32;

    let mut g = Dynamic::new(graph);
    g.infect(start);
    let mut infected = 1u64;
    let mut t = 0.0;
    let mut steps = 0u64;
    let mut checkpoints: Vec<Checkpoint> = Vec::new();
    let mut pending = params.checkpoints.iter().copied().peekable();
    let pair = params.pair_probability();
    let threshold = params.outbreak_size();
    let mut stopped_early = false;
    let record = |t: f64, steps: u64, infected: u64, g: &Dynamic| {
        let state = EpidemicState {
            n: params.n,
            x_total: 0,
            x_infected: g.si.len() as u64,
            s_k: Vec::new(),
            infected,
            susceptible: params.n as u64 - infected,
            t,
            jumps: steps,
        };
        snapshot(&state, t)
    };

    while !g.si.is_empty() {
        if params.should_stop(infected, pending.peek().is_none()) {
            stopped_early = true;
            break;
        }
        let rate = (params.lambda + params.rho) * g.si.len() as f64;
        let until = t + Exp::new(rate).expect("positive rate").sample(&mut clock_rng);
        while let Some(&c) = pending.peek() {
            if c >= until {
                break;
            }
            checkpoints.push(record(c, steps, infected, &g));
            pending.next();
        }
        t = until;
        let e = g.si[events.random_range(0..g.si.len())];
        let side = if g.infected[g.ends[e as usize][0] as usize] { 1u8 } else { 0u8 };
        if events.random::<f64>() < pair {
            let v = g.ends[e as usize][side as usize];
            g.infect(v);
            infected += 1;
        } else {
            // The susceptible end keeps the edge; the infected end moves.
            let w = events.random_range(0..params.n) as u32;
            g.detach(e, 1 - side);
            g.attach(e, 1 - side, w);
            g.sync(e);
        }
        steps += 1;
    }
    for c in pending {
        checkpoints.push(record(c, steps, infected, &g));
    }
    Ok(TrialRecord {
        seed,
        n: params.n,
        lambda: params.lambda,
        rho: params.rho,
        final_size: infected,
        gamma: (!stopped_early).then_some(t),
        jumps: steps,
        outbreak: infected as f64 > threshold,
        stopped_early,
        checkpoints,
    })
}

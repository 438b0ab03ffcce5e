//! The one-step law of the time-changed avoSI jump chain.
//!
//! With probability `lambda/(lambda+rho)` the acting infected half-edge pairs
//! with one of the other `X_t - 1` unpaired half-edges, chosen uniformly;
//! otherwise it rewires to one of the `n` vertices, chosen uniformly. Both
//! choices are made with integer weights so the law is exact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EpidemicParams, EpidemicState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JumpKind {
    /// Pair with a susceptible half-edge whose vertex holds `k` of them.
    Infect(usize),
    /// Pair with another infected half-edge.
    PairInfected,
    /// Move onto a susceptible vertex currently holding `k` half-edges.
    RewireToSusceptible(usize),
    /// Move onto an infected vertex.
    RewireToInfected,
}

impl JumpKind {
    /// Change of `X_I`.
    pub fn infected_change(self) -> i64 {
        match self {
            JumpKind::Infect(k) => k as i64 - 2,
            JumpKind::PairInfected => -2,
            JumpKind::RewireToSusceptible(_) => -1,
            JumpKind::RewireToInfected => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpDistribution {
    /// Pairing outcomes with integer weights summing to `X_t - 1`.
    pub pairing: Vec<(JumpKind, u64)>,
    /// Rewiring outcomes with integer weights summing to `n`.
    pub rewiring: Vec<(JumpKind, u64)>,
    pub pair_probability: f64,
    pub pair_total: u64,
    pub rewire_total: u64,
}

impl JumpDistribution {
    /// Outcomes with their probabilities.
    pub fn probabilities(&self) -> Vec<(JumpKind, f64)> {
        let p = self.pair_probability;
        let pair = self
            .pairing
            .iter()
            .map(|&(k, w)| (k, p * w as f64 / self.pair_total as f64));
        let rewire = self
            .rewiring
            .iter()
            .map(|&(k, w)| (k, (1.0 - p) * w as f64 / self.rewire_total as f64));
        pair.chain(rewire).filter(|&(_, q)| q > 0.0).collect()
    }

    pub fn probability(&self, kind: JumpKind) -> f64 {
        self.probabilities().into_iter().filter(|&(k, _)| k == kind).map(|(_, q)| q).sum()
    }

    /// Probability of any rewiring onto a susceptible vertex.
    pub fn rewire_to_susceptible(&self) -> f64 {
        self.probabilities()
            .into_iter()
            .filter(|(k, _)| matches!(k, JumpKind::RewireToSusceptible(_)))
            .map(|(_, q)| q)
            .sum()
    }

    /// Probability that `X_I` changes by `delta`.
    pub fn increment_probability(&self, delta: i64) -> f64 {
        self.probabilities()
            .into_iter()
            .filter(|(k, _)| k.infected_change() == delta)
            .map(|(_, q)| q)
            .sum()
    }
}

/// Exact law of the next jump from `state`.
pub fn avosi_jump_distribution(state: &EpidemicState, params: &EpidemicParams) -> Result<JumpDistribution> {
    if state.x_total < 2 {
        return Err(Error::DegenerateState("X_t - 1 = 0 leaves no pairing partner".into()));
    }
    if state.x_infected == 0 {
        return Err(Error::DegenerateState("no infected half-edge".into()));
    }
    let mut pairing = vec![(JumpKind::PairInfected, state.x_infected - 1)];
    let mut rewiring = vec![(JumpKind::RewireToInfected, state.infected)];
    for (k, &s) in state.s_k.iter().enumerate() {
        if s > 0 {
            if k > 0 {
                pairing.push((JumpKind::Infect(k), k as u64 * s));
            }
            rewiring.push((JumpKind::RewireToSusceptible(k), s));
        }
    }
    Ok(JumpDistribution {
        pairing,
        rewiring,
        pair_probability: params.pair_probability(),
        pair_total: state.x_total - 1,
        rewire_total: state.n as u64,
    })
}

/// Draws the next jump without building the distribution.
///
/// Consumes exactly one float and one integer from `rng`.
pub(crate) fn sample_jump<R: Rng + ?Sized>(state: &EpidemicState, pair_probability: f64, rng: &mut R) -> JumpKind {
    let u: f64 = rng.random();
    if u < pair_probability {
        let mut r = rng.random_range(0..state.x_total - 1);
        if r < state.x_infected - 1 {
            return JumpKind::PairInfected;
        }
        r -= state.x_infected - 1;
        for (k, &s) in state.s_k.iter().enumerate().skip(1) {
            let w = k as u64 * s;
            if r < w {
                return JumpKind::Infect(k);
            }
            r -= w;
        }
        unreachable!("pairing weights sum to X_t - 1")
    } else {
        let mut r = rng.random_range(0..state.n as u64);
        if r < state.infected {
            return JumpKind::RewireToInfected;
        }
        r -= state.infected;
        for (k, &s) in state.s_k.iter().enumerate() {
            if r < s {
                return JumpKind::RewireToSusceptible(k);
            }
            r -= s;
        }
        unreachable!("rewiring weights sum to n")
    }
}

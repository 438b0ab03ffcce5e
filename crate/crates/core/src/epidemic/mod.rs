//! Event-driven simulators for evoSI, avoSI and AB-avoSI.
//!
//! avoSI and AB-avoSI explore the configuration model on the fly and are run
//! as embedded jump chains of the time-changed process, in which the total
//! jump rate is `(1 + rho/lambda)(X_t - 1)`. Holding times are only drawn when
//! checkpoints are requested, on a stream of their own, so the jump sequence
//! and the final size never depend on whether the clock is running.

mod ab;
mod avosi;
mod evosi;
mod jump;

pub use ab::{infection_allowed, run_ab_avosi, run_ab_avosi_counts, run_ab_avosi_observed, AbIndices};
pub use avosi::{run_avosi, run_avosi_counts, run_avosi_observed};
pub use evosi::run_evosi;
pub use jump::{avosi_jump_distribution, JumpDistribution, JumpKind};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::degree::DegreeCounts;
use crate::error::{Error, Result};

/// Which vertex is infected at time zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialRule {
    /// A uniformly chosen vertex.
    #[default]
    Uniform,
    /// A fixed vertex index.
    Vertex(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub lambda: f64,
    pub rho: f64,
    pub n: usize,
    pub initial: InitialRule,
    /// Increasing clock times at which snapshots are taken.
    pub checkpoints: Vec<f64>,
    /// Outbreak threshold on the infected fraction.
    pub epsilon: f64,
    /// Stop as soon as the outbreak threshold is crossed and every checkpoint
    /// has been recorded. `final_size` is then a lower bound.
    pub stop_at_outbreak: bool,
    /// Stop once every checkpoint has been recorded. `final_size` and
    /// `outbreak` then describe the state at that moment.
    pub stop_after_checkpoints: bool,
}

impl EpidemicParams {
    pub fn new(lambda: f64, rho: f64, n: usize) -> Self {
        Self {
            lambda,
            rho,
            n,
            initial: InitialRule::Uniform,
            checkpoints: Vec::new(),
            epsilon: 0.05,
            stop_at_outbreak: false,
            stop_after_checkpoints: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {} must be positive", self.lambda)));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::InvalidParameter(format!("rho = {} must be non-negative", self.rho)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] > w[1]) || self.checkpoints.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidParameter("checkpoints must be non-negative and sorted".into()));
        }
        Ok(())
    }

    /// Pairing probability `lambda / (lambda + rho)`.
    pub fn pair_probability(&self) -> f64 {
        self.lambda / (self.lambda + self.rho)
    }

    fn outbreak_size(&self) -> f64 {
        self.epsilon * self.n as f64
    }

    /// Whether a trial may end early given its infected count.
    pub(crate) fn should_stop(&self, infected: u64, checkpoints_done: bool) -> bool {
        checkpoints_done
            && ((self.stop_at_outbreak && infected as f64 > self.outbreak_size())
                || (self.stop_after_checkpoints && !self.checkpoints.is_empty()))
    }
}

/// Counters of the on-the-fly exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicState {
    pub n: usize,
    /// Unpaired half-edges.
    pub x_total: u64,
    /// Unpaired infected half-edges.
    pub x_infected: u64,
    /// `s_k[k]` susceptible vertices currently hold `k` unpaired half-edges.
    pub s_k: Vec<u64>,
    pub infected: u64,
    pub susceptible: u64,
    /// Time-changed clock.
    pub t: f64,
    pub jumps: u64,
}

impl EpidemicState {
    /// State right after infecting one vertex of degree `seed_degree`.
    pub fn initial(counts: &DegreeCounts, seed_degree: usize) -> Self {
        let mut s_k = counts.counts.clone();
        assert!(s_k.get(seed_degree).copied().unwrap_or(0) > 0, "seed degree absent from counts");
        s_k[seed_degree] -= 1;
        s_k.resize(s_k.len() + 5, 0);
        Self {
            n: counts.n,
            x_total: counts.total_degree(),
            x_infected: seed_degree as u64,
            s_k,
            infected: 1,
            susceptible: counts.n as u64 - 1,
            t: 0.0,
            jumps: 0,
        }
    }

    /// `X_t == X_I + sum_k k S_k` and `I + S == n`.
    pub fn ledger_holds(&self) -> bool {
        let sus: u64 = self.s_k.iter().enumerate().map(|(k, &s)| k as u64 * s).sum();
        let vertices: u64 = self.s_k.iter().sum();
        self.x_total == self.x_infected + sus
            && vertices == self.susceptible
            && self.infected + self.susceptible == self.n as u64
    }

    pub fn absorbed(&self) -> bool {
        self.x_infected == 0 || self.x_total <= 1
    }

    /// Total jump rate of the time-changed process.
    pub fn total_rate(&self, params: &EpidemicParams) -> f64 {
        (1.0 + params.rho / params.lambda) * (self.x_total.saturating_sub(1)) as f64
    }

    fn ensure_bucket(&mut self, k: usize) {
        if k >= self.s_k.len() {
            self.s_k.resize(k + 5, 0);
        }
    }

    /// Applies one avoSI jump to the counters.
    pub fn apply(&mut self, kind: JumpKind) {
        match kind {
            JumpKind::Infect(k) => {
                self.s_k[k] -= 1;
                self.susceptible -= 1;
                self.infected += 1;
                self.x_infected = self.x_infected + k as u64 - 2;
                self.x_total -= 2;
            }
            JumpKind::PairInfected => {
                self.x_infected -= 2;
                self.x_total -= 2;
            }
            JumpKind::RewireToSusceptible(k) => {
                self.ensure_bucket(k + 1);
                self.s_k[k] -= 1;
                self.s_k[k + 1] += 1;
                self.x_infected -= 1;
            }
            JumpKind::RewireToInfected => {}
        }
        self.jumps += 1;
    }
}

/// The drift of `X_I` in the time-changed process:
/// `-2(X_t - 1) + sum k^2 S_k - (rho/lambda)(S_t/n)(X_t - 1)`.
pub fn drift(state: &EpidemicState, params: &EpidemicParams) -> f64 {
    let xm1 = state.x_total as f64 - 1.0;
    let second: f64 = state.s_k.iter().enumerate().map(|(k, &s)| (k * k) as f64 * s as f64).sum();
    -2.0 * xm1 + second - params.rho / params.lambda * (state.susceptible as f64 / state.n as f64) * xm1
}

/// Counters recorded at a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub jumps: u64,
    /// Unpaired half-edges; always 0 for evoSI, which keeps no pool.
    pub x_total: u64,
    /// Unpaired infected half-edges, or susceptible-infected edges for evoSI.
    pub x_infected: u64,
    pub infected: u64,
}

pub fn snapshot(state: &EpidemicState, t: f64) -> Checkpoint {
    Checkpoint {
        t,
        jumps: state.jumps,
        x_total: state.x_total,
        x_infected: state.x_infected,
        infected: state.infected,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub n: usize,
    pub lambda: f64,
    pub rho: f64,
    /// Ever-infected vertices.
    pub final_size: u64,
    /// Absorption time; absent when the clock was not run or the trial was
    /// stopped early.
    pub gamma: Option<f64>,
    pub jumps: u64,
    pub outbreak: bool,
    pub stopped_early: bool,
    pub checkpoints: Vec<Checkpoint>,
}

/// Holding-time clock and checkpoint recorder shared by the jump-chain
/// simulators.
pub(crate) struct Clock<R> {
    rng: Option<R>,
    pending: std::vec::IntoIter<f64>,
    next: Option<f64>,
    pub records: Vec<Checkpoint>,
}

impl<R: Rng> Clock<R> {
    pub fn new(checkpoints: &[f64], rng: R) -> Self {
        let mut pending = checkpoints.to_vec().into_iter();
        let next = pending.next();
        Self {
            rng: next.is_some().then_some(rng),
            pending,
            next,
            records: Vec::new(),
        }
    }

    pub fn running(&self) -> bool {
        self.rng.is_some()
    }

    pub fn done(&self) -> bool {
        self.next.is_none()
    }

    /// Advances the clock by one holding time of the given rate, recording
    /// every checkpoint passed before the next jump.
    pub fn advance(&mut self, state: &mut EpidemicState, rate: f64) {
        let Some(rng) = self.rng.as_mut() else { return };
        let hold = if rate > 0.0 { Exp::new(rate).expect("positive rate").sample(rng) } else { f64::INFINITY };
        let until = state.t + hold;
        while let Some(c) = self.next {
            if c >= until {
                break;
            }
            self.records.push(snapshot(state, c));
            self.next = self.pending.next();
        }
        state.t = until;
    }

    /// Records remaining checkpoints against the absorbed state.
    pub fn finish(&mut self, state: &EpidemicState) {
        while let Some(c) = self.next {
            self.records.push(snapshot(state, c));
            self.next = self.pending.next();
        }
    }
}

/// Index of a uniformly chosen vertex, returned as its degree, given counts
/// in which vertex 1 has degree `counts.first`.
pub(crate) fn uniform_vertex_degree<R: Rng + ?Sized>(counts: &DegreeCounts, rng: &mut R) -> usize {
    let i = rng.random_range(0..counts.n as u64);
    if i == 0 {
        return counts.first;
    }
    let mut r = i - 1;
    for (k, &c) in counts.counts.iter().enumerate() {
        let c = if k == counts.first { c - 1 } else { c };
        if r < c {
            return k;
        }
        r -= c;
    }
    unreachable!("vertex index within n")
}

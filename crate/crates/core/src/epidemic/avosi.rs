//! avoSI as a counter-level jump chain.

use super::jump::sample_jump;
use super::{uniform_vertex_degree, Clock, EpidemicParams, EpidemicState, InitialRule, TrialRecord};
use crate::degree::{DegreeCounts, DegreeSequence};
use crate::error::Result;
use crate::rng;

/// Simulates avoSI on the configuration model of `seq`.
///
/// All randomness is derived from `seed`: the jump stream selects jumps, the
/// clock stream draws holding times (only when checkpoints are requested) and
/// the degree stream picks the initial vertex.
pub fn run_avosi(seq: &DegreeSequence, params: &EpidemicParams, seed: u64) -> Result<TrialRecord> {
    params.validate()?;
    let counts = DegreeCounts::from_sequence(seq);
    let seed_degree = match params.initial {
        InitialRule::Uniform => uniform_vertex_degree(&counts, &mut rng::stream(seed, rng::DEGREES)),
        InitialRule::Vertex(v) => seq.degrees()[v] as usize,
    };
    Ok(simulate(EpidemicState::initial(&counts, seed_degree), params, seed, |_| {}))
}

/// Simulates avoSI from degree counts, with the initial vertex drawn
/// uniformly from the degree stream. Used with per-trial resampled degrees.
pub fn run_avosi_counts(counts: &DegreeCounts, params: &EpidemicParams, seed: u64) -> Result<TrialRecord> {
    params.validate()?;
    let seed_degree = uniform_vertex_degree(counts, &mut rng::stream(seed, rng::DEGREES));
    Ok(simulate(EpidemicState::initial(counts, seed_degree), params, seed, |_| {}))
}

/// Core loop; `observe` sees the state after every jump.
pub(crate) fn simulate<F: FnMut(&EpidemicState)>(
    mut state: EpidemicState,
    params: &EpidemicParams,
    seed: u64,
    mut observe: F,
) -> TrialRecord {
    let mut jumps = rng::stream(seed, rng::JUMPS);
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
        state.apply(kind);
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

/// Runs avoSI and passes every post-jump state to `observe`.
pub fn run_avosi_observed<F: FnMut(&EpidemicState)>(
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
    Ok(simulate(EpidemicState::initial(&counts, seed_degree), params, seed, observe))
}

//! Upper and lower comparison random walks for the number of infected
//! half-edges during the first `q n^{-1/3}` units of time-changed clock.
//!
//! The upper walk `Y` never steps below `-1` and the lower walk `Z` has a
//! small `-2` atom. Both are built from the empirical degree pmf, the box
//! constant `c_box` and the tail certificate `(c_exp, eta)`.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree::{DegreeModel, ModelConstants, DEFAULT_ETA};
use crate::epidemic::{EpidemicParams, EpidemicState, JumpDistribution};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{wilson_interval, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkKind {
    Upper,
    Lower,
}

/// How many steps a walk runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// `N_q - n^0.6` steps for the upper walk and `N_q + n^0.6` for the lower.
    #[default]
    JumpWindow,
    /// `N_q` steps for both.
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Box constant in `q_{k,n} = c_box q n^{2/3} exp(-eta k / 2)`.
    pub c_box: f64,
    pub eta: f64,
    /// Exponential-moment constant entering `v_n = 4 + log(n c_exp) / eta`.
    pub c_exp: f64,
    pub horizon: Horizon,
}

impl WalkConfig {
    pub fn for_model(model: &DegreeModel) -> Self {
        Self {
            c_box: 4.0,
            eta: DEFAULT_ETA,
            c_exp: model.tail_constant(DEFAULT_ETA),
            horizon: Horizon::JumpWindow,
        }
    }
}

/// Expected number of jumps by time `q n^{-1/3}`: `(1 + rho/lambda) m1 q n^{2/3}`.
pub fn jump_budget(m1: f64, rate_ratio: f64, q: f64, n: f64) -> f64 {
    (1.0 + rate_ratio) * m1 * q * n.powf(2.0 / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSpec {
    pub kind: WalkKind,
    /// `(increment, probability)` in increasing increment order.
    pub increments: Vec<(i64, f64)>,
    pub n: usize,
    pub q: f64,
    /// `N_q`.
    pub jump_budget: f64,
    pub steps: u64,
    /// `start_law[k]` is the probability that the initial vertex has degree `k`.
    pub start_law: Vec<f64>,
    pub sigma: f64,
}

impl WalkSpec {
    /// A spec with explicit increments and start law, for testing and audits.
    pub fn custom(increments: Vec<(i64, f64)>, start_law: Vec<f64>, steps: u64) -> Self {
        Self {
            kind: WalkKind::Upper,
            increments,
            n: 1,
            q: 0.0,
            jump_budget: steps as f64,
            steps,
            start_law,
            sigma: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.increments.iter().map(|&(x, p)| x as f64 * p).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.increments.iter().map(|&(_, p)| p).sum()
    }

    pub fn probability(&self, x: i64) -> f64 {
        self.increments.iter().filter(|&&(y, _)| y == x).map(|&(_, p)| p).sum()
    }

    /// `P(increment <= a)`.
    pub fn cdf(&self, a: i64) -> f64 {
        self.increments.iter().filter(|&&(x, _)| x <= a).map(|&(_, p)| p).sum()
    }

    pub fn min_increment(&self) -> i64 {
        self.increments.iter().filter(|&&(_, p)| p > 0.0).map(|&(x, _)| x).min().unwrap_or(0)
    }

    /// Two-column text dump of the pmf.
    pub fn dump(&self) -> String {
        self.increments.iter().map(|(x, p)| format!("{x}\t{p:.17e}\n")).collect()
    }
}

struct Inputs<'a> {
    constants: &'a ModelConstants,
    empirical: &'a [f64],
    n: f64,
    q: f64,
    cfg: &'a WalkConfig,
}

impl Inputs<'_> {
    fn nq(&self) -> f64 {
        jump_budget(self.constants.m1, self.constants.rate_ratio(), self.q, self.n)
    }

    fn q_k(&self, k: usize) -> f64 {
        self.cfg.c_box * self.q * self.n.powf(2.0 / 3.0) * (-self.cfg.eta * k as f64 / 2.0).exp()
    }

    fn p(&self, k: usize) -> f64 {
        self.empirical.get(k).copied().unwrap_or(0.0)
    }

    fn log_cutoff(&self) -> f64 {
        (self.n * self.cfg.c_exp).ln() / self.cfg.eta
    }

    fn steps(&self, kind: WalkKind) -> Result<u64> {
        let nq = self.nq();
        let slack = self.n.powf(0.6);
        let steps = match (self.cfg.horizon, kind) {
            (Horizon::Nominal, _) => nq,
            (Horizon::JumpWindow, WalkKind::Upper) => nq - slack,
            (Horizon::JumpWindow, WalkKind::Lower) => nq + slack,
        };
        if steps < 1.0 {
            return Err(Error::InvalidRegime(format!(
                "horizon {steps:.1} < 1 (N_q = {nq:.1}, n^0.6 = {slack:.1})"
            )));
        }
        Ok(steps.floor() as u64)
    }
}

fn finish(mut masses: Vec<(i64, f64)>, kind: WalkKind, inputs: &Inputs, nq: f64) -> Result<WalkSpec> {
    let used: f64 = masses.iter().map(|&(_, p)| p).sum();
    let rest = 1.0 - used;
    masses.push((-1, rest));
    if let Some(&(x, p)) = masses.iter().find(|&&(_, p)| !(0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidRegime(format!("mass {p} at increment {x}")));
    }
    masses.sort_by_key(|&(x, _)| x);
    let mut merged: Vec<(i64, f64)> = Vec::with_capacity(masses.len());
    for (x, p) in masses {
        match merged.last_mut() {
            Some(last) if last.0 == x => last.1 += p,
            _ => merged.push((x, p)),
        }
    }
    Ok(WalkSpec {
        kind,
        increments: merged,
        n: inputs.n as usize,
        q: inputs.q,
        jump_budget: nq,
        steps: inputs.steps(kind)?,
        start_law: inputs.empirical.to_vec(),
        sigma: inputs.constants.sigma_sq.sqrt(),
    })
}

/// Increment law of the upper walk `Y`.
///
/// `empirical[k]` is the empirical degree pmf `p_{k,n}`. The rate ratio
/// `rho/lambda` is taken at criticality.
pub fn y_increment_pmf(
    constants: &ModelConstants,
    empirical: &[f64],
    n: usize,
    q: f64,
    cfg: &WalkConfig,
) -> Result<WalkSpec> {
    let inputs = Inputs { constants, empirical, n: n as f64, q, cfg };
    let nf = n as f64;
    let nq = inputs.nq();
    let r = constants.rate_ratio();
    let denom = (1.0 + r) * (constants.m1 * nf - 3.0 * nq);
    if denom <= 0.0 {
        return Err(Error::InvalidRegime(format!("m1 n - 3 N_q = {denom} <= 0")));
    }
    let v_n = (4.0 + inputs.log_cutoff()).floor() as usize;
    let mut masses = Vec::new();
    for k in 3..=v_n {
        masses.push((k as i64 - 2, (k as f64 * nf * inputs.p(k) + inputs.q_k(k)) / denom));
    }
    let zero = (2.0 * nf * inputs.p(2) + inputs.q_k(2)) / denom + 2.0 * nq / ((1.0 + 1.0 / r) * nf);
    masses.push((0, zero));
    finish(masses, WalkKind::Upper, &inputs, nq)
}

/// Increment law of the lower walk `Z`.
pub fn z_increment_pmf(
    constants: &ModelConstants,
    empirical: &[f64],
    n: usize,
    q: f64,
    cfg: &WalkConfig,
) -> Result<WalkSpec> {
    let inputs = Inputs { constants, empirical, n: n as f64, q, cfg };
    let nf = n as f64;
    let nq = inputs.nq();
    let r = constants.rate_ratio();
    let low = (1.0 + r) * (constants.m1 * nf - 3.0 * nq);
    let high = (1.0 + r) * (constants.m1 * nf + 3.0 * nq);
    if low <= 0.0 {
        return Err(Error::InvalidRegime(format!("m1 n - 3 N_q = {low} <= 0")));
    }
    let top = inputs.log_cutoff().floor() as usize;
    let mut masses = Vec::new();
    for k in 2..=top {
        let base = k as f64 * nf * inputs.p(k);
        masses.push((k as i64 - 2, (base - base.min(2.0 * inputs.q_k(k))) / high));
    }
    masses.push((-2, cfg.c_box * nq / low));
    finish(masses, WalkKind::Lower, &inputs, nq)
}

/// `E[increment^2]`.
pub fn walk_second_moment(spec: &WalkSpec) -> f64 {
    spec.increments.iter().map(|&(x, p)| (x * x) as f64 * p).sum()
}

/// `E[exp(-t X)] - 1`, computed without cancellation.
pub fn tilt_residual(spec: &WalkSpec, t: f64) -> f64 {
    spec.increments.iter().map(|&(x, p)| p * (-t * x as f64).exp_m1()).sum()
}

/// Positive root `theta` of `E[exp(-theta n^{-1/3} X)] = 1` for a walk with
/// positive mean, or of `E[exp(theta n^{-1/3} X)] = 1` for negative mean.
pub fn solve_tilt(spec: &WalkSpec) -> Result<f64> {
    let mean = spec.mean();
    if mean == 0.0 || !mean.is_finite() {
        return Err(Error::NoRoot);
    }
    let sign = mean.signum();
    let (lo_x, hi_x) = spec
        .increments
        .iter()
        .filter(|&&(_, p)| p > 0.0)
        .fold((i64::MAX, i64::MIN), |(a, b), &(x, _)| (a.min(x), b.max(x)));
    // The mirrored equation needs support on the far side of the mean.
    if (sign > 0.0 && lo_x >= 0) || (sign < 0.0 && hi_x <= 0) {
        return Err(Error::NoRoot);
    }
    let h = |t: f64| tilt_residual(spec, sign * t);
    let dh = |t: f64| -> f64 {
        spec.increments
            .iter()
            .map(|&(x, p)| -sign * x as f64 * p * (-sign * t * x as f64).exp())
            .sum()
    };
    // h(0) = 0, h'(0) < 0, h convex: bracket the second zero.
    let variance = walk_second_moment(spec) - mean * mean;
    let mut hi = (2.0 * mean.abs() / variance.max(1e-300)).max(1e-12);
    let mut guard = 0;
    while h(hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NoRoot);
        }
    }
    let mut lo = hi / 2.0;
    while h(lo) > 0.0 {
        lo /= 2.0;
        guard += 1;
        if guard > 400 {
            return Err(Error::NoRoot);
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let value = h(t);
        if value > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let step = value / dh(t);
        let mut next = t - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-14 * t || hi - lo <= 1e-15 * hi {
            t = next;
            break;
        }
        t = next;
    }
    Ok(t * (spec.n as f64).cbrt())
}

/// Result of one walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkOutcome {
    pub survived: bool,
    /// `Y_N / (sigma sqrt(N))` with `N` the number of steps.
    pub endpoint: f64,
    pub min_level: i64,
}

/// Pre-built sampler for a spec.
pub struct WalkSampler<'a> {
    spec: &'a WalkSpec,
    steps: WeightedAliasIndex<f64>,
    values: Vec<i64>,
    start: Option<WeightedAliasIndex<f64>>,
}

impl<'a> WalkSampler<'a> {
    pub fn new(spec: &'a WalkSpec) -> Result<Self> {
        let live: Vec<&(i64, f64)> = spec.increments.iter().filter(|&&(_, p)| p > 0.0).collect();
        let steps = WeightedAliasIndex::new(live.iter().map(|&&(_, p)| p).collect())
            .map_err(|e| Error::InvalidParameter(format!("increment law: {e}")))?;
        let start = if spec.start_law.iter().any(|&p| p > 0.0) {
            Some(
                WeightedAliasIndex::new(spec.start_law.clone())
                    .map_err(|e| Error::InvalidParameter(format!("start law: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { spec, steps, values: live.iter().map(|&&(x, _)| x).collect(), start })
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> WalkOutcome {
        let y0 = self.start.as_ref().map_or(0, |s| s.sample(rng) as i64);
        self.run_from(y0, rng)
    }

    /// Runs from a given start level; the walk must stay strictly positive.
    pub fn run_from<R: Rng + ?Sized>(&self, y0: i64, rng: &mut R) -> WalkOutcome {
        let norm = self.spec.sigma * (self.spec.steps as f64).sqrt();
        let mut y = y0;
        let mut min_level = y;
        if y <= 0 {
            return WalkOutcome { survived: false, endpoint: y as f64 / norm, min_level };
        }
        for _ in 0..self.spec.steps {
            y += self.values[self.steps.sample(rng)];
            min_level = min_level.min(y);
            if y <= 0 {
                return WalkOutcome { survived: false, endpoint: y as f64 / norm, min_level };
            }
        }
        WalkOutcome { survived: true, endpoint: y as f64 / norm, min_level }
    }
}

/// One walk from the spec's start law.
pub fn simulate_walk<R: Rng + ?Sized>(spec: &WalkSpec, rng: &mut R) -> Result<WalkOutcome> {
    Ok(WalkSampler::new(spec)?.run(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub p_hat: f64,
    pub ci: Interval,
    /// `n^{1/3} p_hat`.
    pub n13_scaled: f64,
    pub trials: u64,
    pub survivors: u64,
    /// Normalized endpoints of surviving walks, in trial order.
    pub conditioned_endpoints: Vec<f64>,
}

/// Survival frequency over `trials` independent walks seeded from `master`.
pub fn estimate_survival(spec: &WalkSpec, trials: u64, master: u64) -> Result<SurvivalEstimate> {
    let sampler = WalkSampler::new(spec)?;
    let outcomes: Vec<WalkOutcome> = (0..trials)
        .into_par_iter()
        .map(|i| sampler.run(&mut rng::stream(rng::trial_seed(master, i), rng::JUMPS)))
        .collect();
    let endpoints: Vec<f64> = outcomes.iter().filter(|o| o.survived).map(|o| o.endpoint).collect();
    let survivors = endpoints.len() as u64;
    let p_hat = survivors as f64 / trials as f64;
    Ok(SurvivalEstimate {
        p_hat,
        ci: wilson_interval(survivors, trials),
        n13_scaled: (spec.n as f64).cbrt() * p_hat,
        trials,
        survivors,
        conditioned_endpoints: endpoints,
    })
}

/// Normalized endpoints of the walks that survive, out of `trials` runs.
pub fn conditioned_endpoint_sample(spec: &WalkSpec, trials: u64, master: u64) -> Result<Vec<f64>> {
    let est = estimate_survival(spec, trials, master)?;
    if est.conditioned_endpoints.len() < 100 {
        return Err(Error::InsufficientSurvivors { got: est.conditioned_endpoints.len(), need: 100 });
    }
    Ok(est.conditioned_endpoints)
}

/// State sampled inside the parameter box on which the walks bracket the
/// exploration, together with the exact one-step law there.
#[derive(Debug, Clone)]
pub struct BoxState {
    pub state: EpidemicState,
    pub law: JumpDistribution,
}

/// Draws a random exploration state satisfying the box constraints:
/// `X_I <= c_box N_q`, `|X_t - 1 - m1 n| <= 3 N_q`, `I <= 2 N_q`,
/// `|S_k - n p_k| <= q_k / (k+1)` for `k <= v_n` and `S_k = 0` beyond.
pub fn sample_box_state<R: Rng + ?Sized>(
    constants: &ModelConstants,
    empirical: &[f64],
    n: usize,
    q: f64,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<BoxState> {
    let inputs = Inputs { constants, empirical, n: n as f64, q, cfg };
    let nf = n as f64;
    let nq = inputs.nq();
    let v_n = (4.0 + inputs.log_cutoff()).floor() as usize;
    let params = EpidemicParams::new(constants.lambda_c, constants.rho, n);
    'attempt: for _ in 0..100_000 {
        // Buckets are drawn inside their bands and I is whatever remains.
        // Pulling every bucket towards the bottom of its band by a common
        // random factor keeps the remainder positive often enough even when
        // some bands are one-sided.
        let pull = rng.random::<f64>().powi(3);
        let mut s_k = vec![0u64; v_n + 1];
        for (k, slot) in s_k.iter_mut().enumerate() {
            let width = inputs.q_k(k) / (k + 1) as f64;
            let lo = (nf * inputs.p(k) - width).ceil().max(0.0);
            let hi = (nf * inputs.p(k) + width).floor();
            if hi < lo {
                continue 'attempt;
            }
            *slot = lo as u64 + (pull * rng.random::<f64>() * (hi - lo)).round() as u64;
        }
        let Some(infected) = (n as u64).checked_sub(s_k.iter().sum()) else { continue };
        if infected == 0 || infected as f64 > 2.0 * nq {
            continue;
        }
        let x_infected = rng.random_range(1..=(cfg.c_box * nq).floor().max(1.0) as u64);
        let sus: u64 = s_k.iter().enumerate().map(|(k, &s)| k as u64 * s).sum();
        let x_total = x_infected + sus;
        if (x_total as f64 - 1.0 - constants.m1 * nf).abs() > 3.0 * nq {
            continue;
        }
        let state = EpidemicState {
            n,
            x_total,
            x_infected,
            s_k,
            infected,
            susceptible: n as u64 - infected,
            t: 0.0,
            jumps: 0,
        };
        let law = crate::epidemic::avosi_jump_distribution(&state, &params)?;
        return Ok(BoxState { state, law });
    }
    Err(Error::InvalidRegime("box constraints could not be met".into()))
}

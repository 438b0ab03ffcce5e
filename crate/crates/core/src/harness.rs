//! Batches of epidemic trials: outbreak-probability estimates over a grid of
//! sizes, the scaling-exponent fit, the three conditional stage reports and
//! the simulator comparison.
//!
//! Every trial `j` at grid position `i` gets the seed
//! `trial_seed(trial_seed(master, i), j)`. Trials run on the rayon pool and
//! are folded in index order, so outputs do not depend on the worker count.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree::{
    sample_iid_counts, sample_iid_degrees, DegreeCounts, DegreeModel, DegreeSequence, ModelConstants,
};
use crate::epidemic::{run_ab_avosi_counts, run_avosi_counts, run_evosi, EpidemicParams, TrialRecord};
use crate::error::{Error, Result};
use crate::graph::build_configuration_model;
use crate::limit::meander_cdf;
use crate::rng;
use crate::stats::{self, mann_whitney, weighted_line_fit, wilson_interval, Interval, RankTest};
use crate::walks::jump_budget;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum LambdaMode {
    #[default]
    Critical,
    Explicit(f64),
}

/// How degree sequences are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SequenceMode {
    /// Fresh iid degrees (parity fixed) for every trial.
    #[default]
    Resampled,
    /// One iid sequence per size, shared by all its trials.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Simulator {
    #[default]
    Avosi,
    AbAvosi,
    Evosi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub model: DegreeModel,
    pub rho: f64,
    pub lambda_mode: LambdaMode,
    pub n_grid: Vec<usize>,
    pub trials_per_n: u64,
    pub epsilon: f64,
    /// Early-phase time scale: checkpoint `q n^{-1/3}`.
    pub q: f64,
    /// Takeoff time scale: checkpoint `Q n^{-1/3}`.
    pub big_q: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub sequence_mode: SequenceMode,
    #[serde(default)]
    pub simulator: Simulator,
    /// Intermediate times for the diffusion report, in units of `n^{-1/3}`.
    #[serde(default)]
    pub s_grid: Vec<f64>,
    #[serde(skip)]
    pub progress: bool,
}

impl ExperimentPlan {
    pub fn new(model: DegreeModel, rho: f64, n_grid: Vec<usize>, trials_per_n: u64, master_seed: u64) -> Self {
        Self {
            model,
            rho,
            lambda_mode: LambdaMode::Critical,
            n_grid,
            trials_per_n,
            epsilon: 0.05,
            q: 0.1,
            big_q: 5.0,
            master_seed,
            sequence_mode: SequenceMode::Resampled,
            simulator: Simulator::Avosi,
            s_grid: Vec::new(),
            progress: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("n_grid must be non-empty and strictly increasing".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::InvalidParameter("sizes must be at least 2".into()));
        }
        if self.trials_per_n == 0 {
            return Err(Error::InvalidParameter("trials_per_n must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if !(self.q > 0.0 && self.big_q > 0.0) {
            return Err(Error::InvalidParameter("q and Q must be positive".into()));
        }
        Ok(())
    }

    /// Infection rate used by the plan.
    pub fn lambda(&self) -> Result<f64> {
        match self.lambda_mode {
            LambdaMode::Critical => crate::degree::critical_rate(&self.model, self.rho),
            LambdaMode::Explicit(l) if l > 0.0 => Ok(l),
            LambdaMode::Explicit(l) => Err(Error::InvalidParameter(format!("lambda = {l} must be positive"))),
        }
    }

    fn params(&self, n: usize) -> Result<EpidemicParams> {
        let mut p = EpidemicParams::new(self.lambda()?, self.rho, n);
        p.epsilon = self.epsilon;
        Ok(p)
    }

    fn note(&self, msg: impl FnOnce() -> String) {
        if self.progress {
            eprintln!("{}", msg());
        }
    }
}

/// A binomial proportion with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub successes: u64,
    /// `n^{1/3} value`.
    pub scaled: f64,
}

impl Estimate {
    pub fn from_counts(n: usize, successes: u64, trials: u64) -> Self {
        let ci = wilson_interval(successes, trials);
        let value = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        Self {
            n,
            value,
            ci_low: ci.low,
            ci_high: ci.high,
            trials,
            successes,
            scaled: (n as f64).cbrt() * value,
        }
    }

    pub fn ci(&self) -> Interval {
        Interval { low: self.ci_low, high: self.ci_high }
    }

    /// Interval for the scaled value.
    pub fn scaled_ci(&self) -> Interval {
        self.ci().scaled((self.n as f64).cbrt())
    }
}

/// Degree data for one size: either shared or drawn per trial.
enum Degrees {
    Fixed(DegreeSequence),
    Resampled,
}

impl Degrees {
    fn for_size(plan: &ExperimentPlan, n: usize, size_seed: u64) -> Self {
        match plan.sequence_mode {
            SequenceMode::Fixed => {
                Degrees::Fixed(sample_iid_degrees(&plan.model, n, &mut rng::stream(size_seed, rng::DEGREES)))
            }
            SequenceMode::Resampled => Degrees::Resampled,
        }
    }
}

/// One trial of the plan's simulator. Degree resampling and graph building
/// use the graph stream, so they never share draws with the simulator.
fn run_trial(
    plan: &ExperimentPlan,
    simulator: Simulator,
    degrees: &Degrees,
    params: &EpidemicParams,
    seed: u64,
) -> Result<TrialRecord> {
    let mut graph_rng = rng::stream(seed, rng::GRAPH);
    match simulator {
        Simulator::Avosi | Simulator::AbAvosi => {
            let counts = match degrees {
                Degrees::Fixed(seq) => DegreeCounts::from_sequence(seq),
                Degrees::Resampled => sample_iid_counts(&plan.model, params.n, &mut graph_rng),
            };
            if simulator == Simulator::Avosi {
                run_avosi_counts(&counts, params, seed)
            } else {
                run_ab_avosi_counts(&counts, params, seed)
            }
        }
        Simulator::Evosi => {
            let graph = match degrees {
                Degrees::Fixed(seq) => build_configuration_model(seq, &mut graph_rng)?,
                Degrees::Resampled => {
                    let seq = sample_iid_degrees(&plan.model, params.n, &mut graph_rng);
                    build_configuration_model(&seq, &mut graph_rng)?
                }
            };
            run_evosi(&graph, params, seed)
        }
    }
}

/// Runs `trials` trials at grid position `index` and returns their records in
/// trial order.
fn run_batch(
    plan: &ExperimentPlan,
    simulator: Simulator,
    index: u64,
    params: &EpidemicParams,
    trials: u64,
) -> Result<Vec<TrialRecord>> {
    let size_seed = rng::trial_seed(plan.master_seed, index);
    let degrees = Degrees::for_size(plan, params.n, size_seed);
    (0..trials)
        .into_par_iter()
        .map(|j| run_trial(plan, simulator, &degrees, params, rng::trial_seed(size_seed, j)))
        .collect()
}

/// Full trial records of the plan's simulator for every size, in grid then
/// trial order. Each record snapshots the state at `checkpoints`.
pub fn simulate_trials(plan: &ExperimentPlan, checkpoints: &[f64]) -> Result<Vec<TrialRecord>> {
    plan.validate()?;
    let mut out = Vec::new();
    for (i, &n) in plan.n_grid.iter().enumerate() {
        let mut params = plan.params(n)?;
        params.checkpoints = checkpoints.to_vec();
        out.extend(run_batch(plan, plan.simulator, i as u64, &params, plan.trials_per_n)?);
        plan.note(|| format!("n = {n}: {} trials done", plan.trials_per_n));
    }
    Ok(out)
}

/// Outbreak frequency `P(final size > epsilon n)` for every size of the plan.
pub fn estimate_outbreak_probability(plan: &ExperimentPlan) -> Result<Vec<Estimate>> {
    plan.validate()?;
    let mut out = Vec::with_capacity(plan.n_grid.len());
    for (i, &n) in plan.n_grid.iter().enumerate() {
        let mut params = plan.params(n)?;
        params.stop_at_outbreak = true;
        let records = run_batch(plan, plan.simulator, i as u64, &params, plan.trials_per_n)?;
        let hits = records.iter().filter(|r| r.outbreak).count() as u64;
        let est = Estimate::from_counts(n, hits, plan.trials_per_n);
        plan.note(|| format!("n = {n}: {hits}/{} outbreaks, scaled {:.4}", plan.trials_per_n, est.scaled));
        out.push(est);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub ci: Interval,
    pub intercept: f64,
    /// `exp(intercept)`, the fitted prefactor.
    pub prefactor: f64,
}

/// Events required at each grid point for the fit.
pub const MIN_EVENTS: u64 = 50;

/// Weighted least squares of `log p` on `log n`, weights from the delta
/// method `trials p / (1 - p)`.
pub fn fit_scaling_exponent(estimates: &[Estimate]) -> Result<ScalingFit> {
    let usable = estimates.iter().filter(|e| e.successes >= MIN_EVENTS && e.value > 0.0).count();
    if estimates.len() < 4 || usable < estimates.len() {
        return Err(Error::InsufficientEvents { got: usable, need: 4.max(estimates.len()), min_events: MIN_EVENTS });
    }
    let x: Vec<f64> = estimates.iter().map(|e| (e.n as f64).ln()).collect();
    let y: Vec<f64> = estimates.iter().map(|e| e.value.ln()).collect();
    let w: Vec<f64> = estimates
        .iter()
        .map(|e| {
            let odds = if e.value < 1.0 { e.value / (1.0 - e.value) } else { f64::MAX / 1e6 };
            e.trials as f64 * odds
        })
        .collect();
    let fit = weighted_line_fit(&x, &y, &w);
    Ok(ScalingFit { slope: fit.slope, ci: fit.slope_ci, intercept: fit.intercept, prefactor: fit.intercept.exp() })
}

/// Early-phase diagnostics at time `q n^{-1/3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Report {
    pub n: usize,
    pub q: f64,
    /// Expected jumps `(1 + rho/lambda) m1 q n^{2/3}`.
    pub jump_budget: f64,
    pub survival: Estimate,
    /// Share of survivors whose jump count lies in `N_q -+ 2 n^0.6`.
    pub jump_window_rate: f64,
    /// `X_I / (sigma sqrt(N_q))` over survivors, in trial order.
    pub endpoints: Vec<f64>,
    pub ks_to_meander: f64,
    pub endpoint_mean: f64,
}

fn model_constants(plan: &ExperimentPlan) -> Result<(ModelConstants, f64)> {
    let mc = ModelConstants::new(&plan.model, plan.rho.max(f64::MIN_POSITIVE))?;
    let lambda = plan.lambda()?;
    Ok((mc, lambda))
}

/// Survivors to `q n^{-1/3}` and their rescaled infected half-edge counts.
pub fn stage1_report(plan: &ExperimentPlan) -> Result<Vec<Stage1Report>> {
    plan.validate()?;
    let (mc, lambda) = model_constants(plan)?;
    let ratio = plan.rho / lambda;
    let sigma = mc.sigma_sq.sqrt();
    let mut out = Vec::new();
    for (i, &n) in plan.n_grid.iter().enumerate() {
        let nf = n as f64;
        let mut params = plan.params(n)?;
        params.checkpoints = vec![plan.q * nf.powf(-1.0 / 3.0)];
        params.stop_after_checkpoints = true;
        let records = run_batch(plan, Simulator::Avosi, i as u64, &params, plan.trials_per_n)?;
        let budget = jump_budget(mc.m1, ratio, plan.q, nf);
        let slack = 2.0 * nf.powf(0.6);
        let survivors: Vec<_> = records.iter().map(|r| r.checkpoints[0]).filter(|c| c.x_infected > 0).collect();
        let inside = survivors.iter().filter(|c| (c.jumps as f64 - budget).abs() <= slack).count();
        let endpoints: Vec<f64> =
            survivors.iter().map(|c| c.x_infected as f64 / (sigma * budget.sqrt())).collect();
        let report = Stage1Report {
            n,
            q: plan.q,
            jump_budget: budget,
            survival: Estimate::from_counts(n, survivors.len() as u64, plan.trials_per_n),
            jump_window_rate: if survivors.is_empty() { 0.0 } else { inside as f64 / survivors.len() as f64 },
            ks_to_meander: if endpoints.is_empty() { 1.0 } else { stats::ks_distance(&endpoints, meander_cdf) },
            endpoint_mean: stats::mean(&endpoints),
            endpoints,
        };
        plan.note(|| format!("stage 1, n = {n}: {} survivors, KS {:.4}", survivors.len(), report.ks_to_meander));
        out.push(report);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionPoint {
    pub s: f64,
    pub mean: f64,
    pub variance: f64,
    /// `(m1 delta / 2)(s^2 - q^2)`.
    pub predicted_mean: f64,
    /// `c_diff^2 (s - q)`.
    pub predicted_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Report {
    pub n: usize,
    pub q: f64,
    pub big_q: f64,
    pub survivors: u64,
    pub points: Vec<DiffusionPoint>,
    /// Takeoff threshold `m1 |delta| Q^2 n^{1/3} / 4`.
    pub threshold: f64,
    /// Share of survivors with `X_I(Q n^{-1/3})` at or above the threshold.
    pub takeoff: Estimate,
}

/// Growth of `X_I` between `q n^{-1/3}` and `Q n^{-1/3}` among survivors.
///
/// With `delta < 0` the threshold uses `|delta|`.
pub fn stage2_report(plan: &ExperimentPlan) -> Result<Vec<Stage2Report>> {
    plan.validate()?;
    if plan.big_q <= plan.q {
        return Err(Error::InvalidParameter("need Q > q".into()));
    }
    let (mc, _) = model_constants(plan)?;
    let mut s_grid: Vec<f64> = plan.s_grid.iter().copied().filter(|&s| s > plan.q && s < plan.big_q).collect();
    s_grid.insert(0, plan.q);
    s_grid.push(plan.big_q);
    s_grid.sort_by(f64::total_cmp);
    s_grid.dedup();
    let mut out = Vec::new();
    for (i, &n) in plan.n_grid.iter().enumerate() {
        let nf = n as f64;
        let scale = nf.powf(-1.0 / 3.0);
        let mut params = plan.params(n)?;
        params.checkpoints = s_grid.iter().map(|s| s * scale).collect();
        params.stop_after_checkpoints = true;
        let records = run_batch(plan, Simulator::Avosi, i as u64, &params, plan.trials_per_n)?;
        let survivors: Vec<_> = records.iter().filter(|r| r.checkpoints[0].x_infected > 0).collect();
        let points = s_grid
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                let growth: Vec<f64> = survivors
                    .iter()
                    .map(|r| (r.checkpoints[j].x_infected as f64 - r.checkpoints[0].x_infected as f64) * scale)
                    .collect();
                DiffusionPoint {
                    s,
                    mean: stats::mean(&growth),
                    variance: stats::variance(&growth),
                    predicted_mean: mc.m1 * mc.delta / 2.0 * (s * s - plan.q * plan.q),
                    predicted_variance: mc.diffusion_coef.powi(2) * (s - plan.q),
                }
            })
            .collect();
        let threshold = mc.m1 * mc.delta.abs() * plan.big_q.powi(2) * nf.cbrt() / 4.0;
        let last = s_grid.len() - 1;
        let hits = survivors.iter().filter(|r| r.checkpoints[last].x_infected as f64 >= threshold).count() as u64;
        plan.note(|| format!("stage 2, n = {n}: {} survivors, {hits} above threshold", survivors.len()));
        out.push(Stage2Report {
            n,
            q: plan.q,
            big_q: plan.big_q,
            survivors: survivors.len() as u64,
            points,
            threshold,
            takeoff: Estimate::from_counts(n, hits, survivors.len() as u64),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage3Report {
    pub n: usize,
    pub big_q: f64,
    pub threshold: f64,
    /// Trials above the takeoff threshold at `Q n^{-1/3}`.
    pub conditioned: u64,
    /// Share of conditioned trials reaching `epsilon n`; absent when none
    /// were conditioned.
    pub outbreak: Option<Estimate>,
    /// Smallest `C` with `|I_t/n - m1 t| <= C t^2 + 5 n^{-1/3}` on every
    /// recorded point `t <= 0.1` of the conditioned trials.
    pub band_constant: Option<f64>,
}

/// Grid for the early-time trajectory check.
const BAND_TIMES: [f64; 10] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1];

/// Outbreak frequency after takeoff.
pub fn stage3_report(plan: &ExperimentPlan) -> Result<Vec<Stage3Report>> {
    plan.validate()?;
    let (mc, _) = model_constants(plan)?;
    let mut out = Vec::new();
    for (i, &n) in plan.n_grid.iter().enumerate() {
        let nf = n as f64;
        let t_q = plan.big_q * nf.powf(-1.0 / 3.0);
        let mut times: Vec<f64> = BAND_TIMES.to_vec();
        times.push(t_q);
        times.sort_by(f64::total_cmp);
        times.dedup();
        let at_q = times.iter().position(|&t| t == t_q).expect("takeoff time present");
        let mut params = plan.params(n)?;
        params.checkpoints = times.clone();
        params.stop_at_outbreak = true;
        let records = run_batch(plan, Simulator::Avosi, i as u64, &params, plan.trials_per_n)?;
        let threshold = mc.m1 * mc.delta.abs() * plan.big_q.powi(2) * nf.cbrt() / 4.0;
        let chosen: Vec<_> =
            records.iter().filter(|r| r.checkpoints[at_q].x_infected as f64 > threshold).collect();
        let hits = chosen.iter().filter(|r| r.outbreak).count() as u64;
        let floor = 5.0 * nf.powf(-1.0 / 3.0);
        let band_constant = (!chosen.is_empty()).then(|| {
            chosen
                .iter()
                .flat_map(|r| r.checkpoints.iter().enumerate())
                .filter(|(j, _)| BAND_TIMES.contains(&times[*j]))
                .map(|(_, c)| ((c.infected as f64 / nf - mc.m1 * c.t).abs() - floor).max(0.0) / (c.t * c.t))
                .fold(0.0, f64::max)
        });
        plan.note(|| format!("stage 3, n = {n}: {} conditioned, {hits} outbreaks", chosen.len()));
        out.push(Stage3Report {
            n,
            big_q: plan.big_q,
            threshold,
            conditioned: chosen.len() as u64,
            outbreak: (!chosen.is_empty()).then(|| Estimate::from_counts(n, hits, chosen.len() as u64)),
            band_constant,
        });
    }
    Ok(out)
}

/// Final sizes of the three simulators and pairwise one-sided rank tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub n: usize,
    pub trials: u64,
    pub mean_ab: f64,
    pub mean_evosi: f64,
    pub mean_avosi: f64,
    /// Tests `evoSI > AB-avoSI`.
    pub evosi_over_ab: RankTest,
    /// Tests `avoSI > evoSI`.
    pub avosi_over_evosi: RankTest,
}

/// Runs all three simulators for the first size of the plan, each with its
/// own derived seed family and full final sizes.
pub fn dominance_report(plan: &ExperimentPlan) -> Result<DominanceReport> {
    plan.validate()?;
    let n = plan.n_grid[0];
    let params = plan.params(n)?;
    let sizes = |sim: Simulator, index: u64| -> Result<Vec<f64>> {
        Ok(run_batch(plan, sim, index, &params, plan.trials_per_n)?.iter().map(|r| r.final_size as f64).collect())
    };
    let ab = sizes(Simulator::AbAvosi, 1 << 32)?;
    let evo = sizes(Simulator::Evosi, 2 << 32)?;
    let avo = sizes(Simulator::Avosi, 3 << 32)?;
    Ok(DominanceReport {
        n,
        trials: plan.trials_per_n,
        mean_ab: stats::mean(&ab),
        mean_evosi: stats::mean(&evo),
        mean_avosi: stats::mean(&avo),
        evosi_over_ab: mann_whitney(&evo, &ab),
        avosi_over_evosi: mann_whitney(&avo, &evo),
    })
}

/// Statement attached to every summary.
pub const TOLERANCE_NOTE: &str =
    "Monte Carlo tolerances are engineering budgets; the underlying results are limits without rates.";

/// JSON summary of a scaling experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub plan: ExperimentPlan,
    pub estimates: Vec<Estimate>,
    pub fit: Option<ScalingFit>,
    pub note: String,
}

impl Summary {
    pub fn new(plan: &ExperimentPlan, estimates: Vec<Estimate>) -> Self {
        let fit = fit_scaling_exponent(&estimates).ok();
        Self { plan: plan.clone(), estimates, fit, note: TOLERANCE_NOTE.into() }
    }
}

/// CSV with one row per grid size.
pub fn estimates_csv(estimates: &[Estimate]) -> String {
    let mut s = String::from("n,trials,successes,value,ci_low,ci_high,scaled\n");
    for e in estimates {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", e.n, e.trials, e.successes, e.value, e.ci_low, e.ci_high, e.scaled);
    }
    s
}

/// One JSON object per line.
pub fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect()
}

/// Writes `contents` to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, contents),
        None => std::io::stdout().lock().write_all(contents.as_bytes()),
    }
}

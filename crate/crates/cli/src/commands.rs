//! Subcommand arguments and their implementations.
//!
//! Every option is optional on the command line so that a config file can
//! supply it; defaults are filled in after merging.

use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use evosi::degree::{audit_assumptions, sample_iid_degrees, DEFAULT_AUDIT_EXPONENT, DEFAULT_ETA};
use evosi::harness::{
    emit, estimate_outbreak_probability, estimates_csv, simulate_trials, stage1_report, stage2_report,
    stage3_report, to_jsonl, ExperimentPlan, LambdaMode, SequenceMode, Simulator, Summary,
};
use evosi::limit::{
    c_f1lim, f1_mc_oracle, f1_series, meander_cdf, meander_f1_slope, meander_mean, meander_sample,
    walk_limit_factor, LimitConstants, OracleEstimate, SeriesValue,
};
use evosi::stats::{ks_distance, Interval};
use evosi::walks::{
    estimate_survival, solve_tilt, walk_second_moment, y_increment_pmf, z_increment_pmf, Horizon, WalkConfig,
    WalkSpec,
};
use evosi::{rng, DegreeModel, DegreeSequence, ModelConstants};

use crate::config::{config_error, one_or_many, FileConfig};

/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;
const DEFAULT_MODEL: &str = "regular:3";
/// Zeros summed explicitly in the slope constant.
const SLOPE_ZEROS: usize = 60;

pub struct Context {
    pub file: FileConfig,
    pub progress: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelOpts {
    /// Degree law: poisson:MU, regular:D or explicit:P0,P1,... [default: regular:3]
    #[arg(long)]
    model: Option<String>,
    /// Rewiring rate [default: 1]
    #[arg(long)]
    rho: Option<f64>,
}

impl ModelOpts {
    fn model(&self) -> anyhow::Result<DegreeModel> {
        Ok(self.model.as_deref().unwrap_or(DEFAULT_MODEL).parse::<DegreeModel>()?)
    }

    fn rho(&self) -> f64 {
        self.rho.unwrap_or(1.0)
    }

    fn constants(&self) -> anyhow::Result<(DegreeModel, ModelConstants, LimitConstants)> {
        let model = self.model()?;
        let mc = ModelConstants::new(&model, self.rho())?;
        let lc = LimitConstants::new(&mc)?;
        Ok((model, mc, lc))
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OutputOpts {
    /// Master seed [default: 20240601]
    #[arg(long)]
    seed: Option<u64>,
    /// Write results to this file instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutputOpts {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn write(&self, text: &str) -> anyhow::Result<()> {
        write_to(self.out.as_deref(), text)
    }
}

fn write_to(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    emit(path, text).with_context(|| match path {
        Some(p) => format!("writing {}", p.display()),
        None => "writing to standard output".into(),
    })
}

#[derive(Debug, Clone, Copy, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulatorArg {
    /// Half-edge exploration
    Avosi,
    /// Exploration that never pairs two infected half-edges
    AbAvosi,
    /// Explicit graph with rewiring
    Evosi,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceArg {
    Resampled,
    Fixed,
}

/// Options shared by the epidemic batch commands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EpidemicOpts {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelOpts,
    /// Infection rate [default: the critical rate]
    #[arg(long)]
    lambda: Option<f64>,
    /// Graph sizes, comma separated and increasing
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    n: Option<Vec<usize>>,
    /// Trials per size
    #[arg(long)]
    trials: Option<u64>,
    /// Outbreak threshold as a fraction of n [default: 0.05]
    #[arg(long)]
    eps: Option<f64>,
    /// Simulator [default: avosi]
    #[arg(long, value_enum)]
    simulator: Option<SimulatorArg>,
    /// Degree sequences drawn per trial or once per size [default: resampled]
    #[arg(long, value_enum)]
    sequence: Option<SequenceArg>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

impl EpidemicOpts {
    fn plan(&self, ctx: &Context, n_default: &[usize], trials_default: u64) -> anyhow::Result<ExperimentPlan> {
        let model = self.model.model()?;
        let n = self.n.clone().unwrap_or_else(|| n_default.to_vec());
        let mut plan = ExperimentPlan::new(model, self.model.rho(), n, self.trials.unwrap_or(trials_default), self.output.seed());
        if let Some(l) = self.lambda {
            plan.lambda_mode = LambdaMode::Explicit(l);
        }
        if let Some(eps) = self.eps {
            plan.epsilon = eps;
        }
        plan.simulator = match self.simulator {
            None | Some(SimulatorArg::Avosi) => Simulator::Avosi,
            Some(SimulatorArg::AbAvosi) => Simulator::AbAvosi,
            Some(SimulatorArg::Evosi) => Simulator::Evosi,
        };
        if let Some(SequenceArg::Fixed) = self.sequence {
            plan.sequence_mode = SequenceMode::Fixed;
        }
        plan.progress = ctx.progress;
        plan.validate()?;
        plan.lambda()?;
        Ok(plan)
    }
}

fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

// ---------------------------------------------------------------- constants

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ConstantsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelOpts,
    /// Output format [default: text]
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

#[derive(Debug, Serialize)]
struct ConstantsReport {
    model: String,
    rho: f64,
    m1: f64,
    m2: f64,
    m3: f64,
    lambda_c: f64,
    delta: f64,
    sigma_sq: f64,
    c_diff: f64,
    c_f1lim: f64,
    c_f1lim_bound: f64,
    c_main: f64,
}

pub fn constants(ctx: &Context, flags: &ConstantsArgs) -> anyhow::Result<()> {
    let a = ctx.file.resolve("constants", flags)?;
    let (model, mc, lc) = a.model.constants()?;
    let bound = if lc.delta > 0.0 { c_f1lim(&lc, SLOPE_ZEROS)?.truncation_bound } else { 0.0 };
    let r = ConstantsReport {
        model: model.label(),
        rho: mc.rho,
        m1: mc.m1,
        m2: mc.m2,
        m3: mc.m3,
        lambda_c: mc.lambda_c,
        delta: mc.delta,
        sigma_sq: mc.sigma_sq,
        c_diff: lc.c_diff,
        c_f1lim: lc.c_f1lim,
        c_f1lim_bound: bound,
        c_main: lc.c_main,
    };
    let text = match a.format.unwrap_or_default() {
        Format::Json => to_json(&r)?,
        Format::Text => {
            let rows = [
                ("rho", r.rho),
                ("m1", r.m1),
                ("m2", r.m2),
                ("m3", r.m3),
                ("lambda_c", r.lambda_c),
                ("delta", r.delta),
                ("sigma_sq", r.sigma_sq),
                ("c_diff", r.c_diff),
                ("c_f1lim", r.c_f1lim),
                ("c_main", r.c_main),
            ];
            let mut s = format!("model     {}\n", r.model);
            for (k, v) in rows {
                s += &format!("{k:<9} {}\n", fmt_num(v));
            }
            s
        }
    };
    a.output.write(&text)
}

// -------------------------------------------------------------------- audit

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct AuditArgs {
    /// Reference degree law [default: regular:3]
    #[arg(long)]
    model: Option<String>,
    /// File with one degree per line; sampled from the model when absent
    #[arg(long)]
    degrees: Option<PathBuf>,
    /// Size of the sampled sequence [default: 100000]
    #[arg(long)]
    n: Option<usize>,
    /// Exponential-moment rate [default: 0.5]
    #[arg(long)]
    eta: Option<f64>,
    /// Concentration exponent [default: 0.62]
    #[arg(long)]
    exponent: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

pub fn audit(ctx: &Context, flags: &AuditArgs) -> anyhow::Result<()> {
    let a = ctx.file.resolve("audit", flags)?;
    let model: DegreeModel = a.model.as_deref().unwrap_or(DEFAULT_MODEL).parse()?;
    let eta = a.eta.unwrap_or(DEFAULT_ETA);
    let exponent = a.exponent.unwrap_or(DEFAULT_AUDIT_EXPONENT);
    if !(eta > 0.0) || !(exponent > 0.0 && exponent < 1.0) {
        return Err(config_error("need eta > 0 and 0 < exponent < 1"));
    }
    let (source, seq) = match &a.degrees {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            (path.display().to_string(), DegreeSequence::from_text(&text)?)
        }
        None => {
            let n = a.n.unwrap_or(100_000);
            if n == 0 {
                return Err(config_error("n must be positive"));
            }
            let seq = sample_iid_degrees(&model, n, &mut rng::stream(a.output.seed(), rng::DEGREES));
            (format!("sample of {n} from {model}"), seq)
        }
    };
    if seq.n() == 0 {
        return Err(config_error("degree sequence is empty"));
    }
    let report = serde_json::json!({
        "source": source,
        "model": model.label(),
        "n": seq.n(),
        "audit": audit_assumptions(&seq, &model, eta, exponent),
    });
    a.output.write(&to_json(&report)?)
}

// ----------------------------------------------------------------- simulate

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    epidemic: EpidemicOpts,
    /// Times at which to snapshot each trial, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    checkpoints: Option<Vec<f64>>,
}

pub fn simulate(ctx: &Context, flags: &SimulateArgs) -> anyhow::Result<()> {
    let a = ctx.file.resolve("simulate", flags)?;
    let plan = a.epidemic.plan(ctx, &[1000], 100)?;
    let records = simulate_trials(&plan, a.checkpoints.as_deref().unwrap_or(&[]))?;
    a.epidemic.output.write(&to_jsonl(&records))
}

// ----------------------------------------------------------------- outbreak

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OutbreakArgs {
    #[command(flatten)]
    #[serde(flatten)]
    epidemic: EpidemicOpts,
}

pub fn outbreak(ctx: &Context, flags: &OutbreakArgs) -> anyhow::Result<()> {
    let a = ctx.file.resolve("outbreak", flags)?;
    let plan = a.epidemic.plan(ctx, &[2000], 1000)?;
    let est = estimate_outbreak_probability(&plan)?;
    a.epidemic.output.write(&estimates_csv(&est))
}

// ------------------------------------------------------------------ scaling

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ScalingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    epidemic: EpidemicOpts,
    /// Also write the per-size estimates as CSV to this file
    #[arg(long)]
    csv: Option<PathBuf>,
}

pub fn scaling(ctx: &Context, flags: &ScalingArgs) -> anyhow::Result<()> {
    let a = ctx.file.resolve("scaling", flags)?;
    let plan = a.epidemic.plan(ctx, &[1000, 2000, 4000, 8000, 16000], 10_000)?;
    let est = estimate_outbreak_probability(&plan)?;
    if let Some(path) = &a.csv {
        write_to(Some(path), &estimates_csv(&est))?;
    }
    a.epidemic.output.write(&to_json(&Summary::new(&plan, est))?)
}

// -------------------------------------------------------------------- walks

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkChoice {
    Upper,
    Lower,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HorizonArg {
    /// Jump budget shortened (upper) or lengthened (lower) by n^0.6
    JumpWindow,
    /// Exactly the jump budget
    Nominal,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct WalksArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelOpts,
    /// Graph size [default: 1000000]
    #[arg(long)]
    n: Option<usize>,
    /// Time scale of the early phase [default: 0.1]
    #[arg(long)]
    q: Option<f64>,
    /// Walks per kind [default: 20000]
    #[arg(long)]
    trials: Option<u64>,
    /// Which walk to run [default: both]
    #[arg(long, value_enum)]
    kind: Option<WalkChoice>,
    /// Number of steps [default: jump-window]
    #[arg(long, value_enum)]
    horizon: Option<HorizonArg>,
    /// Box constant [default: 4]
    #[arg(long)]
    c_box: Option<f64>,
    /// Print the increment laws instead of simulating
    #[arg(long, num_args = 0, default_missing_value = "true")]
    dump: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

#[derive(Debug, Serialize)]
struct WalkReport {
    kind: evosi::walks::WalkKind,
    n: usize,
    q: f64,
    steps: u64,
    jump_budget: f64,
    /// `n^{1/3}` times the increment mean.
    scaled_mean: f64,
    second_moment: f64,
    tilt: Option<f64>,
    trials: u64,
    survivors: u64,
    p_hat: f64,
    ci: Interval,
    n13_scaled: f64,
    /// Small-`q` prediction for `n13_scaled`.
    predicted_scaled: f64,
    ks_to_meander: Option<f64>,
    endpoint_mean: Option<f64>,
}

pub fn walks(ctx: &Context, flags: &WalksArgs) -> anyhow::Result<()> {
    let a = ctx.file.resolve("walks", flags)?;
    let model = a.model.model()?;
    let mc = ModelConstants::new(&model, a.model.rho())?;
    let n = a.n.unwrap_or(1_000_000);
    let q = a.q.unwrap_or(0.1);
    if n < 2 || !(q > 0.0) {
        return Err(config_error("need n >= 2 and q > 0"));
    }
    let mut cfg = WalkConfig::for_model(&model);
    if let Some(c) = a.c_box {
        cfg.c_box = c;
    }
    if let Some(HorizonArg::Nominal) = a.horizon {
        cfg.horizon = Horizon::Nominal;
    }
    let choice = a.kind.unwrap_or(WalkChoice::Both);
    let mut specs: Vec<WalkSpec> = Vec::new();
    if matches!(choice, WalkChoice::Upper | WalkChoice::Both) {
        specs.push(y_increment_pmf(&mc, model.pmf(), n, q, &cfg)?);
    }
    if matches!(choice, WalkChoice::Lower | WalkChoice::Both) {
        specs.push(z_increment_pmf(&mc, model.pmf(), n, q, &cfg)?);
    }
    if a.dump.unwrap_or(false) {
        return a.output.write(&specs.iter().map(WalkSpec::dump).collect::<String>());
    }
    let trials = a.trials.unwrap_or(20_000);
    if trials == 0 {
        return Err(config_error("trials must be positive"));
    }
    let predicted = walk_limit_factor(mc.sigma_sq, mc.rate_ratio(), mc.m1) / q.sqrt();
    let mut reports = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let est = estimate_survival(spec, trials, rng::trial_seed(a.output.seed(), i as u64))?;
        let ends = &est.conditioned_endpoints;
        let enough = ends.len() >= 100;
        reports.push(WalkReport {
            kind: spec.kind,
            n,
            q,
            steps: spec.steps,
            jump_budget: spec.jump_budget,
            scaled_mean: (n as f64).cbrt() * spec.mean(),
            second_moment: walk_second_moment(spec),
            tilt: solve_tilt(spec).ok(),
            trials,
            survivors: est.survivors,
            p_hat: est.p_hat,
            ci: est.ci,
            n13_scaled: est.n13_scaled,
            predicted_scaled: predicted,
            ks_to_meander: enough.then(|| ks_distance(ends, meander_cdf)),
            endpoint_mean: enough.then(|| ends.iter().sum::<f64>() / ends.len() as f64),
        });
    }
    a.output.write(&to_json(&reports)?)
}

// ------------------------------------------------------------------ meander

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct MeanderArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelOpts,
    /// Endpoints to sample [default: 100000]
    #[arg(long)]
    samples: Option<u64>,
    /// Time scales at which to evaluate the slope, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    q: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

pub fn meander(ctx: &Context, flags: &MeanderArgs) -> anyhow::Result<()> {
    let a = ctx.file.resolve("meander", flags)?;
    let samples = a.samples.unwrap_or(100_000);
    if samples == 0 {
        return Err(config_error("samples must be positive"));
    }
    let mut r = rng::stream(a.output.seed(), rng::DETAIL);
    let xs: Vec<f64> = (0..samples).map(|_| meander_sample(&mut r)).collect();
    let (_, _, lc) = a.model.constants()?;
    let mut slopes = Vec::new();
    for &q in a.q.as_deref().unwrap_or(&[]) {
        if !(q > 0.0) {
            return Err(config_error(format!("q = {q} must be positive")));
        }
        slopes.push(serde_json::json!({ "q": q, "slope": meander_f1_slope(q, &lc)? }));
    }
    let report = serde_json::json!({
        "samples": samples,
        "mean": xs.iter().sum::<f64>() / samples as f64,
        "target_mean": meander_mean(),
        "ks": ks_distance(&xs, meander_cdf),
        "c_f1lim": lc.c_f1lim,
        "slopes": slopes,
    });
    a.output.write(&to_json(&report)?)
}

// ----------------------------------------------------------------------- f1

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct F1Args {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelOpts,
    /// Normalized start level
    #[arg(long)]
    x: Option<f64>,
    /// Time scale of the early phase
    #[arg(long)]
    q: Option<f64>,
    /// Also estimate by path simulation with this many paths [default: 0]
    #[arg(long)]
    paths: Option<u64>,
    /// Time step of the path simulation [default: 0.001]
    #[arg(long)]
    dt: Option<f64>,
    /// Output format [default: text]
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

#[derive(Debug, Serialize)]
struct F1Report {
    x: f64,
    q: f64,
    series: SeriesValue,
    oracle: Option<OracleEstimate>,
}

pub fn f1(ctx: &Context, flags: &F1Args) -> anyhow::Result<()> {
    let a = ctx.file.resolve("f1", flags)?;
    let (x, q) = match (a.x, a.q) {
        (Some(x), Some(q)) => (x, q),
        _ => return Err(config_error("f1 needs both --x and --q")),
    };
    let (_, _, lc) = a.model.constants()?;
    let series = f1_series(x, q, &lc)?;
    let paths = a.paths.unwrap_or(0);
    let oracle = if paths > 0 {
        Some(f1_mc_oracle(x, q, &lc, a.output.seed(), paths, a.dt.unwrap_or(1e-3))?)
    } else {
        None
    };
    let r = F1Report { x, q, series, oracle };
    let text = match a.format.unwrap_or_default() {
        Format::Json => to_json(&r)?,
        Format::Text => {
            let mut s = format!(
                "value             {}\ntruncation_bound  {:e}\nterms             {}\n",
                fmt_num(series.value),
                series.truncation_bound,
                series.terms
            );
            if let Some(o) = oracle {
                s += &format!(
                    "oracle            {}\noracle_std_error  {:e}\noracle_bias_bound {:e}\n",
                    fmt_num(o.estimate),
                    o.std_error,
                    o.truncation_bias_bound
                );
            }
            s
        }
    };
    a.output.write(&text)
}

// ------------------------------------------------------------------- stages

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct StagesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    epidemic: EpidemicOpts,
    /// Phase to diagnose: 1 early walk, 2 diffusion and takeoff, 3 outbreak
    #[arg(long)]
    stage: Option<u8>,
    /// Early time scale [default: 0.1]
    #[arg(long)]
    q: Option<f64>,
    /// Takeoff time scale [default: 5]
    #[arg(long = "big-q", visible_alias = "Q")]
    big_q: Option<f64>,
    /// Intermediate times for the diffusion report, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    s_grid: Option<Vec<f64>>,
}

pub fn stages(ctx: &Context, flags: &StagesArgs) -> anyhow::Result<()> {
    let a = ctx.file.resolve("stages", flags)?;
    let mut plan = a.epidemic.plan(ctx, &[100_000], 10_000)?;
    if let Some(q) = a.q {
        plan.q = q;
    }
    if let Some(big_q) = a.big_q {
        plan.big_q = big_q;
    }
    if let Some(s) = &a.s_grid {
        plan.s_grid = s.clone();
    }
    plan.validate()?;
    let text = match a.stage {
        Some(1) => to_jsonl(&stage1_report(&plan)?),
        Some(2) => to_jsonl(&stage2_report(&plan)?),
        Some(3) => to_jsonl(&stage3_report(&plan)?),
        Some(s) => return Err(config_error(format!("stage must be 1, 2 or 3, got {s}"))),
        None => return Err(config_error("stages needs --stage 1, 2 or 3")),
    };
    a.epidemic.output.write(&text)
}

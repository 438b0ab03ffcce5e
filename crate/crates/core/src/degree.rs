//! Degree distributions, their moments, and the closed-form constants of the
//! critical regime.
//!
//! A [`DegreeModel`] always carries a truncated pmf so every quantity can be
//! computed by direct summation. Poisson and regular models additionally have
//! closed forms; both paths are public so they can be cross-checked.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tail exponent used for certificates and audits.
pub const DEFAULT_ETA: f64 = 0.5;
/// Default concentration exponent for the degree audit.
pub const DEFAULT_AUDIT_EXPONENT: f64 = 0.62;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    Poisson { mu: f64 },
    Regular { d: usize },
    /// `pmf[k]` is the probability of degree `k`.
    Explicit { pmf: Vec<f64> },
}

/// Certificate `p_k <= c * exp(-eta * k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub c: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeModel {
    kind: ModelKind,
    pmf: Vec<f64>,
    tail_bound: TailBound,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl DegreeModel {
    pub fn poisson(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidModel(format!("poisson mean {mu} must be positive")));
        }
        // Extend until the fourth-moment contribution of the rest is negligible.
        let mut pmf = Vec::new();
        let mut p = (-mu).exp();
        let mut k = 0usize;
        loop {
            pmf.push(p);
            let kf = k as f64;
            if kf > 2.0 * mu + 10.0 && (kf + 1.0).powi(4) * p < 1e-20 {
                break;
            }
            k += 1;
            p *= mu / k as f64;
        }
        Ok(Self::assemble(ModelKind::Poisson { mu }, pmf))
    }

    pub fn regular(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidModel("regular degree must be positive".into()));
        }
        let mut pmf = vec![0.0; d + 1];
        pmf[d] = 1.0;
        Ok(Self::assemble(ModelKind::Regular { d }, pmf))
    }

    /// Builds a model from `pmf[k] = P(D = k)`.
    pub fn explicit(pmf: Vec<f64>) -> Result<Self> {
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidModel("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("probabilities sum to {total}, not 1")));
        }
        let mut pmf: Vec<f64> = pmf.into_iter().map(|p| p / total).collect();
        while pmf.len() > 1 && pmf[pmf.len() - 1] == 0.0 {
            pmf.pop();
        }
        if pmf.iter().enumerate().all(|(k, p)| k == 0 || *p == 0.0) {
            return Err(Error::InvalidModel("mean degree must be positive".into()));
        }
        Ok(Self::assemble(ModelKind::Explicit { pmf: pmf.clone() }, pmf))
    }

    /// Builds an explicit model from `(k, p_k)` pairs.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let len = pairs.iter().map(|(k, _)| k + 1).max().unwrap_or(0);
        let mut pmf = vec![0.0; len];
        for &(k, p) in pairs {
            pmf[k] += p;
        }
        Self::explicit(pmf)
    }

    fn assemble(kind: ModelKind, pmf: Vec<f64>) -> Self {
        let tail_bound = TailBound {
            c: tail_constant_for(&kind, &pmf, DEFAULT_ETA),
            eta: DEFAULT_ETA,
        };
        let cdf = cumulative(&pmf);
        Self { kind, pmf, tail_bound, cdf }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Truncated pmf, indexed by degree.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn p(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn tail_bound(&self) -> TailBound {
        self.tail_bound
    }

    /// Constant `C` such that `(1/n) sum exp(eta d_i) <= C` holds with high
    /// probability for i.i.d. samples, namely `2 sqrt(E[exp(2 eta D)])`.
    pub fn tail_constant(&self, eta: f64) -> f64 {
        tail_constant_for(&self.kind, &self.pmf, eta)
    }

    /// Largest degree with positive mass in the truncated pmf.
    pub fn max_degree(&self) -> usize {
        self.pmf.len() - 1
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if let ModelKind::Regular { d } = self.kind {
            return d;
        }
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u);
        k.min(self.pmf.len() - 1)
    }

    fn ensure_cdf(&mut self) {
        if self.cdf.len() != self.pmf.len() {
            self.cdf = cumulative(&self.pmf);
        }
    }

    /// Re-derives cached data after deserialization.
    pub fn restored(mut self) -> Self {
        self.ensure_cdf();
        self
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

fn cumulative(pmf: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    pmf.iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn tail_constant_for(kind: &ModelKind, pmf: &[f64], eta: f64) -> f64 {
    let mgf = match *kind {
        ModelKind::Poisson { mu } => (mu * ((2.0 * eta).exp() - 1.0)).exp(),
        ModelKind::Regular { d } => (2.0 * eta * d as f64).exp(),
        ModelKind::Explicit { .. } => pmf
            .iter()
            .enumerate()
            .map(|(k, p)| p * (2.0 * eta * k as f64).exp())
            .sum(),
    };
    2.0 * mgf.sqrt()
}

impl fmt::Display for DegreeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ModelKind::Poisson { mu } => write!(f, "poisson:{mu}"),
            ModelKind::Regular { d } => write!(f, "regular:{d}"),
            ModelKind::Explicit { pmf } => {
                let parts: Vec<String> = pmf.iter().map(|p| p.to_string()).collect();
                write!(f, "explicit:{}", parts.join(","))
            }
        }
    }
}

/// Parses `poisson:MU`, `regular:D` or `explicit:P0,P1,...`.
impl FromStr for DegreeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidModel(format!("expected KIND:PARAM, got {s:?}")))?;
        let bad = |what: &str| Error::InvalidModel(format!("cannot parse {what} in {s:?}"));
        match name.trim().to_ascii_lowercase().as_str() {
            "poisson" => Self::poisson(arg.trim().parse().map_err(|_| bad("mean"))?),
            "regular" => Self::regular(arg.trim().parse().map_err(|_| bad("degree"))?),
            "explicit" => {
                let pmf = arg
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| bad("probability")))
                    .collect::<Result<Vec<_>>>()?;
                Self::explicit(pmf)
            }
            other => Err(Error::InvalidModel(format!("unknown model kind {other:?}"))),
        }
    }
}

/// `r`-th raw moment, closed form where available.
pub fn moments(model: &DegreeModel, r: u32) -> f64 {
    match *model.kind() {
        ModelKind::Poisson { mu } => match r {
            0 => 1.0,
            1 => mu,
            2 => mu * mu + mu,
            3 => mu.powi(3) + 3.0 * mu * mu + mu,
            4 => mu.powi(4) + 6.0 * mu.powi(3) + 7.0 * mu * mu + mu,
            _ => moments_by_summation(model, r),
        },
        ModelKind::Regular { d } => (d as f64).powi(r as i32),
        ModelKind::Explicit { .. } => moments_by_summation(model, r),
    }
}

/// `r`-th raw moment by summing the truncated pmf.
pub fn moments_by_summation(model: &DegreeModel, r: u32) -> f64 {
    // Smallest terms first.
    model
        .pmf()
        .iter()
        .enumerate()
        .rev()
        .map(|(k, p)| (k as f64).powi(r as i32) * p)
        .sum()
}

/// Moments `m_1..m_4` computed by one of the two paths.
#[derive(Debug, Clone, Copy)]
struct Moments {
    m1: f64,
    m2: f64,
    m3: f64,
}

impl Moments {
    fn closed(model: &DegreeModel) -> Self {
        Self { m1: moments(model, 1), m2: moments(model, 2), m3: moments(model, 3) }
    }

    fn summed(model: &DegreeModel) -> Self {
        Self {
            m1: moments_by_summation(model, 1),
            m2: moments_by_summation(model, 2),
            m3: moments_by_summation(model, 3),
        }
    }

    fn gap(&self) -> Result<f64> {
        let gap = self.m2 - 2.0 * self.m1;
        if gap <= 0.0 {
            return Err(Error::SubcriticalStructure { gap });
        }
        Ok(gap)
    }

    fn delta(&self) -> f64 {
        -(self.m3 - 3.0 * self.m2 + 2.0 * self.m1) / self.m1 + 3.0 * (self.m2 - 2.0 * self.m1)
    }

    /// Uses `rho / lambda_c = (m2 - 2 m1) / m1`; `rho` only enters through
    /// that ratio, so the result does not depend on it.
    fn sigma_sq(&self, rho: f64) -> Result<f64> {
        let gap = self.gap()?;
        let ratio = if rho > 0.0 {
            rho / (rho * self.m1 / gap)
        } else {
            gap / self.m1
        };
        let centred = self.m3 - 4.0 * self.m2 + 4.0 * self.m1;
        Ok(centred / ((1.0 + ratio) * self.m1) + ratio / (1.0 + ratio))
    }
}

/// `lambda_c = rho m1 / (m2 - 2 m1)`.
pub fn critical_rate(model: &DegreeModel, rho: f64) -> Result<f64> {
    let m = Moments::closed(model);
    Ok(rho * m.m1 / m.gap()?)
}

/// The cubic-moment functional whose sign separates the two regimes.
pub fn delta(model: &DegreeModel) -> f64 {
    Moments::closed(model).delta()
}

pub fn delta_by_summation(model: &DegreeModel) -> f64 {
    Moments::summed(model).delta()
}

/// Variance of one exploration step at criticality.
pub fn sigma_sq(model: &DegreeModel, rho: f64) -> Result<f64> {
    Moments::closed(model).sigma_sq(rho)
}

pub fn sigma_sq_by_summation(model: &DegreeModel, rho: f64) -> Result<f64> {
    Moments::summed(model).sigma_sq(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub lambda_c: f64,
    pub delta: f64,
    pub sigma_sq: f64,
    pub rho: f64,
    /// `m1 * delta`.
    pub drift_coef: f64,
    /// `sqrt(m3 - 3 m2 + 2 m1)`.
    pub diffusion_coef: f64,
}

impl ModelConstants {
    pub fn new(model: &DegreeModel, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
        }
        let m = Moments::closed(model);
        let lambda_c = critical_rate(model, rho)?;
        let delta = m.delta();
        Ok(Self {
            m1: m.m1,
            m2: m.m2,
            m3: m.m3,
            m4: moments(model, 4),
            lambda_c,
            delta,
            sigma_sq: m.sigma_sq(rho)?,
            rho,
            drift_coef: m.m1 * delta,
            diffusion_coef: (m.m3 - 3.0 * m.m2 + 2.0 * m.m1).max(0.0).sqrt(),
        })
    }

    /// `rho / lambda_c`.
    pub fn rate_ratio(&self) -> f64 {
        self.rho / self.lambda_c
    }
}

/// A concrete degree sequence `d_1..d_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSequence {
    degrees: Vec<u32>,
    n: usize,
    /// `counts[k]` vertices have degree `k`.
    counts: Vec<u64>,
}

impl DegreeSequence {
    pub fn new(degrees: Vec<u32>) -> Self {
        let n = degrees.len();
        let max = degrees.iter().copied().max().unwrap_or(0) as usize;
        let mut counts = vec![0u64; max + 1];
        for &d in &degrees {
            counts[d as usize] += 1;
        }
        Self { degrees, n, counts }
    }

    /// Reads one integer per non-empty line.
    pub fn from_text(text: &str) -> Result<Self> {
        let degrees = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<u32>()
                    .map_err(|_| Error::InvalidParameter(format!("bad degree line {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(degrees))
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_degree(&self) -> u64 {
        self.degrees.iter().map(|&d| d as u64).sum()
    }

    pub fn max_degree(&self) -> usize {
        self.counts.len() - 1
    }

    /// `p_{k,n} = #{i : d_i = k} / n`.
    pub fn empirical_pmf(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    pub fn p(&self, k: usize) -> f64 {
        self.counts.get(k).map_or(0.0, |&c| c as f64 / self.n as f64)
    }

    /// Increments `d_1` when the degree sum is odd.
    pub fn parity_fixed(mut degrees: Vec<u32>) -> Self {
        let total: u64 = degrees.iter().map(|&d| d as u64).sum();
        if total % 2 == 1 {
            degrees[0] += 1;
        }
        Self::new(degrees)
    }
}

/// I.i.d. degrees from `model`, with the parity fix on the first vertex.
pub fn sample_iid_degrees<R: Rng + ?Sized>(model: &DegreeModel, n: usize, rng: &mut R) -> DegreeSequence {
    assert!(n >= 1, "need at least one vertex");
    let degrees = (0..n).map(|_| model.sample(rng) as u32).collect();
    DegreeSequence::parity_fixed(degrees)
}

/// Degree counts of an i.i.d. sample without materializing the sequence.
///
/// `first` is the (parity-fixed) degree of vertex 1 and `counts` includes it.
/// The law of `(first, counts)` equals that produced by
/// [`sample_iid_degrees`].
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeCounts {
    pub n: usize,
    pub first: usize,
    pub counts: Vec<u64>,
}

impl DegreeCounts {
    pub fn from_sequence(seq: &DegreeSequence) -> Self {
        Self { n: seq.n(), first: seq.degrees()[0] as usize, counts: seq.counts().to_vec() }
    }

    pub fn total_degree(&self) -> u64 {
        self.counts.iter().enumerate().map(|(k, &c)| k as u64 * c).sum()
    }
}

pub fn sample_iid_counts<R: Rng + ?Sized>(model: &DegreeModel, n: usize, rng: &mut R) -> DegreeCounts {
    assert!(n >= 1, "need at least one vertex");
    let pmf = model.pmf();
    let mut counts = vec![0u64; pmf.len() + 1];
    let first = model.sample(rng);
    // Sequential binomial splitting gives the multinomial for the rest.
    let mut left = (n - 1) as u64;
    let mut mass = 1.0;
    for (k, &p) in pmf.iter().enumerate() {
        if left == 0 {
            break;
        }
        let c = if k + 1 == pmf.len() || p >= mass {
            left
        } else {
            let prob = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, prob).expect("valid binomial").sample(rng)
        };
        counts[k] += c;
        left -= c;
        mass -= p;
    }
    let odd = counts.iter().enumerate().map(|(k, &c)| k as u64 * c).sum::<u64>() % 2 == 1;
    let first = if (odd && first % 2 == 0) || (!odd && first % 2 == 1) { first + 1 } else { first };
    if counts.len() <= first {
        counts.resize(first + 1, 0);
    }
    counts[first] += 1;
    while counts.len() > 1 && counts[counts.len() - 1] == 0 {
        counts.pop();
    }
    DegreeCounts { n, first, counts }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialMomentAudit {
    pub eta: f64,
    pub c: f64,
    /// `(1/n) sum exp(eta d_i)`.
    pub observed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationAudit {
    /// `sum (k+1)^4 |n p_{k,n} - n p_k|`.
    pub weighted_l1: f64,
    /// `log(weighted_l1) / log(n)`; absent when the sum is zero.
    pub certified_exponent: Option<f64>,
    pub exponent: f64,
    pub pass: bool,
    /// `max |n p_{k,n} - n p_k|` over `k <= log(n) / eta`.
    pub local_max_deviation: f64,
    /// Constant needed for `local_max_deviation <= c n^exponent / log^5 n`.
    pub implied_constant: f64,
    /// Every local deviation lies inside its 99% Chernoff band.
    pub local_within_bands: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionAudit {
    pub h1: ExponentialMomentAudit,
    /// `sup_k |p_{k,n} - p_k|`.
    pub h2: f64,
    pub h3: ConcentrationAudit,
    pub max_degree: usize,
    /// `log(n C) / eta`.
    pub max_degree_bound: f64,
}

/// Checks the exponential-moment, convergence and concentration conditions
/// of `seq` against `model`.
pub fn audit_assumptions(seq: &DegreeSequence, model: &DegreeModel, eta: f64, exponent: f64) -> AssumptionAudit {
    assert!(eta > 0.0, "eta must be positive");
    let n = seq.n() as f64;
    let c = model.tail_constant(eta);
    let observed = seq.degrees().iter().map(|&d| (eta * d as f64).exp()).sum::<f64>() / n;
    let h1 = ExponentialMomentAudit { eta, c, observed, pass: observed <= c };

    let len = seq.counts().len().max(model.pmf().len());
    let mut h2 = 0.0f64;
    let mut weighted_l1 = 0.0;
    for k in 0..len {
        let gap = (seq.p(k) - model.p(k)).abs();
        h2 = h2.max(gap);
        weighted_l1 += ((k + 1) as f64).powi(4) * n * gap;
    }

    let k_local = (n.ln() / eta).floor() as usize;
    let level = 0.01 / (k_local + 1) as f64;
    let log_term = (2.0 / level).ln();
    let mut local_max = 0.0f64;
    let mut within = true;
    for k in 0..=k_local {
        let mean = n * model.p(k);
        let dev = (seq.counts().get(k).copied().unwrap_or(0) as f64 - mean).abs();
        local_max = local_max.max(dev);
        // Smallest u with 2 exp(-min(u^2 / 3mu, u / 3)) <= level, plus one
        // for the parity fix.
        let band = (3.0 * mean * log_term).sqrt().max(3.0 * log_term) + 1.0;
        within &= dev <= band;
    }
    let h3 = ConcentrationAudit {
        weighted_l1,
        certified_exponent: (weighted_l1 > 0.0).then(|| weighted_l1.ln() / n.ln()),
        exponent,
        pass: weighted_l1 <= n.powf(exponent),
        local_max_deviation: local_max,
        implied_constant: local_max * n.ln().powi(5) / n.powf(exponent),
        local_within_bands: within,
    };
    AssumptionAudit {
        h1,
        h2,
        h3,
        max_degree: seq.max_degree(),
        max_degree_bound: (n * c).ln() / eta,
    }
}

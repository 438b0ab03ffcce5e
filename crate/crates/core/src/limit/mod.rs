//! Parabolic-barrier crossing probabilities and the limit constants of the
//! outbreak probability.
//!
//! `F1(x, q)` is the probability that `a + B_u + c_par (u^2 + 2 q u)` stays
//! positive for all `u >= 0`, with `a` proportional to `x sqrt(q)`. It has an
//! Airy-zero series whose terms decay only like `k^{-5/3}`. The series is
//! evaluated here after an exact rearrangement: with `h(w) = Ai(xi + w)/Ai(w)`
//! and its partial-fraction expansion over the zeros `z_k`, the leading
//! asymptotic terms of `F2(z_k, q)` are summed in closed form through the
//! Taylor coefficients of `h`, leaving a remainder that decays like `k^{-9}`.

pub mod airy;

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree::ModelConstants;
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::rng;

pub use airy::{airy_ai, airy_ai_prime, airy_zeros, AiryTable};

/// Order of the closed-form subtraction.
const SUBTRACTED: usize = 9;
/// Default tolerance on the series tail.
pub const SERIES_TOL: f64 = 1e-10;
/// Largest number of zero terms before giving up.
pub const MAX_TERMS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    /// Diffusion coefficient `sqrt(m3 - 3 m2 + 2 m1)`.
    pub c_diff: f64,
    /// Barrier curvature `m1 delta / (2 c_diff)`.
    pub c_par: f64,
    /// `(4 c_par)^{1/3} sigma sqrt((1 + rho/lambda) m1) / c_diff`.
    pub c_prime: f64,
    pub sigma: f64,
    pub m1: f64,
    pub rate_ratio: f64,
    pub delta: f64,
    /// Small-`q` slope of `E[F1(meander, q)] / sqrt(q)`; zero when `delta <= 0`.
    pub c_f1lim: f64,
    /// Limit of `n^{1/3}` times the outbreak probability; zero when `delta <= 0`.
    pub c_main: f64,
}

impl LimitConstants {
    pub fn new(mc: &ModelConstants) -> Result<Self> {
        let c_diff = mc.diffusion_coef;
        if c_diff <= 0.0 {
            return Err(Error::InvalidParameter("diffusion coefficient must be positive".into()));
        }
        let c_par = mc.m1 * mc.delta / (2.0 * c_diff);
        let sigma = mc.sigma_sq.sqrt();
        let rate_ratio = mc.rate_ratio();
        let mut lc = Self {
            c_diff,
            c_par,
            c_prime: (4.0 * c_par).cbrt() * sigma * ((1.0 + rate_ratio) * mc.m1).sqrt() / c_diff,
            sigma,
            m1: mc.m1,
            rate_ratio,
            delta: mc.delta,
            c_f1lim: 0.0,
            c_main: 0.0,
        };
        if mc.delta > 0.0 {
            lc.c_f1lim = c_f1lim(&lc, 60)?.value;
            lc.c_main = c_main(&lc)?;
        }
        Ok(lc)
    }

    /// `(2 c_par^2)^{1/3}`, the scale that turns `F2` into a unit cubic.
    fn airy_scale(&self) -> f64 {
        (2.0 * self.c_par * self.c_par).cbrt()
    }

    /// Starting level `sigma x sqrt((1 + rho/lambda) m1 q) / c_diff`.
    pub fn start_level(&self, x: f64, q: f64) -> f64 {
        self.sigma * x * ((1.0 + self.rate_ratio) * self.m1 * q).sqrt() / self.c_diff
    }
}

/// `int_0^inf exp(s t - beta t^2 - t^3 / 3) dt`.
fn unit_integral(s: f64, beta: f64) -> f64 {
    let phi = |t: f64| s * t - beta * t * t - t * t * t / 3.0;
    let disc = beta * beta + s;
    let peak = if disc > 0.0 { (-beta + disc.sqrt()).max(0.0) } else { 0.0 };
    let top = phi(peak);
    let mut end = peak + 1.0;
    while phi(end) - top > -45.0 {
        end = peak + 2.0 * (end - peak);
    }
    // For strongly negative s the mass sits within ~1/|s| of the origin.
    let mut pieces = vec![0.0];
    if peak > 0.0 {
        pieces.push(peak);
    } else if s < -1.0 {
        pieces.push((1.0 / -s).min(end / 2.0));
    }
    pieces.push(end);
    let f = |t: f64| (phi(t) - top).exp();
    let body: f64 = pieces
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], 1e-300, 1e-14).value)
        .sum();
    body * top.exp()
}

/// The auxiliary integral
/// `F2(x, q) = a int_0^inf exp(a x t - (2/3) c^2 t^3 - 2 c^2 q t^2 - 2 c^2 q^2 t) dt`
/// with `c = c_par` and `a = (2 c^2)^{1/3}`.
pub fn f2(x: f64, q: f64, lc: &LimitConstants) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be non-negative")));
    }
    let a = lc.airy_scale();
    let value = unit_integral(x - a * a * q * q, a * q);
    if !value.is_finite() {
        return Err(Error::OutOfRange(x));
    }
    Ok(value)
}

/// `d_j = j! [t^j] exp(-beta t^2 - t^3/3)`, so that
/// `F2 ~ sum_j d_j / Y^{j+1}` with `Y = gamma - x`.
fn moment_coefficients(beta: f64, len: usize) -> Vec<f64> {
    let mut c = vec![0.0; len];
    c[0] = 1.0;
    for j in 0..len - 1 {
        let a = if j >= 1 { c[j - 1] } else { 0.0 };
        let b = if j >= 2 { c[j - 2] } else { 0.0 };
        c[j + 1] = (-2.0 * beta * a - b) / (j + 1) as f64;
    }
    let mut fact = 1.0;
    for (j, v) in c.iter_mut().enumerate() {
        if j > 0 {
            fact *= j as f64;
        }
        *v *= fact;
    }
    c
}

fn asymptotic_part(d: &[f64], y: f64) -> f64 {
    let inv = 1.0 / y;
    let mut p = inv;
    let mut s = 0.0;
    for &dj in d {
        s += dj * p;
        p *= inv;
    }
    s
}

/// Power-series quotient `num / den`.
fn series_divide(num: &[f64], den: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; num.len()];
    for j in 0..num.len() {
        let mut acc = num[j];
        for i in 1..=j.min(den.len() - 1) {
            acc -= den[i] * out[j - i];
        }
        out[j] = acc / den[0];
    }
    out
}

/// Taylor coefficients in `w` at `w = gamma` of `Ai(xi + w) / Ai(gamma + ...)`.
fn ratio_coefficients(xi: f64, gamma: f64, len: usize) -> Result<Vec<f64>> {
    let (top, bottom, factor) = if xi + gamma >= 0.0 && gamma >= 0.0 {
        let (a, ap) = airy::airy_scaled(xi + gamma);
        let (b, bp) = airy::airy_scaled(gamma);
        let zeta = |x: f64| 2.0 / 3.0 * x.powf(1.5);
        ((a, ap), (b, bp), (zeta(gamma) - zeta(xi + gamma)).exp())
    } else {
        (airy::airy(xi + gamma)?, airy::airy(gamma)?, 1.0)
    };
    let num = airy::taylor_coefficients(xi + gamma, top.0, top.1, len);
    let den = airy::taylor_coefficients(gamma, bottom.0, bottom.1, len);
    Ok(series_divide(&num, &den).into_iter().map(|v| v * factor).collect())
}

/// Bound on `sum_{k > K} |Y_k|^{-p} |y_k|^{-1/4}` using the asymptotic zero
/// spacing.
fn zero_power_tail(k: usize, p: f64) -> f64 {
    let e = 2.0 * (p + 0.25) / 3.0;
    (1.5 * PI).powf(-e) * (k as f64 - 0.25).powf(1.0 - e) / (e - 1.0)
}

/// A truncated series with its tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub truncation_bound: f64,
    pub terms: usize,
}

/// Tail estimate after `k` remainder terms.
fn remainder_tail(d_next: &[f64], y_k: f64, k: usize) -> f64 {
    // Envelope of the first omitted asymptotic terms, doubled for safety.
    let coef: f64 = d_next.iter().enumerate().map(|(i, dj)| dj.abs() / y_k.powi(i as i32)).sum();
    let ai_max = 0.536;
    2.0 * coef * ai_max * PI.sqrt() * zero_power_tail(k, (SUBTRACTED + 2) as f64)
}

/// Barrier-crossing probability `F1(x, q)` from its Airy series.
///
/// Returns 0 identically when `delta <= 0`.
pub fn f1_series(x: f64, q: f64, lc: &LimitConstants) -> Result<SeriesValue> {
    f1_series_with(x, q, lc, SERIES_TOL)
}

pub fn f1_series_with(x: f64, q: f64, lc: &LimitConstants, tol: f64) -> Result<SeriesValue> {
    if lc.delta <= 0.0 {
        return Ok(SeriesValue { value: 0.0, truncation_bound: 0.0, terms: 0 });
    }
    if !(x >= 0.0) || !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("need x >= 0 and q > 0, got x = {x}, q = {q}")));
    }
    let a = lc.airy_scale();
    let (beta, gamma) = (a * q, a * a * q * q);
    let xi = lc.c_prime * q.sqrt() * x;
    let prefactor = (-2.0 * lc.c_par * q * lc.start_level(x, q)).exp();

    let d = moment_coefficients(beta, SUBTRACTED + 4);
    let (kept, next) = d.split_at(SUBTRACTED + 1);
    let h = ratio_coefficients(xi, gamma, SUBTRACTED + 1)?;
    let mut bracket: f64 = kept
        .iter()
        .zip(&h)
        .enumerate()
        .map(|(j, (dj, hj))| if j % 2 == 0 { dj * hj } else { -dj * hj })
        .sum();

    let table = airy::table(MAX_TERMS)?;
    let mut bound = f64::INFINITY;
    let mut terms = 0;
    for k in 0..MAX_TERMS {
        let z = table.zeros[k];
        let y = gamma - z;
        let rest = unit_integral(-y, beta) - asymptotic_part(kept, y);
        bracket += rest * airy_ai(xi + z)? / table.derivatives[k];
        terms = k + 1;
        bound = prefactor * remainder_tail(next, y, terms);
        if terms >= 5 && bound < tol {
            break;
        }
    }
    if bound >= tol {
        return Err(Error::SeriesDivergence(MAX_TERMS));
    }
    Ok(SeriesValue { value: (1.0 - prefactor * bracket).clamp(0.0, 1.0), truncation_bound: bound, terms })
}

/// The series summed term by term as written, without acceleration.
pub fn f1_series_direct(x: f64, q: f64, lc: &LimitConstants, terms: usize) -> Result<f64> {
    if lc.delta <= 0.0 {
        return Ok(0.0);
    }
    let table = airy::table(terms)?;
    let xi = lc.c_prime * q.sqrt() * x;
    let prefactor = (-2.0 * lc.c_par * q * lc.start_level(x, q)).exp();
    let mut bracket = airy_ai(xi)? / airy::AI0;
    for k in 0..terms {
        let z = table.zeros[k];
        bracket += (f2(z, q, lc)? + 1.0 / z) * airy_ai(xi + z)? / table.derivatives[k];
    }
    Ok((1.0 - prefactor * bracket).clamp(0.0, 1.0))
}

/// Monte Carlo estimate of `F1` with its standard error and the bias bound
/// from stopping paths early.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub x: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub truncation_bias_bound: f64,
}

/// Path-simulation estimate of `F1(x, q)` for every `x` in `xs`, all driven
/// by the same Brownian increments so that estimates are monotone in `x`.
///
/// Each step of length `dt` is weighted by the Brownian-bridge probability of
/// not touching zero between grid points. A path stops once the probability
/// of ever reaching zero afterwards is below `1e-7` (a drift bound), and its
/// weight is reduced by that bound.
pub fn f1_mc_oracle_grid(
    xs: &[f64],
    q: f64,
    lc: &LimitConstants,
    seed: u64,
    paths: u64,
    dt: f64,
) -> Result<Vec<OracleEstimate>> {
    if !(dt > 0.0 && dt <= 1e-3) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must lie in (0, 1e-3]")));
    }
    if lc.c_par <= 0.0 {
        return Ok(xs.iter().map(|&x| OracleEstimate { x, estimate: 0.0, std_error: 0.0, truncation_bias_bound: 0.0 }).collect());
    }
    let starts: Vec<f64> = xs.iter().map(|&x| lc.start_level(x, q)).collect();
    let c = lc.c_par;
    let sqrt_dt = dt.sqrt();
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(rng::trial_seed(seed, i), rng::JUMPS);
            let mut level = starts.clone();
            let mut weight: Vec<f64> = starts.iter().map(|&a| if a > 0.0 { 1.0 } else { 0.0 }).collect();
            let mut bias = vec![0.0; starts.len()];
            let mut live: Vec<usize> = (0..starts.len()).filter(|&j| weight[j] > 0.0).collect();
            let mut u = 0.0;
            while !live.is_empty() {
                let noise: f64 = r.sample::<f64, _>(StandardNormal) * sqrt_dt;
                let next_u = u + dt;
                let push = c * (next_u * next_u - u * u + 2.0 * q * dt);
                live.retain(|&j| {
                    let w0 = level[j];
                    let w1 = w0 + push + noise;
                    if w1 <= 0.0 {
                        weight[j] = 0.0;
                        return false;
                    }
                    weight[j] *= 1.0 - (-2.0 * w0 * w1 / dt).exp();
                    level[j] = w1;
                    let ruin = (-4.0 * c * (next_u + q) * w1).exp();
                    if ruin < 1e-7 {
                        bias[j] = weight[j] * ruin;
                        weight[j] *= 1.0 - ruin;
                        return false;
                    }
                    true
                });
                u = next_u;
            }
            (weight, bias)
        })
        .collect();
    let n = paths as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let mean = per_path.iter().map(|p| p.0[j]).sum::<f64>() / n;
            let sq = per_path.iter().map(|p| p.0[j] * p.0[j]).sum::<f64>() / n;
            let bias = per_path.iter().map(|p| p.1[j]).sum::<f64>() / n;
            OracleEstimate {
                x,
                estimate: mean,
                std_error: ((sq - mean * mean).max(0.0) / n).sqrt(),
                truncation_bias_bound: bias,
            }
        })
        .collect())
}

/// Single-point form of [`f1_mc_oracle_grid`].
pub fn f1_mc_oracle(x: f64, q: f64, lc: &LimitConstants, seed: u64, paths: u64, dt: f64) -> Result<OracleEstimate> {
    Ok(f1_mc_oracle_grid(&[x], q, lc, seed, paths, dt)?[0])
}

/// CDF `1 - exp(-x^2/2)` of the Brownian meander at time 1.
pub fn meander_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-0.5 * x * x).exp_m1()
    }
}

/// Inverse-transform draw from the meander endpoint law.
pub fn meander_sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    (-2.0 * u.ln()).sqrt()
}

/// Mean of the meander endpoint, `sqrt(pi/2)`.
pub fn meander_mean() -> f64 {
    (PI / 2.0).sqrt()
}

/// `E[F1(M, q)] / sqrt(q)` for a meander endpoint `M`, by quadrature against
/// the density `x exp(-x^2/2)`. Tends to [`c_f1lim`] as `q -> 0`.
pub fn meander_f1_slope(q: f64, lc: &LimitConstants) -> Result<f64> {
    let failure = std::cell::RefCell::new(None);
    let integrand = |x: f64| match f1_series(x, q, lc) {
        Ok(v) => x * (-0.5 * x * x).exp() * v.value,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let value = integrate(integrand, 0.0, 12.0, 1e-9, 1e-8).value;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value / q.sqrt()),
    }
}

/// Taylor coefficients of `Ai'(w)/Ai(w)` at `w = 0`.
fn log_derivative_coefficients(len: usize) -> Vec<f64> {
    let a = airy::taylor_coefficients(0.0, airy::AI0, airy::AIP0, len + 1);
    let da: Vec<f64> = (0..len).map(|j| (j + 1) as f64 * a[j + 1]).collect();
    series_divide(&da, &a[..len])
}

/// `sum_k (F2(z_k, 0) + 1/z_k)`, with `zeros` explicit remainder terms.
pub fn zero_sum(lc: &LimitConstants, zeros: usize) -> Result<SeriesValue> {
    let d = moment_coefficients(0.0, SUBTRACTED + 4);
    let (kept, next) = d.split_at(SUBTRACTED + 1);
    // sum_k y_k^{-(j+1)} = (-1)^j l_j for j >= 1.
    let ell = log_derivative_coefficients(SUBTRACTED + 1);
    let mut total: f64 = (1..=SUBTRACTED)
        .map(|j| kept[j] * if j % 2 == 0 { ell[j] } else { -ell[j] })
        .sum();
    let table = airy::table(zeros)?;
    for &z in &table.zeros[..zeros] {
        let y = -z;
        total += f2(z, 0.0, lc)? - asymptotic_part(kept, y);
    }
    let y_last = -table.zeros[zeros - 1];
    // R_k = 1 here, so drop the Ai/Ai' envelope.
    let coef: f64 = next.iter().enumerate().map(|(i, dj)| dj.abs() / y_last.powi(i as i32)).sum();
    let e = 2.0 * (SUBTRACTED + 2) as f64 / 3.0;
    let tail = 2.0 * coef * (1.5 * PI).powf(-e) * (zeros as f64 - 0.25).powf(1.0 - e) / (e - 1.0);
    Ok(SeriesValue { value: total, truncation_bound: tail, terms: zeros })
}

/// `-C' (Ai'(0)/Ai(0) + sum_k (F2(z_k, 0) + 1/z_k)) sqrt(pi/2)`.
pub fn c_f1lim(lc: &LimitConstants, zeros: usize) -> Result<SeriesValue> {
    if lc.delta <= 0.0 {
        return Err(Error::InvalidParameter("the slope constant needs delta > 0".into()));
    }
    if zeros == 0 {
        return Err(Error::InvalidParameter("need at least one zero".into()));
    }
    let s = zero_sum(lc, zeros)?;
    let scale = lc.c_prime * (PI / 2.0).sqrt();
    Ok(SeriesValue {
        value: -scale * (airy::AIP0 / airy::AI0 + s.value),
        truncation_bound: scale * s.truncation_bound,
        terms: zeros,
    })
}

/// `(pi sigma^2 (1 + rho/lambda) / (2 m1))^{-1/2}`, the small-`q` limit of
/// `sqrt(q) n^{1/3} P(walk survives)`.
pub fn walk_limit_factor(sigma_sq: f64, rate_ratio: f64, m1: f64) -> f64 {
    (PI * sigma_sq * (1.0 + rate_ratio) / (2.0 * m1)).powf(-0.5)
}

/// Limit of `n^{1/3} P(major outbreak)`.
pub fn c_main(lc: &LimitConstants) -> Result<f64> {
    let slope = if lc.c_f1lim > 0.0 { lc.c_f1lim } else { c_f1lim(lc, 60)?.value };
    Ok(walk_limit_factor(lc.sigma * lc.sigma, lc.rate_ratio, lc.m1) * slope)
}

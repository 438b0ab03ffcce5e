//! The Airy function `Ai`, its derivative and its negative zeros.
//!
//! Evaluation is piecewise: Taylor series of `y'' = x y` about cached nodes
//! on `[-10, 2]`, a trapezoid rule for the Macdonald-function representation
//! on `(2, 8]`, and the classical asymptotic expansions beyond.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AI0: f64 = 0.355_028_053_887_817_24;
pub const AIP0: f64 = -0.258_819_403_792_806_8;

/// Most negative argument accepted.
pub const MIN_ARG: f64 = -1.0e4;

const NODE_STEP: f64 = 0.5;
const NODE_LOW: f64 = -10.0;

/// Sums the Taylor series of the solution of `y'' = x y` through
/// `(x0, y0, dy0)` at `x0 + h`.
pub(crate) fn taylor_step(x0: f64, y0: f64, dy0: f64, h: f64) -> (f64, f64) {
    // a_{j+2} = (x0 a_j + a_{j-1}) / ((j+2)(j+1))
    let (mut am1, mut a0, mut a1) = (0.0, y0, dy0);
    let mut y = y0 + dy0 * h;
    let mut dy = dy0;
    let mut hp = h; // h^(j+1) for the next a_{j+2} term: starts with h^1
    let scale = y0.abs() + dy0.abs() + 1e-300;
    let mut quiet = 0;
    for j in 0..400 {
        let a2 = (x0 * a0 + am1) / (((j + 2) * (j + 1)) as f64);
        let dterm = (j + 2) as f64 * a2 * hp;
        hp *= h;
        let term = a2 * hp;
        y += term;
        dy += dterm;
        if term.abs().max(dterm.abs()) < 1e-18 * scale {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        am1 = a0;
        a0 = a1;
        a1 = a2;
    }
    (y, dy)
}

/// Taylor coefficients `a_0..a_{len-1}` of the solution through
/// `(x0, y0, dy0)` in powers of `x - x0`.
pub(crate) fn taylor_coefficients(x0: f64, y0: f64, dy0: f64, len: usize) -> Vec<f64> {
    let mut a = vec![0.0; len.max(2)];
    a[0] = y0;
    a[1] = dy0;
    for j in 0..len.saturating_sub(2) {
        let prev = if j == 0 { 0.0 } else { a[j - 1] };
        a[j + 2] = (x0 * a[j] + prev) / (((j + 2) * (j + 1)) as f64);
    }
    a.truncate(len);
    a
}

fn nodes() -> &'static [(f64, f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let count = (-NODE_LOW / NODE_STEP).round() as usize;
        let mut out = Vec::with_capacity(count + 1);
        let (mut y, mut dy) = (AI0, AIP0);
        out.push((0.0, y, dy));
        for m in 1..=count {
            let x0 = -((m - 1) as f64) * NODE_STEP;
            (y, dy) = taylor_step(x0, y, dy, -NODE_STEP);
            out.push((-(m as f64) * NODE_STEP, y, dy));
        }
        out
    })
}

fn from_nodes(x: f64) -> (f64, f64) {
    let table = nodes();
    let m = if x >= 0.0 { 0 } else { ((-x / NODE_STEP).round() as usize).min(table.len() - 1) };
    let (x0, y0, dy0) = table[m];
    taylor_step(x0, y0, dy0, x - x0)
}

/// `e^{z} K_nu(z)` by the trapezoid rule on `int_0^inf e^{-z(cosh t - 1)} cosh(nu t) dt`.
fn scaled_bessel_k(nu: f64, z: f64) -> f64 {
    let h = 0.05;
    let t_max = (1.0 + 45.0 / z).acosh();
    let mut sum = 0.5;
    let mut t = h;
    while t <= t_max + h {
        sum += (-z * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
        t += h;
    }
    sum * h
}

fn zeta(x: f64) -> f64 {
    2.0 / 3.0 * x.abs().powf(1.5)
}

/// Coefficients `u_k` of the asymptotic expansions.
fn u_coefficients() -> &'static [f64] {
    static U: OnceLock<Vec<f64>> = OnceLock::new();
    U.get_or_init(|| {
        let mut u = vec![1.0];
        for k in 1..80usize {
            let kf = k as f64;
            let next = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
                / ((2.0 * kf - 1.0) * 216.0 * kf);
            u.push(next);
        }
        u
    })
}

fn v_coefficient(k: usize) -> f64 {
    let kf = k as f64;
    -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u_coefficients()[k]
}

/// Sums `sum_k sign_k c_k / z^k` with optimal truncation.
fn asymptotic_sum<F: Fn(usize) -> f64>(coef: F, z: f64, alternating: bool, parity: Option<usize>) -> f64 {
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let mut idx = 0;
    for k in 0..79 {
        if let Some(p) = parity {
            if k % 2 != p {
                continue;
            }
        }
        let sign = if alternating && (idx % 2 == 1) { -1.0 } else { 1.0 };
        let term = sign * coef(k) / z.powi(k as i32);
        if term.abs() > last {
            break;
        }
        sum += term;
        last = term.abs();
        idx += 1;
        if last < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `(Ai(x) e^{zeta}, Ai'(x) e^{zeta})` for `x >= 0`, `zeta = (2/3) x^{3/2}`.
pub fn airy_scaled(x: f64) -> (f64, f64) {
    assert!(x >= 0.0, "scaled Airy needs x >= 0");
    let z = zeta(x);
    if x <= 2.0 {
        let (y, dy) = from_nodes(x);
        let f = z.exp();
        (y * f, dy * f)
    } else if x <= 8.0 {
        let ai = (x / 3.0).sqrt() / PI * scaled_bessel_k(1.0 / 3.0, z);
        let aip = -x / (PI * 3f64.sqrt()) * scaled_bessel_k(2.0 / 3.0, z);
        (ai, aip)
    } else {
        let u = u_coefficients();
        let s_ai = asymptotic_sum(|k| u[k], z, true, None);
        let s_aip = asymptotic_sum(v_coefficient, z, true, None);
        let c = 0.5 / PI.sqrt();
        (c * x.powf(-0.25) * s_ai, -c * x.powf(0.25) * s_aip)
    }
}

/// `(Ai(x), Ai'(x))`.
pub fn airy(x: f64) -> Result<(f64, f64)> {
    if !(x >= MIN_ARG) || x.is_nan() {
        return Err(Error::OutOfRange(x));
    }
    if x > 2.0 {
        let (a, b) = airy_scaled(x);
        let f = (-zeta(x)).exp();
        return Ok((a * f, b * f));
    }
    if x >= NODE_LOW {
        return Ok(from_nodes(x));
    }
    let z = -x;
    let zt = zeta(z);
    let u = u_coefficients();
    let (s, c) = (zt - PI / 4.0).sin_cos();
    let p = asymptotic_sum(|k| u[k], zt, true, Some(0));
    let q = asymptotic_sum(|k| u[k], zt, true, Some(1));
    let r = asymptotic_sum(v_coefficient, zt, true, Some(0));
    let t = asymptotic_sum(v_coefficient, zt, true, Some(1));
    let norm = 1.0 / PI.sqrt();
    let ai = norm * z.powf(-0.25) * (c * p + s * q);
    let aip = norm * z.powf(0.25) * (s * r - c * t);
    Ok((ai, aip))
}

pub fn airy_ai(x: f64) -> Result<f64> {
    airy(x).map(|v| v.0)
}

pub fn airy_ai_prime(x: f64) -> Result<f64> {
    airy(x).map(|v| v.1)
}

/// Asymptotic location of the `k`-th zero (1-based).
pub fn zero_guess(k: usize) -> f64 {
    let t = 3.0 * PI * (4.0 * k as f64 - 1.0) / 8.0;
    let t2 = t.powi(-2);
    -t.powf(2.0 / 3.0) * (1.0 + t2 * (5.0 / 48.0 + t2 * (-5.0 / 36.0 + t2 * 77125.0 / 82944.0)))
}

/// Negative zeros `z_1 > z_2 > ...` with `Ai'(z_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiryTable {
    pub zeros: Vec<f64>,
    pub derivatives: Vec<f64>,
}

impl AiryTable {
    pub fn new(count: usize) -> Result<Self> {
        let mut zeros = Vec::with_capacity(count);
        let mut derivatives = Vec::with_capacity(count);
        for k in 1..=count {
            let mut z = zero_guess(k);
            let mut done = false;
            for _ in 0..50 {
                let (a, b) = airy(z)?;
                let step = a / b;
                z -= step;
                if step.abs() <= 1e-15 * z.abs() {
                    done = true;
                    break;
                }
            }
            let (a, b) = airy(z)?;
            if !done || a.abs() > 1e-12 {
                return Err(Error::ConvergenceFailure(format!("Airy zero {k}: residual {a:e}")));
            }
            zeros.push(z);
            derivatives.push(b);
        }
        Ok(Self { zeros, derivatives })
    }
}

/// The first `count` zeros of `Ai`.
pub fn airy_zeros(count: usize) -> Result<Vec<f64>> {
    Ok(AiryTable::new(count)?.zeros)
}

/// Cached table large enough for the series evaluations.
pub(crate) fn table(count: usize) -> Result<&'static AiryTable> {
    static TABLE: OnceLock<AiryTable> = OnceLock::new();
    const CACHED: usize = 400;
    if count > CACHED {
        return Err(Error::OutOfRange(count as f64));
    }
    if let Some(t) = TABLE.get() {
        return Ok(t);
    }
    let t = AiryTable::new(CACHED)?;
    Ok(TABLE.get_or_init(|| t))
}

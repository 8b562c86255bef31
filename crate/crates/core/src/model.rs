//! Closed-form quantities: thresholds, giant-component fixed points, Chernoff
//! tails and the constant system of the bounded degree lemma.

use serde::{Deserialize, Serialize};

use crate::combinat::{binom, binom_f64, factorial};
use crate::error::{invalid, Error, Result};

fn check_nkj(n: u64, k: u32, j: u32) -> Result<()> {
    if !(1 <= j && j < k && u64::from(k) <= n) {
        return Err(invalid(format!(
            "need 1 <= j < k <= n, got n={n}, k={k}, j={j}"
        )));
    }
    Ok(())
}

/// Problem parameters with the edge probability resolved from either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u64,
    pub k: u32,
    pub j: u32,
    /// Signed supercriticality: `p = (1 + eps) * p_kj`.
    pub eps: f64,
    pub p: f64,
}

impl ModelParams {
    pub fn from_eps(n: u64, k: u32, j: u32, eps: f64) -> Result<Self> {
        let p = threshold_p(n, k, j)?.value * (1.0 + eps);
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("eps={eps} gives p={p} outside [0, 1]")));
        }
        Ok(Self { n, k, j, eps, p })
    }

    pub fn from_p(n: u64, k: u32, j: u32, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("p={p} outside [0, 1]")));
        }
        let eps = p / threshold_p(n, k, j)?.value - 1.0;
        Ok(Self { n, k, j, eps, p })
    }
}

/// The critical edge probability `p_kj = (k-j)! n^(j-k) / (binom(k,j) - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    /// `(k-j)!`
    pub numerator: u64,
    /// `binom(k,j) - 1`
    pub denominator: u64,
}

pub fn threshold_p(n: u64, k: u32, j: u32) -> Result<Threshold> {
    check_nkj(n, k, j)?;
    let numerator = factorial(u64::from(k - j))?;
    let denominator = binom(u64::from(k), u64::from(j))? - 1;
    let value = numerator as f64 * (n as f64).powi(j as i32 - k as i32) / denominator as f64;
    Ok(Threshold {
        value,
        numerator,
        denominator,
    })
}

/// Graph critical window `p = 1/n + lambda / n^(4/3)`, clamped to `[0, 1]`.
/// The flag reports whether clamping occurred.
pub fn critical_window_p(n: u64, lambda: f64) -> Result<(f64, bool)> {
    if n < 2 {
        return Err(invalid(format!("critical window needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let p = 1.0 / nf + lambda / nf.powf(4.0 / 3.0);
    let clamped = p.clamp(0.0, 1.0);
    Ok((clamped, clamped != p))
}

fn giant_gap(c: f64, k: u32, rho: f64) -> f64 {
    1.0 - rho - (c * ((1.0 - rho).powi(k as i32 - 1) - 1.0)).exp()
}

/// Root `rho` of `1 - rho = exp(c((1 - rho)^(k-1) - 1))` in `(0, 1)`, or 0
/// when `c <= 1/(k-1)`. Found by bisection to absolute tolerance 1e-12.
pub fn giant_fraction(c: f64, k: u32) -> Result<f64> {
    if c.is_nan() || c <= 0.0 || k < 2 {
        return Err(invalid(format!("giant_fraction needs c > 0 and k >= 2, got c={c}, k={k}")));
    }
    if c * f64::from(k - 1) <= 1.0 {
        return Ok(0.0);
    }
    // g(0) = 0 and g'(0) = c(k-1) - 1 > 0, g(1) = -exp(-c) < 0: find a
    // positive left bracket.
    let mut lo = 0.5;
    while giant_gap(c, k, lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            // Numerically at the critical point.
            return Ok(0.0);
        }
    }
    let mut hi = 1.0;
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if giant_gap(c, k, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric(format!("bisection for c={c}, k={k} did not converge")))
}

/// Upper tail bound `P[X >= tp + a] <= exp(-a^2 / (2(tp + a/3)))`.
pub fn chernoff_upper(t: f64, p: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    (-a * a / (2.0 * (t * p + a / 3.0))).exp()
}

/// Lower tail bound `P[X <= tp - a] <= exp(-a^2 / (2tp))`.
pub fn chernoff_lower(t: f64, p: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    let tp = t * p;
    if tp == 0.0 {
        return 0.0;
    }
    (-a * a / (2.0 * tp)).exp()
}

pub fn check_chernoff_args(t: f64, p: f64, a: f64) -> Result<()> {
    if t.is_nan() || t < 1.0 || !(0.0..=1.0).contains(&p) || a.is_nan() || a < 0.0 {
        return Err(invalid(format!("chernoff needs t >= 1, 0 <= p <= 1, a >= 0; got t={t}, p={p}, a={a}")));
    }
    Ok(())
}

/// Constants of the bounded degree lemma for a given `(k, j, eps)`.
///
/// Lists indexed by `l` start at `l = 1` for `c_ell` and at `l = 0` for
/// `c_hat`, `c_star` and `c_main`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdlConstants {
    pub k: u32,
    pub j: u32,
    pub eps: f64,
    pub c_ell: Vec<f64>,
    /// `None` when `j = 1` (no `c_1` exists).
    pub c_dagger: Option<f64>,
    pub c_hat: Vec<f64>,
    pub c_star: Vec<f64>,
    pub c_main: Vec<f64>,
    pub c_final: f64,
    pub alpha_max: f64,
}

pub fn bdl_constants(k: u32, j: u32, eps: f64) -> Result<BdlConstants> {
    if !(1 <= j && j < k) {
        return Err(invalid(format!("need 1 <= j < k, got k={k}, j={j}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("need 0 < eps < 1, got {eps}")));
    }
    let (kk, jj) = (u64::from(k), u64::from(j));
    let big = binom_f64(kk, jj) - 1.0;
    let fact = |m: u64| factorial(m).map(|v| v as f64);
    let k_fact = fact(kk)?;
    let j_fact = fact(jj)?;
    let kj_fact = fact(kk - jj)?;

    let c_ell: Vec<f64> = (1..jj)
        .map(|l| 0.5 + 0.5 * (binom_f64(kk - l, jj - l) - 1.0) / big)
        .collect();
    let c_dagger = c_ell.first().map(|c1| 256.0 / (1.0 - c1).powi(4));

    let mut c_hat = vec![2.0];
    let mut c_star = vec![2.0];
    let mut c_main: Vec<f64> = Vec::with_capacity(j as usize);
    let mut prev = 0.0;
    for l in 0..jj {
        let starts = 8.0 * j_fact * kj_fact / fact(jj - l)?;
        let c = (c_hat[l as usize] + c_star[l as usize] + starts).max(prev);
        c_main.push(c);
        prev = c;
        if l + 1 < jj {
            let hat = (2f64.powi(l as i32 + 2) * kj_fact * c / big).max(8.0);
            let dagger = c_dagger.expect("c_dagger exists whenever j >= 2");
            c_hat.push(hat);
            c_star.push(2.0 * k_fact * hat * dagger);
        }
    }
    let c_final = c_main.iter().copied().fold(f64::MIN, f64::max);
    let alpha_max = eps / (32.0 * k_fact * 2f64.powi(j as i32) * c_final);
    Ok(BdlConstants {
        k,
        j,
        eps,
        c_ell,
        c_dagger,
        c_hat,
        c_star,
        c_main,
        c_final,
        alpha_max,
    })
}

//! Galton-Watson processes with clustered binomial offspring.
//!
//! Each individual makes `m` independent trials with success probability
//! `q`, and every success yields `r` children. With `r = binom(k,j) - 1` and
//! `m = binom(n-j, k-j)` this is the heuristic comparison process for the
//! exploration of j-tuple components.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinat::binom;
use crate::error::{invalid, Error, Result};
use crate::rng::{self, derive_seed, Generator, Stream};

/// Population cap used when none is given.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Width of the confidence radii, in standard errors.
pub const RADIUS_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffspringLaw {
    pub r: u64,
    pub m: u64,
    pub q: f64,
}

impl OffspringLaw {
    pub fn new(r: u64, m: u64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(invalid(format!("q={q} outside [0, 1]")));
        }
        Ok(Self { r, m, q })
    }

    /// `r = binom(k,j) - 1`, `m = binom(n-j, k-j)`.
    pub fn for_exploration(n: u64, k: u32, j: u32, p: f64) -> Result<Self> {
        if !(1 <= j && j < k && u64::from(k) <= n) {
            return Err(invalid(format!("need 1 <= j < k <= n, got n={n}, k={k}, j={j}")));
        }
        let r = binom(u64::from(k), u64::from(j))? - 1;
        let m = binom(n - u64::from(j), u64::from(k - j))?;
        Self::new(r, m, p)
    }

    /// `r = binom(k-l, j-l) - 1`, `m = binom(n, k-j)`.
    pub fn for_ell(n: u64, k: u32, j: u32, ell: u32, p: f64) -> Result<Self> {
        if !(ell < j && j < k && u64::from(k) <= n) {
            return Err(invalid(format!("need l < j < k <= n, got n={n}, k={k}, j={j}, l={ell}")));
        }
        let r = binom(u64::from(k - ell), u64::from(j - ell))? - 1;
        let m = binom(n, u64::from(k - j))?;
        Self::new(r, m, p)
    }

    pub fn mean(&self) -> f64 {
        self.r as f64 * self.m as f64 * self.q
    }

    pub fn is_subcritical(&self) -> bool {
        self.mean() < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchingOutcome {
    /// Total population including the root, at most the cap.
    pub tau: u64,
    pub capped: bool,
    /// Depth of the deepest non-empty generation (the root alone gives 0).
    pub generations: u64,
}

fn successes(rng: &mut Generator, m: u64, g: u64, q: f64) -> u64 {
    // Binomial(m, q) summed over g individuals is Binomial(m g, q).
    match m.checked_mul(g) {
        Some(trials) => rng::binomial(rng, trials, q),
        None => (0..g).map(|_| rng::binomial(rng, m, q)).sum(),
    }
}

fn simulate_with(law: &OffspringLaw, cap: u64, rng: &mut Generator) -> BranchingOutcome {
    let mut tau = 1u64;
    let mut generation = 1u64;
    let mut depth = 0u64;
    loop {
        if tau >= cap {
            return BranchingOutcome {
                tau: cap,
                capped: true,
                generations: depth,
            };
        }
        let children = law.r.saturating_mul(successes(rng, law.m, generation, law.q));
        if children == 0 {
            return BranchingOutcome {
                tau,
                capped: false,
                generations: depth,
            };
        }
        depth += 1;
        tau = tau.saturating_add(children);
        generation = children;
    }
}

/// One process from a single root, simulated generation by generation until
/// extinction or until the population reaches `cap`.
pub fn simulate_total(law: &OffspringLaw, cap: u64, seed: u64) -> Result<BranchingOutcome> {
    if cap == 0 {
        return Err(invalid("cap must be at least 1"));
    }
    let mut g = rng::generator(seed, Stream::Branching);
    Ok(simulate_with(law, cap, &mut g))
}

/// `runs` processes with seeds `derive_seed(seed, i)`, in run order.
pub fn simulate_many(law: &OffspringLaw, cap: u64, runs: u64, seed: u64) -> Result<Vec<(u64, BranchingOutcome)>> {
    if cap == 0 {
        return Err(invalid("cap must be at least 1"));
    }
    Ok((0..runs)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i);
            (s, simulate_total(law, cap, s).expect("cap checked"))
        })
        .collect())
}

/// CSV `seed,tau,capped,generations`.
pub fn outcomes_csv(rows: &[(u64, BranchingOutcome)]) -> String {
    let mut out = String::from("seed,tau,capped,generations\n");
    for (s, o) in rows {
        let _ = writeln!(out, "{s},{},{},{}", o.tau, o.capped, o.generations);
    }
    out
}

/// Normal-approximation radius `z sqrt(f(1-f)/runs)` for a proportion.
pub fn proportion_radius(f: f64, runs: u64) -> f64 {
    RADIUS_Z * (f * (1.0 - f) / runs as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    /// Fraction of runs that reached the cap.
    pub fraction: f64,
    pub radius: f64,
    pub runs: u64,
}

pub fn survival_estimate(law: &OffspringLaw, cap: u64, runs: u64, seed: u64) -> Result<SurvivalEstimate> {
    if runs == 0 {
        return Err(invalid("runs must be at least 1"));
    }
    let capped = simulate_many(law, cap, runs, seed)?
        .iter()
        .filter(|(_, o)| o.capped)
        .count();
    let fraction = capped as f64 / runs as f64;
    Ok(SurvivalEstimate {
        fraction,
        radius: proportion_radius(fraction, runs),
        runs,
    })
}

/// Offspring generating function `((1-q) + q s^r)^m`.
fn pgf(law: &OffspringLaw, s: f64) -> f64 {
    let x = law.q * (1.0 - s.powf(law.r as f64));
    (law.m as f64 * (-x).ln_1p()).exp()
}

/// Survival probability `1 - sigma`, where `sigma` is the smallest fixed
/// point of the offspring generating function, found by monotone iteration
/// from 0.
pub fn pgf_survival(law: &OffspringLaw, tol: f64) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("tol={tol} must be positive")));
    }
    if law.r == 0 || law.m == 0 || law.q == 0.0 {
        return Ok(0.0);
    }
    if law.q >= 1.0 {
        return Ok(1.0);
    }
    if law.mean() <= 1.0 {
        return Ok(0.0);
    }
    let mut s = 0.0f64;
    let mut prev_step = f64::INFINITY;
    for _ in 0..10_000_000u32 {
        let next = pgf(law, s);
        let step = next - s;
        s = next;
        if step <= 0.0 {
            break;
        }
        // Steps shrink geometrically near the fixed point, with ratio rising
        // towards f'(sigma); step / (1 - rho) bounds the remaining distance
        // once rho has settled.
        let rho = step / prev_step;
        prev_step = step;
        if rho < 1.0 && step / (1.0 - rho) < tol {
            break;
        }
    }
    if !s.is_finite() {
        return Err(Error::Numeric(format!("fixed-point iteration diverged for {law:?}")));
    }
    Ok(1.0 - s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    /// Estimate of `P(tau(r Bin(m,q)) <= r s)`.
    pub lhs: f64,
    pub lhs_radius: f64,
    /// Estimate of `P(tau(Bin(r m, q)) <= s)`.
    pub rhs: f64,
    pub rhs_radius: f64,
    pub holds: bool,
}

/// Monte Carlo check of `P(tau(r Bin(m,q)) <= r s) >= P(tau(Bin(r m, q)) <= s)`.
/// Run `i` of both sides uses the seed `derive_seed(seed, i)`.
pub fn domination_check(r: u64, m: u64, q: f64, s: u64, runs: u64, seed: u64) -> Result<DominationReport> {
    if r == 0 || m == 0 || runs == 0 {
        return Err(invalid("r, m and runs must be at least 1"));
    }
    if q * r as f64 > 1.0 {
        return Err(Error::Precondition(format!("q={q} exceeds 1/r for r={r}")));
    }
    let clustered = OffspringLaw::new(r, m, q)?;
    let plain = OffspringLaw::new(1, r * m, q)?;
    let (l_cap, r_cap) = (r * s + 1, s + 1);
    let (lhs_hits, rhs_hits) = (0..runs)
        .into_par_iter()
        .map(|i| {
            let sd = derive_seed(seed, i);
            let a = simulate_total(&clustered, l_cap, sd).expect("cap >= 1");
            let b = simulate_total(&plain, r_cap, sd).expect("cap >= 1");
            (u64::from(a.tau <= r * s), u64::from(b.tau <= s))
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    let lhs = lhs_hits as f64 / runs as f64;
    let rhs = rhs_hits as f64 / runs as f64;
    let lhs_radius = proportion_radius(lhs, runs);
    let rhs_radius = proportion_radius(rhs, runs);
    Ok(DominationReport {
        lhs,
        lhs_radius,
        rhs,
        rhs_radius,
        holds: lhs + lhs_radius >= rhs - rhs_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{giant_fraction, threshold_p};
    use statrs::distribution::{Binomial, Discrete};

    #[test]
    fn trivial_laws() {
        let none = OffspringLaw::new(3, 10, 0.0).unwrap();
        assert_eq!(simulate_total(&none, 100, 1).unwrap().tau, 1);
        let full = OffspringLaw::new(1, 2, 1.0).unwrap();
        let o = simulate_total(&full, 100, 1).unwrap();
        assert_eq!((o.tau, o.capped), (100, true));
        assert_eq!(survival_estimate(&none, 10, 100, 0).unwrap().fraction, 0.0);
        assert!(OffspringLaw::new(1, 1, 1.5).is_err());
    }

    #[test]
    fn subcritical_mean_size() {
        let law = OffspringLaw::new(1, 10, 0.05).unwrap();
        let rows = simulate_many(&law, DEFAULT_CAP, 100_000, 7).unwrap();
        let taus: Vec<f64> = rows.iter().map(|(_, o)| o.tau as f64).collect();
        let n = taus.len() as f64;
        let mean = taus.iter().sum::<f64>() / n;
        let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 2.0).abs() < 3.0 * (var / n).sqrt(), "mean {mean}");
    }

    #[test]
    fn hitting_time_law() {
        // P(tau = t) = P(S_t = t - 1) / t with S_t = r Bin(t m, q).
        let (r, m, q) = (2u64, 3u64, 0.1);
        let law = OffspringLaw::new(r, m, q).unwrap();
        let runs = 200_000u64;
        let rows = simulate_many(&law, 1_000, runs, 3).unwrap();
        for t in 1..=9u64 {
            let exact = if (t - 1) % r == 0 {
                Binomial::new(q, t * m).unwrap().pmf((t - 1) / r) / t as f64
            } else {
                0.0
            };
            let hits = rows.iter().filter(|(_, o)| o.tau == t).count() as f64 / runs as f64;
            let se = (exact * (1.0 - exact) / runs as f64).sqrt();
            assert!((hits - exact).abs() <= 4.0 * se + 1e-12, "t={t}: {hits} vs {exact}");
        }
    }

    #[test]
    fn pgf_examples() {
        let sub = OffspringLaw::new(1, 100, 0.01).unwrap();
        assert_eq!(pgf_survival(&sub, 1e-12).unwrap(), 0.0);
        let full = OffspringLaw::new(2, 3, 1.0).unwrap();
        assert_eq!(pgf_survival(&full, 1e-12).unwrap(), 1.0);
        let m = 100_000;
        let poisson = OffspringLaw::new(1, m, 2.0 / m as f64).unwrap();
        let s = pgf_survival(&poisson, 1e-12).unwrap();
        assert!((s - giant_fraction(2.0, 2).unwrap()).abs() < 1e-3, "{s}");
        // the survival probability is a fixed point of s -> 1 - f(1 - s)
        let law = OffspringLaw::new(2, 4, 0.3).unwrap();
        let s = pgf_survival(&law, 1e-13).unwrap();
        assert!((1.0 - pgf(&law, 1.0 - s) - s).abs() < 1e-10);
        assert!(pgf_survival(&law, 0.0).is_err());
    }

    #[test]
    fn pgf_monotone_on_grid() {
        for r in 1..4u64 {
            for m in [5u64, 20, 100] {
                let mut last = 0.0;
                for i in 0..=40 {
                    let q = i as f64 / 40.0 / r as f64;
                    let s = pgf_survival(&OffspringLaw::new(r, m, q).unwrap(), 1e-12).unwrap();
                    assert!(s >= last - 1e-9, "r={r} m={m} q={q}");
                    last = s;
                }
            }
        }
    }

    #[test]
    fn pgf_crosses_at_threshold() {
        for (k, j) in [(3u32, 1u32), (3, 2), (4, 2), (4, 3)] {
            let n = 2_000u64;
            let pc = threshold_p(n, k, j).unwrap().value;
            let below = OffspringLaw::for_exploration(n, k, j, pc * 0.98).unwrap();
            let above = OffspringLaw::for_exploration(n, k, j, pc * 1.02).unwrap();
            assert_eq!(pgf_survival(&below, 1e-12).unwrap(), 0.0, "({k},{j})");
            assert!(pgf_survival(&above, 1e-12).unwrap() > 0.0, "({k},{j})");
        }
    }

    #[test]
    fn survival_tracks_pgf() {
        let law = OffspringLaw::new(1, 1_000, 1.2e-3).unwrap();
        let est = survival_estimate(&law, 10_000, 20_000, 5).unwrap();
        let exact = pgf_survival(&law, 1e-12).unwrap();
        assert!((est.fraction - exact).abs() < 0.02, "{} vs {exact}", est.fraction);
    }

    #[test]
    fn domination_cases() {
        let same = domination_check(1, 5, 0.3, 4, 20_000, 9).unwrap();
        assert_eq!(same.lhs, same.rhs);
        assert!(same.holds);
        let zero = domination_check(3, 5, 0.0, 2, 100, 9).unwrap();
        assert_eq!((zero.lhs, zero.rhs), (1.0, 1.0));
        assert!(domination_check(2, 3, 0.2, 5, 100_000, 1).unwrap().holds);
        assert!(matches!(domination_check(3, 3, 0.5, 5, 10, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn csv_layout() {
        let law = OffspringLaw::new(1, 2, 0.5).unwrap();
        let rows = simulate_many(&law, 50, 3, 1).unwrap();
        let csv = outcomes_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("seed,tau,capped,generations\n"));
        assert_eq!(rows, simulate_many(&law, 50, 3, 1).unwrap());
    }
}

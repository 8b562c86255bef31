//! Seeded randomness shared by every module.
//!
//! All randomness comes from ChaCha8 streams keyed by a 64-bit seed. Records
//! carry [`GENERATOR`] so that results are only compared across identical
//! generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

/// Name of the pseudo-random generator, stored in every record.
pub const GENERATOR: &str = "chacha8-rand_chacha-0.9";

/// Independent streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Queries = 0,
    Starts = 1,
    Sampling = 2,
    Branching = 3,
    Auxiliary = 4,
}

pub type Generator = ChaCha8Rng;

pub fn generator(seed: u64, stream: Stream) -> Generator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer. A bijection on `u64`, so
/// `mix64(master ^ index)` is injective in `index`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, run_index: u64) -> u64 {
    mix64(master ^ run_index)
}

/// Uniform in the open interval (0, 1).
pub fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Number of Bernoulli(p) trials up to and including the first success,
/// `ceil(ln U / ln(1 - p))`. `None` means no success ever (p = 0).
pub fn geometric_gap(rng: &mut impl Rng, p: f64) -> Option<u64> {
    if p <= 0.0 {
        return None;
    }
    if p >= 1.0 {
        return Some(1);
    }
    let u = open_unit(rng);
    let g = (u.ln() / (-p).ln_1p()).ceil();
    if g >= u64::MAX as f64 {
        Some(u64::MAX)
    } else {
        Some((g as u64).max(1))
    }
}

/// Exact Binomial(trials, p) draw.
pub fn binomial(rng: &mut impl Rng, trials: u64, p: f64) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    Binomial::new(trials, p)
        .expect("probability checked to lie in (0, 1)")
        .sample(rng)
}

//! Exact binomial arithmetic and colexicographic ranking of vertex subsets.
//!
//! Vertices are `u32` labels `0..n`. An `r`-subset `a_1 < ... < a_r` has colex
//! rank `sum_i binom(a_i, i)` (1-indexed `i`), which is independent of `n`.
//! Colex order is the canonical edge ordering used throughout the crate.

use crate::error::{invalid, Error, Result};

/// Colex rank of an `r`-subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetRank {
    pub rank: u64,
    pub r: u32,
}

/// Exact `binom(a, b)`, or a capacity error when the value exceeds `u64`.
pub fn binom(a: u64, b: u64) -> Result<u64> {
    if b > a {
        return Ok(0);
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for i in 0..b {
        // binom(a, i+1) = binom(a, i) * (a - i) / (i + 1), exact at every step.
        acc = acc * u128::from(a - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return Err(Error::Capacity(format!(
                "binom({a}, {b}) exceeds the 64-bit range"
            )));
        }
    }
    Ok(acc as u64)
}

/// `binom(a, b)` as an `f64`, for formulas that only need a real value.
pub fn binom_f64(a: u64, b: u64) -> f64 {
    if b > a {
        return 0.0;
    }
    let b = b.min(a - b);
    (0..b).fold(1.0, |acc, i| acc * (a - i) as f64 / (i + 1) as f64)
}

pub fn factorial(m: u64) -> Result<u64> {
    (1..=m).try_fold(1u64, |acc, i| {
        acc.checked_mul(i)
            .ok_or_else(|| Error::Capacity(format!("{m}! exceeds the 64-bit range")))
    })
}

/// Cached binomial coefficients `binom(a, b)` for `a <= n_max`, `b <= k_max`.
///
/// Entries beyond the 64-bit range are stored as `u64::MAX`, which compares
/// greater than every valid rank; [`BinomialTable::get`] reports them as
/// capacity errors.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    n_max: u64,
    k_max: u32,
    cells: Vec<u64>,
}

const OVERFLOW: u64 = u64::MAX;

impl BinomialTable {
    pub fn new(n_max: u64, k_max: u32) -> Result<Self> {
        let width = k_max as usize + 1;
        let rows = usize::try_from(n_max)
            .ok()
            .and_then(|n| n.checked_add(1))
            .ok_or_else(|| Error::Capacity(format!("table with {n_max} rows")))?;
        let mut cells = vec![0u64; rows * width];
        for a in 0..rows {
            cells[a * width] = 1;
            for b in 1..width.min(a + 1) {
                let up = cells[(a - 1) * width + b];
                let diag = cells[(a - 1) * width + b - 1];
                cells[a * width + b] = if up == OVERFLOW || diag == OVERFLOW {
                    OVERFLOW
                } else {
                    up.checked_add(diag).unwrap_or(OVERFLOW)
                };
            }
        }
        Ok(Self { n_max, k_max, cells })
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    #[inline]
    fn raw(&self, a: u64, b: u32) -> u64 {
        if b > self.k_max || a > self.n_max {
            return binom(a, u64::from(b)).unwrap_or(OVERFLOW);
        }
        self.cells[a as usize * (self.k_max as usize + 1) + b as usize]
    }

    pub fn get(&self, a: u64, b: u32) -> Result<u64> {
        match self.raw(a, b) {
            OVERFLOW => Err(Error::Capacity(format!(
                "binom({a}, {b}) exceeds the 64-bit range"
            ))),
            v => Ok(v),
        }
    }

    /// Colex rank of a strictly increasing vertex list, without validation.
    #[inline]
    pub fn rank_unchecked(&self, set: &[u32]) -> u64 {
        set.iter()
            .enumerate()
            .map(|(i, &a)| self.raw(u64::from(a), i as u32 + 1))
            .sum()
    }

    /// Writes the `out.len()`-subset with colex rank `rank` into `out`.
    ///
    /// Each position is found by binary search for the largest `a` with
    /// `binom(a, i) <= rank`.
    pub fn unrank_into(&self, mut rank: u64, out: &mut [u32]) {
        let r = out.len();
        let mut hi = self.n_max.max(r as u64);
        for i in (1..=r).rev() {
            let ii = i as u32;
            // binom(i - 1, i) = 0 <= rank, so `lo` is always feasible.
            let mut lo = i as u64 - 1;
            let mut top = hi;
            while self.raw(top, ii) <= rank {
                top = top.saturating_mul(2).max(top + 1);
            }
            while top - lo > 1 {
                let mid = lo + (top - lo) / 2;
                if self.raw(mid, ii) <= rank {
                    lo = mid;
                } else {
                    top = mid;
                }
            }
            out[i - 1] = lo as u32;
            rank -= self.raw(lo, ii);
            hi = lo;
        }
    }

    pub fn unrank(&self, rank: u64, r: u32) -> Vec<u32> {
        let mut out = vec![0; r as usize];
        self.unrank_into(rank, &mut out);
        out
    }
}

fn check_sorted(set: &[u32]) -> Result<()> {
    if set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(format!(
            "subset {set:?} must be strictly increasing without duplicates"
        )));
    }
    Ok(())
}

/// Colex rank of a strictly increasing vertex list.
pub fn rank_colex(set: &[u32]) -> Result<SubsetRank> {
    check_sorted(set)?;
    let mut rank: u64 = 0;
    for (i, &a) in set.iter().enumerate() {
        let term = binom(u64::from(a), i as u64 + 1)?;
        rank = rank
            .checked_add(term)
            .ok_or_else(|| Error::Capacity(format!("rank of {set:?}")))?;
    }
    Ok(SubsetRank {
        rank,
        r: set.len() as u32,
    })
}

/// Inverse of [`rank_colex`].
pub fn unrank_colex(rank: SubsetRank) -> Result<Vec<u32>> {
    let r = u64::from(rank.r);
    let mut remaining = rank.rank;
    let mut out = vec![0u32; rank.r as usize];
    // Exclusive upper bound on the next label.
    let mut bound: u64 = u64::from(u32::MAX) + 1;
    for i in (1..=r).rev() {
        let feasible = |a: u64| binom(a, i).is_ok_and(|v| v <= remaining);
        let mut lo = i - 1;
        let mut top = bound;
        while top - lo > 1 {
            let mid = lo + (top - lo) / 2;
            if feasible(mid) {
                lo = mid;
            } else {
                top = mid;
            }
        }
        out[i as usize - 1] = lo as u32;
        remaining -= binom(lo, i)?;
        bound = lo;
    }
    if remaining != 0 {
        return Err(Error::Capacity(format!(
            "rank {} of an {}-subset exceeds 32-bit vertex labels",
            rank.rank, rank.r
        )));
    }
    Ok(out)
}

/// Sorted union of a sorted base set and a sorted disjoint extension.
fn merge_sorted(base: &[u32], ext: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut e) = (0, 0);
    while i < base.len() || e < ext.len() {
        if e == ext.len() || (i < base.len() && base[i] < ext[e]) {
            out.push(base[i]);
            i += 1;
        } else {
            out.push(ext[e]);
            e += 1;
        }
    }
}

/// Maps complement labels `0..n-|base|` onto `[n] \ base`, order-preserving.
#[inline]
fn lift_complement(base: &[u32], comp: &mut [u32]) {
    for c in comp.iter_mut() {
        let mut v = *c;
        for &a in base {
            if a <= v {
                v += 1;
            } else {
                break;
            }
        }
        *c = v;
    }
}

/// The k-sets containing a fixed j-set, in colex order.
///
/// Position `i` of the stream is the complement `(k-j)`-subset of `[n] \ J`
/// with colex rank `i`. For a fixed `J`, colex order on the complements
/// coincides with colex order on the k-sets themselves.
#[derive(Debug, Clone)]
pub struct Supersets<'a> {
    table: &'a BinomialTable,
    base: Vec<u32>,
    k: u32,
    len: u64,
    cursor: u64,
    comp: Vec<u32>,
}

impl<'a> Supersets<'a> {
    pub fn new(table: &'a BinomialTable, base: &[u32], n: u32, k: u32) -> Result<Self> {
        check_sorted(base)?;
        let j = base.len() as u32;
        if j >= k || k > n {
            return Err(invalid(format!("supersets need |J| < k <= n, got j={j}, k={k}, n={n}")));
        }
        if base.iter().any(|&v| v >= n) {
            return Err(invalid(format!("{base:?} is not a subset of 0..{n}")));
        }
        let len = table.get(u64::from(n - j), k - j)?;
        Ok(Self {
            table,
            base: base.to_vec(),
            k,
            len,
            cursor: 0,
            comp: vec![0; (k - j) as usize],
        })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn position(&self) -> u64 {
        self.cursor
    }

    /// Advances the cursor by `g` positions without materializing them.
    pub fn skip_ahead(&mut self, g: u64) {
        self.cursor = self.cursor.saturating_add(g).min(self.len);
    }

    /// The k-set at stream position `idx`.
    pub fn at(&mut self, idx: u64, out: &mut Vec<u32>) {
        superset_at(self.table, &self.base, idx, &mut self.comp, out);
    }

    pub fn k(&self) -> u32 {
        self.k
    }
}

impl Iterator for Supersets<'_> {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        if self.cursor >= self.len {
            return None;
        }
        let mut out = Vec::with_capacity(self.k as usize);
        let idx = self.cursor;
        self.at(idx, &mut out);
        self.cursor += 1;
        Some(out)
    }
}

/// Writes the k-set at position `idx` of the superset stream of `base` into
/// `out`; `scratch.len()` must equal `k - |base|`.
#[inline]
pub fn superset_at(
    table: &BinomialTable,
    base: &[u32],
    idx: u64,
    scratch: &mut [u32],
    out: &mut Vec<u32>,
) {
    table.unrank_into(idx, scratch);
    lift_complement(base, scratch);
    merge_sorted(base, scratch, out);
}

/// Calls `f` on every `r`-subset of the sorted `set`, in lexicographic
/// order of positions (which is not colex order).
pub fn for_each_subset(set: &[u32], r: usize, mut f: impl FnMut(&[u32])) {
    let m = set.len();
    if r > m {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    let mut buf = vec![0u32; r];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = set[i];
        }
        f(&buf);
        // Rightmost position that can still move right.
        let mut i = r;
        while i > 0 && idx[i - 1] == i - 1 + m - r {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for t in i..r {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// Colex ranks of all `r`-subsets of the sorted `set`, ascending.
pub fn subset_ranks(table: &BinomialTable, set: &[u32], r: usize) -> Vec<u64> {
    let mut ranks = Vec::with_capacity(binom_f64(set.len() as u64, r as u64) as usize);
    for_each_subset(set, r, |s| ranks.push(table.rank_unchecked(s)));
    ranks.sort_unstable();
    ranks
}

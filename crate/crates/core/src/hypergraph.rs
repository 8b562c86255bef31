//! Sampling `H^k(n,p)`, the auxiliary-hypergraph view, the exact j-tuple
//! component oracle, and degree profiles of j-set collections.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combinat::{binom, for_each_subset, subset_ranks, BinomialTable};
use crate::error::{invalid, Error, Result};
use crate::rng::{self, Stream, GENERATOR};

const DENSE_LIMIT: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMethod {
    /// One Bernoulli draw per rank, in rank order.
    Dense,
    /// Exact Binomial edge count, then uniform distinct ranks.
    Sparse,
}

impl std::str::FromStr for SampleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Self::Dense),
            "sparse" => Ok(Self::Sparse),
            other => Err(invalid(format!("unknown sampling method {other:?}"))),
        }
    }
}

/// A k-uniform hypergraph on `0..n`, edges stored as colex ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypergraphSample {
    pub n: u32,
    pub k: u32,
    pub edges: Vec<u64>,
    pub seed: u64,
    pub generator: String,
}

pub fn sample(n: u32, k: u32, p: f64, seed: u64, method: SampleMethod) -> Result<HypergraphSample> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("p={p} outside [0, 1]")));
    }
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let total = binom(u64::from(n), u64::from(k))?;
    let mut rng = rng::generator(seed, Stream::Sampling);
    let edges = match method {
        SampleMethod::Dense => {
            if total > DENSE_LIMIT {
                return Err(Error::Capacity(format!(
                    "dense sampling needs binom(n,k) <= 2^32, got {total}"
                )));
            }
            (0..total).filter(|_| rng.random::<f64>() < p).collect()
        }
        SampleMethod::Sparse => {
            let m = rng::binomial(&mut rng, total, p);
            let mut edges = if m <= total / 2 {
                distinct_uniform(&mut rng, total, m)
            } else {
                if total > DENSE_LIMIT {
                    return Err(Error::Capacity(format!(
                        "sparse sampling of {m} of {total} edges needs a complement over 2^32 ranks"
                    )));
                }
                let excluded: HashSet<u64> = distinct_uniform(&mut rng, total, total - m)
                    .into_iter()
                    .collect();
                (0..total).filter(|r| !excluded.contains(r)).collect()
            };
            edges.sort_unstable();
            edges
        }
    };
    Ok(HypergraphSample {
        n,
        k,
        edges,
        seed,
        generator: GENERATOR.to_string(),
    })
}

/// `m` distinct ranks from `0..total` by rejection; `m <= total / 2`.
fn distinct_uniform(rng: &mut impl Rng, total: u64, m: u64) -> Vec<u64> {
    let mut seen = HashSet::with_capacity(m as usize);
    let mut out = Vec::with_capacity(m as usize);
    while (out.len() as u64) < m {
        let r = rng.random_range(0..total);
        if seen.insert(r) {
            out.push(r);
        }
    }
    out
}

impl HypergraphSample {
    pub fn from_edges(n: u32, k: u32, mut edges: Vec<u64>, seed: u64) -> Self {
        edges.sort_unstable();
        edges.dedup();
        Self {
            n,
            k,
            edges,
            seed,
            generator: GENERATOR.to_string(),
        }
    }

    /// Line-oriented text: header `n k seed generator`, then one edge per line
    /// as increasing 1-indexed vertices.
    pub fn to_text(&self) -> Result<String> {
        let table = BinomialTable::new(u64::from(self.n), self.k)?;
        let mut out = format!("{} {} {} {}\n", self.n, self.k, self.seed, self.generator);
        let mut buf = vec![0u32; self.k as usize];
        for &e in &self.edges {
            table.unrank_into(e, &mut buf);
            let line: Vec<String> = buf.iter().map(|v| (v + 1).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split(' ').collect();
        let bad = |line: usize, message: String| Error::Parse { line, message };
        if fields.len() != 4 {
            return Err(bad(1, format!("header needs `n k seed generator`, got {header:?}")));
        }
        let n: u32 = fields[0].parse().map_err(|e| bad(1, format!("n: {e}")))?;
        let k: u32 = fields[1].parse().map_err(|e| bad(1, format!("k: {e}")))?;
        let seed: u64 = fields[2].parse().map_err(|e| bad(1, format!("seed: {e}")))?;
        if k == 0 || k > n {
            return Err(bad(1, format!("need 1 <= k <= n, got k={k}, n={n}")));
        }
        let table = BinomialTable::new(u64::from(n), k)?;
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines {
            let verts: Vec<u32> = line
                .split(' ')
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(i + 1, format!("{e}")))?;
            if verts.len() != k as usize
                || verts.iter().any(|&v| v == 0 || v > n)
                || verts.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(bad(i + 1, format!("edge {line:?} is not an increasing {k}-subset of 1..={n}")));
            }
            let zero: Vec<u32> = verts.iter().map(|v| v - 1).collect();
            let r = table.rank_unchecked(&zero);
            if !seen.insert(r) {
                return Err(bad(i + 1, format!("duplicate edge {line:?}")));
            }
            edges.push(r);
        }
        Ok(Self {
            n,
            k,
            edges,
            seed,
            generator: fields[3].to_string(),
        })
    }
}

/// `(vertex count, edge count, edge size)` of the auxiliary hypergraph whose
/// vertices are j-sets and whose edges are the j-subset families of k-sets.
pub fn aux_params(n: u32, k: u32, j: u32) -> Result<(u64, u64, u64)> {
    if !(1 <= j && j < k && k <= n) {
        return Err(invalid(format!("need 1 <= j < k <= n, got n={n}, k={k}, j={j}")));
    }
    let (n, k, j) = (u64::from(n), u64::from(k), u64::from(j));
    Ok((binom(n, j)?, binom(n, k)?, binom(k, j)?))
}

/// Component labeling of the j-sets covered by at least one edge.
///
/// Component ids are ordered by the smallest j-set rank in each component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JSetPartition {
    pub n: u32,
    pub j: u32,
    /// `(j-set rank, component id)`, sorted by rank.
    pub labels: Vec<(u64, u32)>,
    /// Sizes in j-sets, indexed by component id.
    pub sizes: Vec<u64>,
    /// j-sets in no edge; each is an implicit singleton.
    pub uncovered: u64,
}

impl JSetPartition {
    /// Builds a normalized partition from arbitrary groups of j-set ranks.
    pub fn from_groups(n: u32, j: u32, groups: Vec<Vec<u64>>, universe: u64) -> Self {
        let mut groups: Vec<Vec<u64>> = groups.into_iter().filter(|g| !g.is_empty()).collect();
        for g in &mut groups {
            g.sort_unstable();
        }
        groups.sort_unstable_by_key(|g| g[0]);
        let mut labels = Vec::new();
        let mut sizes = Vec::with_capacity(groups.len());
        for (id, g) in groups.iter().enumerate() {
            sizes.push(g.len() as u64);
            labels.extend(g.iter().map(|&r| (r, id as u32)));
        }
        labels.sort_unstable();
        let covered = labels.len() as u64;
        Self {
            n,
            j,
            labels,
            sizes,
            uncovered: universe.saturating_sub(covered),
        }
    }

    pub fn component_of(&self, rank: u64) -> Option<u32> {
        self.labels
            .binary_search_by_key(&rank, |&(r, _)| r)
            .ok()
            .map(|i| self.labels[i].1)
    }

    pub fn num_components(&self) -> usize {
        self.sizes.len()
    }

    /// Largest component in j-sets; 1 when only singletons exist.
    pub fn largest(&self) -> u64 {
        let covered = self.sizes.iter().copied().max().unwrap_or(0);
        if covered == 0 && self.uncovered > 0 {
            1
        } else {
            covered
        }
    }

    pub fn groups(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new(); self.sizes.len()];
        for &(r, id) in &self.labels {
            out[id as usize].push(r);
        }
        out
    }
}

struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSets {
    fn new(len: usize) -> Self {
        Self {
            parent: (0..len as u32).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let up = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = up;
            x = up;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
    }
}

/// Exact j-tuple components by union-find over the j-subsets of each edge.
pub fn components_oracle(sample: &HypergraphSample, j: u32) -> Result<JSetPartition> {
    let k = sample.k;
    if !(1 <= j && j < k) {
        return Err(invalid(format!("need 1 <= j < k, got j={j}, k={k}")));
    }
    let table = BinomialTable::new(u64::from(sample.n), k)?;
    let universe = binom(u64::from(sample.n), u64::from(j))?;
    let mut index: HashMap<u64, u32> = HashMap::new();
    let mut ranks: Vec<u64> = Vec::new();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut kset = vec![0u32; k as usize];
    for &e in &sample.edges {
        table.unrank_into(e, &mut kset);
        let subs = subset_ranks(&table, &kset, j as usize);
        let ids: Vec<u32> = subs
            .iter()
            .map(|&r| {
                *index.entry(r).or_insert_with(|| {
                    ranks.push(r);
                    ranks.len() as u32 - 1
                })
            })
            .collect();
        // A spanning chain suffices.
        pairs.extend(ids.windows(2).map(|w| (w[0], w[1])));
    }
    let mut dsu = DisjointSets::new(ranks.len());
    for (a, b) in pairs {
        dsu.union(a, b);
    }
    let mut groups: HashMap<u32, Vec<u64>> = HashMap::new();
    for (i, &r) in ranks.iter().enumerate() {
        groups.entry(dsu.find(i as u32)).or_default().push(r);
    }
    Ok(JSetPartition::from_groups(
        sample.n,
        j,
        groups.into_values().collect(),
        universe,
    ))
}

/// Maximum l-degrees of a j-set collection, for `0 <= l < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeProfile {
    /// `deltas[l]`; `deltas[0]` is the collection size.
    pub deltas: Vec<u64>,
    /// An l-set attaining `deltas[l]` (smallest rank on ties), 0-indexed.
    pub argmax: Vec<Option<Vec<u32>>>,
}

/// Number of collection members containing each l-set, keyed by l-set rank.
pub fn degree_map(table: &BinomialTable, jsets: &[u64], j: u32, ell: u32) -> HashMap<u64, u64> {
    let mut freq: HashMap<u64, u64> = HashMap::new();
    let mut buf = vec![0u32; j as usize];
    for &r in jsets {
        table.unrank_into(r, &mut buf);
        for_each_subset(&buf, ell as usize, |s| {
            *freq.entry(table.rank_unchecked(s)).or_insert(0) += 1;
        });
    }
    freq
}

pub fn degree_profile(jsets: &[u64], n: u32, j: u32) -> Result<DegreeProfile> {
    if j == 0 || j > n {
        return Err(invalid(format!("need 1 <= j <= n, got j={j}, n={n}")));
    }
    let universe = binom(u64::from(n), u64::from(j))?;
    if let Some(&bad) = jsets.iter().find(|&&r| r >= universe) {
        return Err(invalid(format!("j-set rank {bad} >= binom({n},{j})")));
    }
    let table = BinomialTable::new(u64::from(n), j)?;
    Ok(degree_profile_with(&table, jsets, j))
}

pub(crate) fn degree_profile_with(table: &BinomialTable, jsets: &[u64], j: u32) -> DegreeProfile {
    let mut deltas = vec![jsets.len() as u64];
    let mut argmax = vec![Some(Vec::new())];
    for ell in 1..j {
        let freq = degree_map(table, jsets, j, ell);
        let best = freq
            .iter()
            .map(|(&r, &d)| (d, std::cmp::Reverse(r)))
            .max();
        match best {
            Some((d, std::cmp::Reverse(r))) => {
                deltas.push(d);
                argmax.push(Some(table.unrank(r, ell)));
            }
            None => {
                deltas.push(0);
                argmax.push(None);
            }
        }
    }
    DegreeProfile { deltas, argmax }
}

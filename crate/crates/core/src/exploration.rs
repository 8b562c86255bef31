//! Search processes over the coupled Bernoulli query sequence.
//!
//! The auxiliary hypergraph has the j-sets of `[n]` as vertices and, for each
//! k-set `K`, the edge formed by the j-subsets of `K`. Each search keeps every
//! j-set in one of three states (neutral, active, explored) and queries k-sets
//! from an active j-set `x`:
//!
//! * `Dfs1` / `Bfs1` query the smallest unqueried `K ⊇ x` holding a neutral
//!   j-subset (and, under [`NeutralRule::Prose`], no explored one). Run to
//!   completion they recover the exact j-tuple components and then sweep the
//!   remaining k-sets so every k-set is queried exactly once.
//! * `Dfs2` / `Bfs2` query only k-sets whose other j-subsets are all neutral,
//!   so every success activates `binom(k,j) - 1` j-sets. Components are
//!   partial (lower bounds).
//!
//! Depth-first variants take `x` from the top of the frontier, breadth-first
//! variants from the bottom. New components start at a neutral j-set drawn
//! uniformly at random ([`StartOrder::Random`]) or at the smallest neutral
//! j-set ([`StartOrder::Ascending`]).
//!
//! The exact backend realizes one outcome per query. The skip backend (for
//! `Dfs2`/`Bfs2`) jumps between successes of each j-set's superset stream
//! with geometric gaps; successes on k-sets already seen or no longer
//! eligible are discarded, and the query clock advances by the gaps.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combinat::{binom, for_each_subset, superset_at, BinomialTable};
use crate::error::{invalid, Error, Result};
use crate::hypergraph::{degree_map, degree_profile_with, DegreeProfile, HypergraphSample, JSetPartition};
use crate::rng::{self, Generator, Stream};

/// Largest `binom(n,k)` for which the exact backend keeps a queried-edge bit array.
pub const EXACT_EDGE_LIMIT: u64 = 1 << 32;
/// Largest j-set universe kept in dense arrays.
const DENSE_JSET_LIMIT: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dfs1,
    Dfs2,
    Bfs1,
    Bfs2,
}

impl Algorithm {
    pub fn is_depth_first(self) -> bool {
        matches!(self, Algorithm::Dfs1 | Algorithm::Dfs2)
    }

    /// Algorithm 2 family: every other j-subset of a queried k-set is neutral.
    pub fn neutral_only(self) -> bool {
        matches!(self, Algorithm::Dfs2 | Algorithm::Bfs2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dfs1 => "dfs1",
            Algorithm::Dfs2 => "dfs2",
            Algorithm::Bfs1 => "bfs1",
            Algorithm::Bfs2 => "bfs2",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dfs1" => Ok(Self::Dfs1),
            "dfs2" => Ok(Self::Dfs2),
            "bfs1" => Ok(Self::Bfs1),
            "bfs2" => Ok(Self::Bfs2),
            other => Err(invalid(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Skip,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Skip => "skip",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "skip" => Ok(Self::Skip),
            other => Err(invalid(format!("unknown backend {other:?}"))),
        }
    }
}

/// Eligibility rule for `Dfs1`/`Bfs1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeutralRule {
    /// The k-set holds at least one neutral j-set.
    #[default]
    Pseudocode,
    /// The k-set holds at least one neutral j-set and no explored one.
    Prose,
}

impl std::str::FromStr for NeutralRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudocode" => Ok(Self::Pseudocode),
            "prose" => Ok(Self::Prose),
            other => Err(invalid(format!("unknown neutral rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartOrder {
    /// Uniform neutral j-set, drawn from the seed's start stream.
    #[default]
    Random,
    /// Smallest neutral j-set in colex order.
    Ascending,
}

impl std::str::FromStr for StartOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "ascending" => Ok(Self::Ascending),
            other => Err(invalid(format!("unknown start order {other:?}"))),
        }
    }
}

/// Where query outcomes come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Fresh Bernoulli(p) outcomes from the seed's query stream.
    Bernoulli { p: f64 },
    /// Outcomes consumed in order; running out is an error.
    Bits(Vec<bool>),
    /// Membership in a fixed edge set (sorted ranks).
    Hypergraph(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationConfig {
    pub algorithm: Algorithm,
    pub backend: Backend,
    pub n: u32,
    pub k: u32,
    pub j: u32,
    pub source: Source,
    pub seed: u64,
    /// Halt once this many queries have been consumed.
    pub budget: Option<u64>,
    /// Ascending query counts at which degree profiles are recorded.
    pub checkpoints: Vec<u64>,
    pub neutral_rule: NeutralRule,
    pub start_order: StartOrder,
    pub record_trace: bool,
    /// Keep the final sweep of `Dfs1`/`Bfs1` in the trace.
    pub record_final_sweep: bool,
    /// Maintain the per-l-set event counters.
    pub audit_events: bool,
    /// Keep a copy of the frontier each time it reaches a new maximum.
    pub capture_walk: bool,
}

impl ExplorationConfig {
    pub fn new(algorithm: Algorithm, backend: Backend, n: u32, k: u32, j: u32, source: Source, seed: u64) -> Self {
        Self {
            algorithm,
            backend,
            n,
            k,
            j,
            source,
            seed,
            budget: None,
            checkpoints: Vec::new(),
            neutral_rule: NeutralRule::default(),
            start_order: StartOrder::default(),
            record_trace: true,
            record_final_sweep: true,
            audit_events: false,
            capture_walk: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k, j) = (self.n, self.k, self.j);
        if !(1 <= j && j < k && k <= n) {
            return Err(invalid(format!("need 1 <= j < k <= n, got n={n}, k={k}, j={j}")));
        }
        if self.backend == Backend::Skip {
            if !self.algorithm.neutral_only() {
                return Err(Error::Config(format!(
                    "the skip backend supports dfs2/bfs2 only, not {}",
                    self.algorithm.name()
                )));
            }
            if !matches!(self.source, Source::Bernoulli { .. }) {
                return Err(Error::Config("the skip backend needs a Bernoulli(p) source".into()));
            }
        } else {
            let edges = binom(u64::from(n), u64::from(k))?;
            if edges > EXACT_EDGE_LIMIT {
                return Err(Error::Capacity(format!(
                    "exact backend needs binom(n,k) <= 2^32, got binom({n},{k}) = {edges}; use the skip backend"
                )));
            }
        }
        if let Source::Bernoulli { p } = self.source {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("p={p} outside [0, 1]")));
            }
        }
        if self.checkpoints.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("checkpoints must be ascending"));
        }
        Ok(())
    }
}

/// `ceil(alpha * n^k)`.
pub fn budget_from_alpha(alpha: f64, n: u32, k: u32) -> u64 {
    (alpha * f64::from(n).powi(k as i32)).ceil().max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JStatus {
    Neutral,
    Active,
    Explored,
}

const NEUTRAL: u8 = 0;
const ACTIVE: u8 = 1;
const EXPLORED: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Zero,
    One,
    Accepted,
    Discarded,
}

impl Outcome {
    fn label(self) -> &'static str {
        match self {
            Outcome::Zero => "0",
            Outcome::One => "1",
            Outcome::Accepted => "accepted",
            Outcome::Discarded => "discarded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub t: u64,
    pub rank: u64,
    pub outcome: Outcome,
}

/// Ordered query outcomes (exact backend) or success events (skip backend).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryTrace {
    pub records: Vec<QueryRecord>,
}

impl QueryTrace {
    pub fn is_exact(&self) -> bool {
        self.records
            .iter()
            .all(|r| matches!(r.outcome, Outcome::Zero | Outcome::One))
    }

    /// The 0/1 outcome sequence of an exact trace.
    pub fn bits(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.outcome == Outcome::One).collect()
    }

    /// One `t rank outcome` line per record.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 16);
        for r in &self.records {
            let _ = writeln!(out, "{} {} {}", r.t, r.rank, r.outcome.label());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    NewStart,
    Jump,
    Branching,
    NotApplicable,
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

/// Classifies a success (query from `jset` found `kset`) relative to `lset`.
/// All sets are sorted vertex lists.
pub fn classify_event(jset: &[u32], kset: &[u32], lset: &[u32]) -> EventKind {
    if !is_subset(lset, kset) {
        EventKind::NotApplicable
    } else if is_subset(lset, jset) {
        EventKind::Branching
    } else {
        EventKind::Jump
    }
}

/// Classifies a new start at `jset` relative to `lset`.
pub fn classify_start(jset: &[u32], lset: &[u32]) -> EventKind {
    if is_subset(lset, jset) {
        EventKind::NewStart
    } else {
        EventKind::NotApplicable
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub new_starts: u64,
    pub jumps: u64,
    pub branchings: u64,
}

/// Per-l-set counters of new starts, jumps and branchings, for `1 <= l < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    pub k: u32,
    pub j: u32,
    /// Keyed by `(l, l-set rank)`; untouched l-sets are implicitly zero.
    pub counts: HashMap<(u32, u64), EventCounts>,
}

impl EventLog {
    fn new(k: u32, j: u32) -> Self {
        Self {
            k,
            j,
            counts: HashMap::new(),
        }
    }

    fn record_start(&mut self, table: &BinomialTable, jset: &[u32]) {
        for ell in 1..self.j {
            for_each_subset(jset, ell as usize, |l| {
                self.counts
                    .entry((ell, table.rank_unchecked(l)))
                    .or_default()
                    .new_starts += 1;
            });
        }
    }

    fn record_success(&mut self, table: &BinomialTable, jset: &[u32], kset: &[u32]) {
        for ell in 1..self.j {
            for_each_subset(kset, ell as usize, |l| {
                let c = self.counts.entry((ell, table.rank_unchecked(l))).or_default();
                match classify_event(jset, kset, l) {
                    EventKind::Branching => c.branchings += 1,
                    EventKind::Jump => c.jumps += 1,
                    _ => unreachable!("l-subsets of K always apply"),
                }
            });
        }
    }

    pub fn get(&self, ell: u32, lrank: u64) -> EventCounts {
        self.counts.get(&(ell, lrank)).copied().unwrap_or_default()
    }

    /// `(D1, D2, D3)`: maxima over l-sets of each counter.
    pub fn aggregates(&self, ell: u32) -> (u64, u64, u64) {
        self.counts
            .iter()
            .filter(|((l, _), _)| *l == ell)
            .fold((0, 0, 0), |(a, b, c), (_, e)| {
                (a.max(e.new_starts), b.max(e.jumps), c.max(e.branchings))
            })
    }

    /// Upper bound on the degree of an l-set implied by its counters.
    pub fn degree_bound(&self, ell: u32, lrank: u64) -> u64 {
        let b = binom(u64::from(self.k - ell), u64::from(self.j - ell)).unwrap_or(u64::MAX);
        let c = self.get(ell, lrank);
        c.new_starts + b * c.jumps + (b - 1) * c.branchings
    }

    /// CSV `ell,lset,new_starts,jumps,branchings`, l-sets as 1-indexed
    /// vertices joined by `-`, sorted by `(ell, rank)`.
    pub fn to_csv(&self, table: &BinomialTable) -> String {
        let mut keys: Vec<_> = self.counts.keys().copied().collect();
        keys.sort_unstable();
        let mut out = String::from("ell,lset,new_starts,jumps,branchings\n");
        for (ell, r) in keys {
            let c = self.counts[&(ell, r)];
            let verts: Vec<String> = table.unrank(r, ell).iter().map(|v| (v + 1).to_string()).collect();
            let _ = writeln!(out, "{ell},{},{},{},{}", verts.join("-"), c.new_starts, c.jumps, c.branchings);
        }
        out
    }
}

/// Result of comparing l-degrees against the event-count bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub ell: u32,
    pub checked: u64,
    /// l-sets whose degree exceeds the bound.
    pub violations: u64,
    /// l-sets whose degree is strictly below the bound.
    pub strict: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub profile: DegreeProfile,
    pub growth: Vec<GrowthCheck>,
    pub edges_found: u64,
}

/// Writes checkpoint profiles as CSV `t,ell,delta`.
pub fn checkpoints_csv(checkpoints: &[Checkpoint]) -> String {
    let mut out = String::from("t,ell,delta\n");
    for c in checkpoints {
        for (ell, d) in c.profile.deltas.iter().enumerate() {
            let _ = writeln!(out, "{},{ell},{d}", c.t);
        }
    }
    out
}

/// Frontier order of a depth-first state with adjacency certificates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkReport {
    /// Active j-sets, bottom to top.
    pub walk: Vec<u64>,
    /// Certifying discovered edge for each consecutive pair, if one is known.
    pub certificates: Vec<Option<u64>>,
    /// Indices `i` of pairs `(walk[i], walk[i+1])` without a certificate.
    pub unverifiable: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationSummary {
    /// Successes during the search (the final sweep excluded).
    pub edges_found: u64,
    /// Components with at least two j-sets.
    pub components: u64,
    pub largest_component: u64,
    pub max_frontier: u64,
    /// Query counter at the end, final sweep included.
    pub queries: u64,
    /// True when the search ran out of neutral j-sets before the budget.
    pub completed: bool,
}

#[derive(Debug, Clone)]
pub struct ExplorationResult {
    pub n: u32,
    pub k: u32,
    pub j: u32,
    pub algorithm: Algorithm,
    pub backend: Backend,
    /// j-sets per search loop, in activation order.
    pub components: Vec<Vec<u64>>,
    pub trace: QueryTrace,
    pub events: Option<EventLog>,
    pub checkpoints: Vec<Checkpoint>,
    /// `(t, k-set rank)` of each success during the search.
    pub discovered_edges: Vec<(u64, u64)>,
    /// Present k-sets met by the final sweep.
    pub sweep_edges: Vec<u64>,
    pub summary: ExplorationSummary,
    /// Frontier at its maximum size, if captured.
    pub walk_at_max: Option<WalkReport>,
    pub final_walk: Option<WalkReport>,
}

impl ExplorationResult {
    /// Nontrivial components as a normalized partition; singletons are
    /// folded into the uncovered count.
    pub fn partition(&self) -> Result<JSetPartition> {
        let universe = binom(u64::from(self.n), u64::from(self.j))?;
        let groups = self.components.iter().filter(|g| g.len() >= 2).cloned().collect();
        Ok(JSetPartition::from_groups(self.n, self.j, groups, universe))
    }

    /// All present k-sets seen by the run: successes plus final-sweep ones.
    pub fn hypergraph(&self, seed: u64) -> HypergraphSample {
        let edges = self
            .discovered_edges
            .iter()
            .map(|&(_, r)| r)
            .chain(self.sweep_edges.iter().copied())
            .collect();
        HypergraphSample::from_edges(self.n, self.k, edges, seed)
    }
}

struct JSetStates {
    universe: u64,
    dense: Option<Vec<u8>>,
    sparse: HashMap<u64, u8>,
    // Uniform sampling over neutral j-sets; `None` means rejection sampling.
    pool: Option<(Vec<u64>, Vec<u32>)>,
    neutral: u64,
    asc_ptr: u64,
}

impl JSetStates {
    fn new(universe: u64, order: StartOrder) -> Self {
        let dense = universe <= DENSE_JSET_LIMIT;
        Self {
            universe,
            dense: dense.then(|| vec![NEUTRAL; universe as usize]),
            sparse: HashMap::new(),
            pool: (dense && order == StartOrder::Random)
                .then(|| ((0..universe).collect(), (0..universe as u32).collect())),
            neutral: universe,
            asc_ptr: 0,
        }
    }

    #[inline]
    fn get(&self, r: u64) -> u8 {
        match &self.dense {
            Some(v) => v[r as usize],
            None => self.sparse.get(&r).copied().unwrap_or(NEUTRAL),
        }
    }

    fn set(&mut self, r: u64, s: u8) {
        let old = self.get(r);
        match &mut self.dense {
            Some(v) => v[r as usize] = s,
            None => {
                self.sparse.insert(r, s);
            }
        }
        if old == NEUTRAL && s != NEUTRAL {
            self.neutral -= 1;
            if let Some((members, pos)) = &mut self.pool {
                let i = pos[r as usize] as usize;
                let last = *members.last().expect("pool holds r");
                members.swap_remove(i);
                if last != r {
                    pos[last as usize] = i as u32;
                }
            }
        }
    }

    fn pick_start(&mut self, order: StartOrder, rng: &mut Generator) -> Option<u64> {
        if self.neutral == 0 {
            return None;
        }
        match order {
            StartOrder::Ascending => {
                while self.get(self.asc_ptr) != NEUTRAL {
                    self.asc_ptr += 1;
                }
                Some(self.asc_ptr)
            }
            StartOrder::Random => match &self.pool {
                Some((members, _)) => Some(members[rng.random_range(0..members.len())]),
                None => loop {
                    let r = rng.random_range(0..self.universe);
                    if self.get(r) == NEUTRAL {
                        return Some(r);
                    }
                },
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct FrontierEntry {
    rank: u64,
    cursor: u64,
    parent: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Running,
    /// The budget was reached.
    Halted,
    /// Every j-set is explored.
    Completed,
}

/// A search in progress. [`Explorer::step`] performs one unit of work (a new
/// start, one query or skip landing, or retiring a j-set).
pub struct Explorer {
    cfg: ExplorationConfig,
    table: BinomialTable,
    universe: u64,
    stream_len: u64,
    total_edges: u64,
    states: JSetStates,
    frontier: VecDeque<FrontierEntry>,
    queried: Vec<u64>,
    seen: HashSet<u64>,
    t: u64,
    query_rng: Generator,
    start_rng: Generator,
    bit_pos: usize,
    trace: QueryTrace,
    events: Option<EventLog>,
    pending_checkpoints: VecDeque<u64>,
    checkpoints: Vec<Checkpoint>,
    discovered: Vec<u64>,
    discovered_edges: Vec<(u64, u64)>,
    sweep_edges: Vec<u64>,
    components: Vec<Vec<u64>>,
    max_frontier: u64,
    walk_at_max: Option<WalkReport>,
    status: StepOutcome,
    xset: Vec<u32>,
    kset: Vec<u32>,
    comp: Vec<u32>,
    subs: Vec<u64>,
}

fn fill_subset_ranks(table: &BinomialTable, set: &[u32], r: usize, out: &mut Vec<u64>) {
    out.clear();
    for_each_subset(set, r, |s| out.push(table.rank_unchecked(s)));
    out.sort_unstable();
}

impl Explorer {
    pub fn new(cfg: ExplorationConfig) -> Result<Self> {
        cfg.validate()?;
        let (n, k, j) = (u64::from(cfg.n), cfg.k, cfg.j);
        let table = BinomialTable::new(n, k)?;
        let universe = table.get(n, j)?;
        let stream_len = table.get(n - u64::from(j), k - j)?;
        let total_edges = binom(n, u64::from(k))?;
        let queried = if cfg.backend == Backend::Exact {
            vec![0u64; total_edges.div_ceil(64) as usize]
        } else {
            Vec::new()
        };
        let mut me = Self {
            states: JSetStates::new(universe, cfg.start_order),
            table,
            universe,
            stream_len,
            total_edges,
            frontier: VecDeque::new(),
            queried,
            seen: HashSet::new(),
            t: 0,
            query_rng: rng::generator(cfg.seed, Stream::Queries),
            start_rng: rng::generator(cfg.seed, Stream::Starts),
            bit_pos: 0,
            trace: QueryTrace::default(),
            events: cfg.audit_events.then(|| EventLog::new(cfg.k, cfg.j)),
            pending_checkpoints: cfg.checkpoints.iter().copied().collect(),
            checkpoints: Vec::new(),
            discovered: Vec::new(),
            discovered_edges: Vec::new(),
            sweep_edges: Vec::new(),
            components: Vec::new(),
            max_frontier: 0,
            walk_at_max: None,
            status: StepOutcome::Running,
            xset: vec![0; j as usize],
            kset: Vec::with_capacity(k as usize),
            comp: vec![0; (k - j) as usize],
            subs: Vec::new(),
            cfg,
        };
        me.take_checkpoints_upto(0);
        Ok(me)
    }

    pub fn config(&self) -> &ExplorationConfig {
        &self.cfg
    }

    pub fn queries(&self) -> u64 {
        self.t
    }

    pub fn table(&self) -> &BinomialTable {
        &self.table
    }

    pub fn status_of(&self, jrank: u64) -> JStatus {
        match self.states.get(jrank) {
            NEUTRAL => JStatus::Neutral,
            ACTIVE => JStatus::Active,
            _ => JStatus::Explored,
        }
    }

    /// Active j-sets, bottom to top.
    pub fn frontier(&self) -> Vec<u64> {
        self.frontier.iter().map(|e| e.rank).collect()
    }

    pub fn discovered(&self) -> &[u64] {
        &self.discovered
    }

    pub fn neutral_count(&self) -> u64 {
        self.states.neutral
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    fn is_queried(&self, r: u64) -> bool {
        self.queried[(r / 64) as usize] >> (r % 64) & 1 == 1
    }

    fn mark_queried(&mut self, r: u64) {
        self.queried[(r / 64) as usize] |= 1 << (r % 64);
    }

    fn budget_reached(&self) -> bool {
        self.cfg.budget.is_some_and(|b| self.t >= b)
    }

    fn snapshot(&mut self, t: u64) {
        let j = self.cfg.j;
        let profile = degree_profile_with(&self.table, &self.discovered, j);
        let mut growth = Vec::new();
        if let Some(ev) = &self.events {
            for ell in 1..j {
                let degrees = degree_map(&self.table, &self.discovered, j, ell);
                let mut keys: HashSet<u64> = degrees.keys().copied().collect();
                keys.extend(ev.counts.keys().filter(|(l, _)| *l == ell).map(|&(_, r)| r));
                let mut check = GrowthCheck {
                    ell,
                    checked: keys.len() as u64,
                    violations: 0,
                    strict: 0,
                };
                for r in keys {
                    let d = degrees.get(&r).copied().unwrap_or(0);
                    let bound = ev.degree_bound(ell, r);
                    if d > bound {
                        check.violations += 1;
                    } else if d < bound {
                        check.strict += 1;
                    }
                }
                growth.push(check);
            }
        }
        self.checkpoints.push(Checkpoint {
            t,
            profile,
            growth,
            edges_found: self.discovered_edges.len() as u64,
        });
    }

    /// Records every pending checkpoint `c <= t` against the current state.
    fn take_checkpoints_upto(&mut self, t: u64) {
        while let Some(&c) = self.pending_checkpoints.front() {
            if c > t {
                break;
            }
            self.pending_checkpoints.pop_front();
            self.snapshot(c);
        }
    }

    /// Moves the clock to `new_t`; checkpoints strictly before it see the
    /// state as it was.
    fn advance_clock(&mut self, new_t: u64) {
        if new_t > 0 {
            self.take_checkpoints_upto(new_t - 1);
        }
        self.t = new_t;
    }

    fn draw(&mut self, rank: u64) -> Result<bool> {
        match &self.cfg.source {
            Source::Bernoulli { p } => {
                let p = *p;
                Ok(self.query_rng.random::<f64>() < p)
            }
            Source::Bits(bits) => {
                let b = *bits.get(self.bit_pos).ok_or(Error::Exhausted { consumed: self.t })?;
                self.bit_pos += 1;
                Ok(b)
            }
            Source::Hypergraph(edges) => Ok(edges.binary_search(&rank).is_ok()),
        }
    }

    fn current(&self) -> Option<FrontierEntry> {
        if self.cfg.algorithm.is_depth_first() {
            self.frontier.back().copied()
        } else {
            self.frontier.front().copied()
        }
    }

    fn set_current_cursor(&mut self, cursor: u64) {
        let e = if self.cfg.algorithm.is_depth_first() {
            self.frontier.back_mut()
        } else {
            self.frontier.front_mut()
        };
        e.expect("frontier is non-empty").cursor = cursor;
    }

    fn retire_current(&mut self) {
        let e = if self.cfg.algorithm.is_depth_first() {
            self.frontier.pop_back()
        } else {
            self.frontier.pop_front()
        };
        let e = e.expect("frontier is non-empty");
        self.states.set(e.rank, EXPLORED);
    }

    fn activate(&mut self, r: u64, parent: Option<u64>) {
        self.states.set(r, ACTIVE);
        self.frontier.push_back(FrontierEntry { rank: r, cursor: 0, parent });
        self.discovered.push(r);
        self.components
            .last_mut()
            .expect("a component is open")
            .push(r);
        if self.frontier.len() as u64 > self.max_frontier {
            self.max_frontier = self.frontier.len() as u64;
            if self.cfg.capture_walk && self.cfg.algorithm.is_depth_first() {
                self.walk_at_max = Some(self.walk_report());
            }
        }
    }

    /// Eligibility of `self.kset` when queried from `x`; fills `self.subs`.
    fn eligible(&mut self, x: u64) -> bool {
        fill_subset_ranks(&self.table, &self.kset, self.cfg.j as usize, &mut self.subs);
        let states = &self.states;
        let others = self.subs.iter().filter(|&&r| r != x);
        if self.cfg.algorithm.neutral_only() {
            return others.clone().all(|&r| states.get(r) == NEUTRAL);
        }
        let mut any_neutral = false;
        for &r in &self.subs {
            match states.get(r) {
                NEUTRAL => any_neutral = true,
                EXPLORED if self.cfg.neutral_rule == NeutralRule::Prose => return false,
                _ => {}
            }
        }
        any_neutral
    }

    fn on_success(&mut self, x: u64, krank: u64) {
        self.discovered_edges.push((self.t, krank));
        if let Some(ev) = &mut self.events {
            self.table.unrank_into(x, &mut self.xset);
            ev.record_success(&self.table, &self.xset, &self.kset);
        }
        let subs = std::mem::take(&mut self.subs);
        for &r in &subs {
            if self.states.get(r) == NEUTRAL {
                self.activate(r, Some(krank));
            }
        }
        self.subs = subs;
    }

    fn new_start(&mut self) -> bool {
        let Some(r) = self.states.pick_start(self.cfg.start_order, &mut self.start_rng) else {
            return false;
        };
        self.components.push(Vec::new());
        if let Some(ev) = &mut self.events {
            self.table.unrank_into(r, &mut self.xset);
            ev.record_start(&self.table, &self.xset);
        }
        self.activate(r, None);
        true
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.status != StepOutcome::Running {
            return Ok(self.status);
        }
        if self.budget_reached() {
            self.status = StepOutcome::Halted;
            return Ok(self.status);
        }
        let Some(entry) = self.current() else {
            if !self.new_start() {
                self.status = StepOutcome::Completed;
            }
            return Ok(self.status);
        };
        match self.cfg.backend {
            Backend::Exact => self.step_exact(entry)?,
            Backend::Skip => self.step_skip(entry),
        }
        Ok(self.status)
    }

    fn step_exact(&mut self, entry: FrontierEntry) -> Result<()> {
        let x = entry.rank;
        self.table.unrank_into(x, &mut self.xset);
        let mut c = entry.cursor;
        let mut found = None;
        while c < self.stream_len {
            superset_at(&self.table, &self.xset, c, &mut self.comp, &mut self.kset);
            let krank = self.table.rank_unchecked(&self.kset);
            c += 1;
            if !self.is_queried(krank) && self.eligible(x) {
                found = Some(krank);
                break;
            }
        }
        self.set_current_cursor(c);
        let Some(krank) = found else {
            self.retire_current();
            return Ok(());
        };
        let bit = self.draw(krank)?;
        self.advance_clock(self.t + 1);
        self.mark_queried(krank);
        if self.cfg.record_trace {
            self.trace.records.push(QueryRecord {
                t: self.t,
                rank: krank,
                outcome: if bit { Outcome::One } else { Outcome::Zero },
            });
        }
        if bit {
            self.on_success(x, krank);
        }
        self.take_checkpoints_upto(self.t);
        Ok(())
    }

    fn step_skip(&mut self, entry: FrontierEntry) {
        let p = match self.cfg.source {
            Source::Bernoulli { p } => p,
            _ => unreachable!("validated"),
        };
        let x = entry.rank;
        let remaining = self.stream_len - entry.cursor;
        let gap = rng::geometric_gap(&mut self.query_rng, p).filter(|&g| g <= remaining);
        let Some(gap) = gap else {
            // No further success in this stream: all remaining positions fail.
            let end = self.t.saturating_add(remaining);
            if let Some(b) = self.cfg.budget.filter(|&b| end >= b) {
                self.advance_clock(b);
                self.status = StepOutcome::Halted;
                return;
            }
            self.advance_clock(end);
            self.set_current_cursor(self.stream_len);
            self.retire_current();
            return;
        };
        let landing_t = self.t.saturating_add(gap);
        if let Some(b) = self.cfg.budget.filter(|&b| landing_t > b) {
            self.advance_clock(b);
            self.status = StepOutcome::Halted;
            return;
        }
        self.advance_clock(landing_t);
        let idx = entry.cursor + gap - 1;
        self.set_current_cursor(idx + 1);
        self.table.unrank_into(x, &mut self.xset);
        superset_at(&self.table, &self.xset, idx, &mut self.comp, &mut self.kset);
        let krank = self.table.rank_unchecked(&self.kset);
        let accepted = self.seen.insert(krank) && self.eligible(x);
        if self.cfg.record_trace {
            self.trace.records.push(QueryRecord {
                t: self.t,
                rank: krank,
                outcome: if accepted { Outcome::Accepted } else { Outcome::Discarded },
            });
        }
        if accepted {
            self.on_success(x, krank);
        }
        self.take_checkpoints_upto(self.t);
    }

    /// Queries all remaining k-sets in ascending rank order.
    fn final_sweep(&mut self) -> Result<()> {
        for r in 0..self.total_edges {
            if self.budget_reached() {
                self.status = StepOutcome::Halted;
                return Ok(());
            }
            if self.is_queried(r) {
                continue;
            }
            let bit = self.draw(r)?;
            self.advance_clock(self.t + 1);
            self.mark_queried(r);
            if self.cfg.record_trace && self.cfg.record_final_sweep {
                self.trace.records.push(QueryRecord {
                    t: self.t,
                    rank: r,
                    outcome: if bit { Outcome::One } else { Outcome::Zero },
                });
            }
            if bit {
                self.sweep_edges.push(r);
            }
        }
        Ok(())
    }

    /// The frontier bottom to top, with each consecutive pair certified by
    /// the discovered edge that activated one of its members, when that edge
    /// contains both.
    pub fn walk_report(&self) -> WalkReport {
        let j = self.cfg.j;
        let k = self.cfg.k;
        let mut a = vec![0u32; j as usize];
        let mut b = vec![0u32; j as usize];
        let mut e = vec![0u32; k as usize];
        let entries: Vec<&FrontierEntry> = self.frontier.iter().collect();
        let mut report = WalkReport {
            walk: entries.iter().map(|e| e.rank).collect(),
            ..Default::default()
        };
        for (i, w) in entries.windows(2).enumerate() {
            self.table.unrank_into(w[0].rank, &mut a);
            self.table.unrank_into(w[1].rank, &mut b);
            let cert = [w[1].parent, w[0].parent].into_iter().flatten().find(|&edge| {
                self.table.unrank_into(edge, &mut e);
                is_subset(&a, &e) && is_subset(&b, &e)
            });
            if cert.is_none() {
                report.unverifiable.push(i);
            }
            report.certificates.push(cert);
        }
        report
    }

    /// The active j-sets of a depth-first state as a non-repeating walk.
    pub fn extract_active_walk(&self) -> Result<WalkReport> {
        if !self.cfg.algorithm.is_depth_first() {
            return Err(Error::Unsupported(
                "active walks are defined for depth-first searches only".into(),
            ));
        }
        Ok(self.walk_report())
    }

    pub fn run(mut self) -> Result<ExplorationResult> {
        while self.step()? == StepOutcome::Running {}
        if self.status == StepOutcome::Completed
            && self.cfg.backend == Backend::Exact
            && !self.cfg.algorithm.neutral_only()
        {
            self.final_sweep()?;
        }
        self.take_checkpoints_upto(u64::MAX);
        let final_walk = self.cfg.algorithm.is_depth_first().then(|| self.walk_report());
        let summary = ExplorationSummary {
            edges_found: self.discovered_edges.len() as u64,
            components: self.components.iter().filter(|c| c.len() >= 2).count() as u64,
            largest_component: self.components.iter().map(|c| c.len() as u64).max().unwrap_or(0),
            max_frontier: self.max_frontier,
            queries: self.t,
            completed: self.status == StepOutcome::Completed,
        };
        Ok(ExplorationResult {
            n: self.cfg.n,
            k: self.cfg.k,
            j: self.cfg.j,
            algorithm: self.cfg.algorithm,
            backend: self.cfg.backend,
            components: self.components,
            trace: self.trace,
            events: self.events,
            checkpoints: self.checkpoints,
            discovered_edges: self.discovered_edges,
            sweep_edges: self.sweep_edges,
            summary,
            walk_at_max: self.walk_at_max,
            final_walk,
        })
    }
}

pub fn run_exploration(config: ExplorationConfig) -> Result<ExplorationResult> {
    Explorer::new(config)?.run()
}

/// Runs the exact backend on an explicit outcome sequence.
pub fn replay(bits: Vec<bool>, mut config: ExplorationConfig) -> Result<ExplorationResult> {
    if config.backend != Backend::Exact {
        return Err(Error::Config("replay needs the exact backend".into()));
    }
    config.source = Source::Bits(bits);
    run_exploration(config)
}

/// Degree profiles of the discovered j-sets at each checkpoint.
pub fn audit_degrees(mut config: ExplorationConfig, checkpoints: &[u64]) -> Result<Vec<(u64, DegreeProfile)>> {
    config.checkpoints = checkpoints.to_vec();
    let result = run_exploration(config)?;
    Ok(result.checkpoints.into_iter().map(|c| (c.t, c.profile)).collect())
}

/// 1-based start positions of length-`window` stretches whose outcome sum is
/// at least `window / c - 1`.
pub fn window_scan_bits(bits: &[bool], window: usize, c: f64) -> Result<Vec<usize>> {
    if window == 0 || window > bits.len() {
        return Err(invalid(format!(
            "window {window} must be in 1..={} (trace length)",
            bits.len()
        )));
    }
    let threshold = window as f64 / c - 1.0;
    let mut sum: usize = bits[..window].iter().filter(|&&b| b).count();
    let mut out = Vec::new();
    for start in 0..=bits.len() - window {
        if start > 0 {
            sum -= usize::from(bits[start - 1]);
            sum += usize::from(bits[start + window - 1]);
        }
        if sum as f64 >= threshold {
            out.push(start + 1);
        }
    }
    Ok(out)
}

pub fn window_scan(trace: &QueryTrace, window: usize, c: f64) -> Result<Vec<usize>> {
    if !trace.is_exact() {
        return Err(invalid("window scans need an exact-backend trace"));
    }
    window_scan_bits(&trace.bits(), window, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub max_deviation: f64,
    /// Query index attaining the maximum (0 for an empty trace).
    pub at_t: u64,
    /// `alpha^2 n^j`
    pub bound: f64,
    pub first_violation: Option<u64>,
}

/// Maximum of `|S_t - p t|` over prefixes of an exact trace, against
/// `alpha^2 n^j`.
pub fn concentration_scan_bits(bits: &[bool], p: f64, alpha: f64, n: u32, k: u32, j: u32) -> Result<ConcentrationReport> {
    let horizon = alpha * f64::from(n).powi(k as i32);
    if bits.len() as f64 > horizon.ceil() {
        return Err(invalid(format!(
            "trace of length {} exceeds alpha n^k = {horizon}",
            bits.len()
        )));
    }
    let bound = alpha * alpha * f64::from(n).powi(j as i32);
    let mut report = ConcentrationReport {
        max_deviation: 0.0,
        at_t: 0,
        bound,
        first_violation: None,
    };
    let mut sum = 0u64;
    for (i, &b) in bits.iter().enumerate() {
        let t = i as u64 + 1;
        sum += u64::from(b);
        let dev = (sum as f64 - p * t as f64).abs();
        if dev > report.max_deviation {
            report.max_deviation = dev;
            report.at_t = t;
        }
        if dev > bound && report.first_violation.is_none() {
            report.first_violation = Some(t);
        }
    }
    Ok(report)
}

pub fn concentration_scan(trace: &QueryTrace, p: f64, alpha: f64, n: u32, k: u32, j: u32) -> Result<ConcentrationReport> {
    if !trace.is_exact() {
        return Err(invalid("concentration scans need an exact-backend trace"));
    }
    concentration_scan_bits(&trace.bits(), p, alpha, n, k, j)
}

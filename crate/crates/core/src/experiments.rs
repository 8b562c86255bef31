//! Experiment specs, per-run records and summary tables.
//!
//! A [`RunSpec`] expands into [`RunTask`]s, one per (cell, run index). Each
//! task carries everything needed to execute it, so a [`RunRecord`] can be
//! replayed from its own fields. Run `i` over all cells gets the seed
//! `derive_seed(master, i)`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branching::{simulate_total, OffspringLaw};
use crate::error::{Error, Result};
use crate::exploration::{
    budget_from_alpha, run_exploration, Algorithm, Backend, ExplorationConfig, NeutralRule, Source, StartOrder,
};
use crate::hypergraph::{components_oracle, sample, SampleMethod};
use crate::model::{threshold_p, ModelParams};
use crate::rng::{derive_seed, GENERATOR};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "HYPERPHASE_WORKERS";

/// Ratios `p / p_kj` swept when a threshold sweep names none.
pub const DEFAULT_RATIOS: [f64; 5] = [0.5, 0.8, 1.0, 1.2, 1.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SubcriticalSize,
    SupercriticalSize,
    ThresholdSweep,
    DegreeAudit,
    WalkLength,
    BranchingSurvival,
    BackendAgreement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationFragment {
    pub algorithm: Algorithm,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    /// Budget `ceil(alpha n^k)`; none runs to completion.
    #[serde(default)]
    pub budget_alpha: Option<f64>,
    #[serde(default)]
    pub neutral_rule: NeutralRule,
    #[serde(default)]
    pub start_order: StartOrder,
    /// Checkpoints as fractions of the budget.
    #[serde(default)]
    pub checkpoint_fractions: Vec<f64>,
}

fn default_backend() -> Backend {
    Backend::Exact
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master: u64,
    pub runs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub n: u32,
    pub k: u32,
    pub j: u32,
    /// `p = (1 + eps) p_kj`; exactly one of `eps`, `p`, `ratios` applies.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    /// Threshold sweeps: one cell per ratio `p / p_kj`.
    #[serde(default)]
    pub ratios: Option<Vec<f64>>,
    #[serde(default)]
    pub exploration: Option<ExplorationFragment>,
    /// Branching population cap.
    #[serde(default)]
    pub cap: Option<u64>,
    #[serde(default)]
    pub method: Option<SampleMethod>,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "spec schema_version {} is not {SCHEMA_VERSION}",
                spec.schema_version
            )));
        }
        Ok(spec)
    }

    fn probabilities(&self) -> Result<Vec<ModelParams>> {
        let n = u64::from(self.n);
        let given = [self.eps.is_some(), self.p.is_some(), self.ratios.is_some()];
        match self.kind {
            ExperimentKind::ThresholdSweep => {
                if self.eps.is_some() || self.p.is_some() {
                    return Err(Error::Config("threshold sweeps take `ratios` only".into()));
                }
                let ratios = self.ratios.clone().unwrap_or_else(|| DEFAULT_RATIOS.to_vec());
                ratios
                    .iter()
                    .map(|r| ModelParams::from_eps(n, self.k, self.j, r - 1.0))
                    .collect()
            }
            _ => match given {
                [true, false, false] => Ok(vec![ModelParams::from_eps(n, self.k, self.j, self.eps.unwrap())?]),
                [false, true, false] => Ok(vec![ModelParams::from_p(n, self.k, self.j, self.p.unwrap())?]),
                _ => Err(Error::Config(format!(
                    "{:?} needs exactly one of `eps` or `p`",
                    self.kind
                ))),
            },
        }
    }

    /// Expands the spec into tasks ordered by run id.
    pub fn tasks(&self) -> Result<Vec<RunTask>> {
        let cells = self.probabilities()?;
        let needs_exploration = matches!(
            self.kind,
            ExperimentKind::DegreeAudit | ExperimentKind::WalkLength | ExperimentKind::BackendAgreement
        );
        let frag = match (&self.exploration, needs_exploration) {
            (Some(f), true) => Some(f.clone()),
            (None, true) => {
                return Err(Error::Config(format!("{:?} needs an `exploration` block", self.kind)));
            }
            (Some(_), false) if self.kind == ExperimentKind::BranchingSurvival => {
                return Err(Error::Config("branching survival takes no `exploration` block".into()));
            }
            (f, false) => f.clone(),
        };
        // backend agreement pairs every parameter cell with both backends
        let backends: Vec<Option<Backend>> = match (&frag, self.kind) {
            (_, ExperimentKind::BackendAgreement) => vec![Some(Backend::Exact), Some(Backend::Skip)],
            (Some(f), _) => vec![Some(f.backend)],
            (None, _) => vec![None],
        };
        let mut tasks = Vec::new();
        let mut run_id = 0u64;
        let mut cell = 0u32;
        for params in &cells {
            for &backend in &backends {
                for _ in 0..self.seeds.runs {
                    let mut task = RunTask {
                        run_id,
                        cell,
                        seed: derive_seed(self.seeds.master, run_id),
                        kind: self.kind,
                        n: self.n,
                        k: self.k,
                        j: self.j,
                        p: params.p,
                        eps: params.eps,
                        alpha: None,
                        algorithm: None,
                        backend,
                        neutral_rule: None,
                        start_order: None,
                        budget: None,
                        checkpoints: Vec::new(),
                        cap: None,
                        method: None,
                    };
                    match (&frag, self.kind) {
                        (Some(f), _) => {
                            task.algorithm = Some(f.algorithm);
                            task.neutral_rule = Some(f.neutral_rule);
                            task.start_order = Some(f.start_order);
                            task.alpha = f.budget_alpha;
                            task.budget = f.budget_alpha.map(|a| budget_from_alpha(a, self.n, self.k));
                            if let Some(b) = task.budget {
                                task.checkpoints = f
                                    .checkpoint_fractions
                                    .iter()
                                    .map(|x| (x * b as f64).round() as u64)
                                    .collect();
                            } else if !f.checkpoint_fractions.is_empty() {
                                return Err(Error::Config("checkpoint fractions need `budget_alpha`".into()));
                            }
                        }
                        (None, ExperimentKind::BranchingSurvival) => {
                            task.cap = Some(self.cap.unwrap_or(crate::branching::DEFAULT_CAP));
                        }
                        (None, _) => task.method = Some(self.method.unwrap_or(SampleMethod::Sparse)),
                    }
                    task.validate()?;
                    tasks.push(task);
                    run_id += 1;
                }
                cell += 1;
            }
        }
        Ok(tasks)
    }
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTask {
    pub run_id: u64,
    pub cell: u32,
    pub seed: u64,
    pub kind: ExperimentKind,
    pub n: u32,
    pub k: u32,
    pub j: u32,
    pub p: f64,
    pub eps: f64,
    pub alpha: Option<f64>,
    pub algorithm: Option<Algorithm>,
    pub backend: Option<Backend>,
    pub neutral_rule: Option<NeutralRule>,
    pub start_order: Option<StartOrder>,
    pub budget: Option<u64>,
    pub checkpoints: Vec<u64>,
    pub cap: Option<u64>,
    pub method: Option<SampleMethod>,
}

impl RunTask {
    fn exploration_config(&self) -> Option<ExplorationConfig> {
        let mut cfg = ExplorationConfig::new(
            self.algorithm?,
            self.backend?,
            self.n,
            self.k,
            self.j,
            Source::Bernoulli { p: self.p },
            self.seed,
        );
        cfg.budget = self.budget;
        cfg.checkpoints = self.checkpoints.clone();
        cfg.neutral_rule = self.neutral_rule.unwrap_or_default();
        cfg.start_order = self.start_order.unwrap_or_default();
        cfg.record_trace = false;
        cfg.audit_events = self.kind == ExperimentKind::DegreeAudit;
        cfg.capture_walk = self.kind == ExperimentKind::WalkLength;
        Some(cfg)
    }

    fn validate(&self) -> Result<()> {
        if let Some(cfg) = self.exploration_config() {
            cfg.validate()?;
        }
        if let Some(SampleMethod::Dense) = self.method {
            let edges = crate::combinat::binom(u64::from(self.n), u64::from(self.k))?;
            if edges > 1 << 32 {
                return Err(Error::Capacity(format!(
                    "dense sampling needs binom(n,k) <= 2^32, got {edges}; use method \"sparse\""
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub t: u64,
    pub deltas: Vec<u64>,
    /// l-sets whose degree exceeds the event-count bound, summed over l.
    pub growth_violations: u64,
    /// l-sets whose degree is strictly below the bound, summed over l.
    pub growth_strict: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    #[serde(flatten)]
    pub task: RunTask,
    pub edges_found: u64,
    pub components: u64,
    pub largest_component: u64,
    pub max_frontier: u64,
    pub queries: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capped: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk_unverifiable: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoint_rows: Vec<CheckpointRow>,
    pub wall_time_ms: u64,
    pub generator: String,
}

impl RunRecord {
    /// The record with its timing zeroed, for comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_ms: 0,
            ..self.clone()
        }
    }
}

pub fn execute(task: &RunTask) -> Result<RunRecord> {
    let start = Instant::now();
    let mut rec = RunRecord {
        schema_version: SCHEMA_VERSION,
        task: task.clone(),
        edges_found: 0,
        components: 0,
        largest_component: 0,
        max_frontier: 0,
        queries: 0,
        capped: None,
        walk_unverifiable: None,
        checkpoint_rows: Vec::new(),
        wall_time_ms: 0,
        generator: GENERATOR.to_string(),
    };
    if let Some(cfg) = task.exploration_config() {
        let res = run_exploration(cfg)?;
        rec.edges_found = res.summary.edges_found;
        rec.components = res.summary.components;
        rec.largest_component = res.summary.largest_component;
        rec.max_frontier = res.summary.max_frontier;
        rec.queries = res.summary.queries;
        if let Some(w) = &res.walk_at_max {
            rec.walk_unverifiable = Some(w.unverifiable.len() as u64);
        }
        rec.checkpoint_rows = res
            .checkpoints
            .iter()
            .map(|c| CheckpointRow {
                t: c.t,
                deltas: c.profile.deltas.clone(),
                growth_violations: c.growth.iter().map(|g| g.violations).sum(),
                growth_strict: c.growth.iter().map(|g| g.strict).sum(),
            })
            .collect();
    } else if task.kind == ExperimentKind::BranchingSurvival {
        let law = OffspringLaw::for_exploration(u64::from(task.n), task.k, task.j, task.p)?;
        let out = simulate_total(&law, task.cap.unwrap_or(crate::branching::DEFAULT_CAP), task.seed)?;
        rec.largest_component = out.tau;
        rec.max_frontier = out.generations;
        rec.capped = Some(out.capped);
    } else {
        let method = task.method.unwrap_or(SampleMethod::Sparse);
        let h = sample(task.n, task.k, task.p, task.seed, method)?;
        let part = components_oracle(&h, task.j)?;
        rec.edges_found = h.edges.len() as u64;
        rec.components = part.num_components() as u64;
        rec.largest_component = part.largest();
    }
    rec.wall_time_ms = start.elapsed().as_millis() as u64;
    Ok(rec)
}

/// Re-executes a record from its own fields.
pub fn replay_record(record: &RunRecord) -> Result<RunRecord> {
    execute(&record.task)
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&w| w >= 1)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

/// Executes every task of the spec on `workers` threads (the global pool
/// when `None`). Records come back ordered by run id.
pub fn run(spec: &RunSpec, workers: Option<usize>) -> Result<Vec<RunRecord>> {
    let tasks = spec.tasks()?;
    let go = || tasks.par_iter().map(execute).collect::<Result<Vec<_>>>();
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?
            .install(go),
        None => go(),
    }
}

pub fn write_jsonl(records: &[RunRecord], mut out: impl Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("schema_version {} is not {SCHEMA_VERSION}", rec.schema_version),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub mean: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q75: quantile(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub n: u32,
    pub k: u32,
    pub j: u32,
    pub p: f64,
    pub eps: f64,
    pub algorithm: String,
    pub backend: String,
    pub runs: u64,
    pub largest_component: Stats,
    pub edges_found: Stats,
    pub max_frontier: Stats,
    /// Mean of `largest_component / n^j`.
    pub largest_over_nj: f64,
    /// Mean of `largest_component / (|eps| n^j)`; NaN when eps = 0.
    pub largest_over_eps_nj: f64,
}

type CellKey = (ExperimentKind, u32, u32, u32, u64, String, String);

/// Per-cell statistics, grouped by kind, parameters, algorithm and backend.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<CellKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let t = &r.task;
        let key = (
            t.kind,
            t.n,
            t.k,
            t.j,
            t.p.to_bits(),
            t.algorithm.map_or("", Algorithm::name).to_string(),
            t.backend.map_or("", Backend::name).to_string(),
        );
        cells.entry(key).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((kind, n, k, j, p, algorithm, backend), recs)| {
            let col = |f: fn(&RunRecord) -> u64| recs.iter().map(|r| f(r) as f64).collect::<Vec<_>>();
            let largest = col(|r| r.largest_component);
            let nj = f64::from(n).powi(j as i32);
            let eps = recs[0].task.eps;
            let mean_largest = largest.iter().sum::<f64>() / largest.len() as f64;
            SummaryRow {
                schema_version: SCHEMA_VERSION,
                kind,
                n,
                k,
                j,
                p: f64::from_bits(p),
                eps,
                algorithm,
                backend,
                runs: recs.len() as u64,
                largest_component: Stats::of(&largest).expect("non-empty cell"),
                edges_found: Stats::of(&col(|r| r.edges_found)).expect("non-empty cell"),
                max_frontier: Stats::of(&col(|r| r.max_frontier)).expect("non-empty cell"),
                largest_over_nj: mean_largest / nj,
                largest_over_eps_nj: if eps == 0.0 { f64::NAN } else { mean_largest / (eps.abs() * nj) },
            }
        })
        .collect()
}

const STAT_NAMES: [&str; 6] = ["min", "q25", "median", "mean", "q75", "max"];

pub fn summary_header() -> String {
    let mut cols: Vec<String> = ["schema_version", "kind", "n", "k", "j", "p", "eps", "algorithm", "backend", "runs"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for field in ["largest_component", "edges_found", "max_frontier"] {
        cols.extend(STAT_NAMES.iter().map(|s| format!("{field}_{s}")));
    }
    cols.push("largest_over_nj".into());
    cols.push("largest_over_eps_nj".into());
    cols.join(",")
}

pub fn write_summary_csv(rows: &[SummaryRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(summary_header().split(','))
        .map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        let kind = serde_json::to_value(r.kind)?;
        let mut rec = vec![
            r.schema_version.to_string(),
            kind.as_str().unwrap_or_default().to_string(),
            r.n.to_string(),
            r.k.to_string(),
            r.j.to_string(),
            r.p.to_string(),
            r.eps.to_string(),
            r.algorithm.clone(),
            r.backend.clone(),
            r.runs.to_string(),
        ];
        for s in [r.largest_component, r.edges_found, r.max_frontier] {
            rec.extend([s.min, s.q25, s.median, s.mean, s.q75, s.max].iter().map(f64::to_string));
        }
        rec.push(r.largest_over_nj.to_string());
        rec.push(r.largest_over_eps_nj.to_string());
        w.write_record(&rec).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Ratio `p / p_kj` of a record.
pub fn threshold_ratio(task: &RunTask) -> Result<f64> {
    Ok(task.p / threshold_p(u64::from(task.n), task.k, task.j)?.value)
}

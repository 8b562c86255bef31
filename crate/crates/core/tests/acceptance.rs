//! Acceptance checks, one line per criterion. Fitted thresholds come from
//! `config/acceptance.json`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use hyperphase::branching::{domination_check, pgf_survival, survival_estimate, OffspringLaw};
use hyperphase::combinat::binom;
use hyperphase::experiments::{self, ExplorationFragment, ExperimentKind, RunRecord, RunSpec, SeedSpec, Stats};
use hyperphase::exploration::{
    budget_from_alpha, run_exploration, Algorithm, Backend, ExplorationConfig, ExplorationResult, NeutralRule,
    Source, StartOrder,
};
use hyperphase::hypergraph::{components_oracle, sample, SampleMethod};
use hyperphase::model::{giant_fraction, threshold_p};
use hyperphase::rng::derive_seed;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    schema_version: u32,
    oracle_instances_per_cell: u64,
    giant_tolerance: f64,
    subcritical_size_constant: f64,
    subcritical_min_seeds: usize,
    sharpness_factor: f64,
    sharpness_min_fraction: f64,
    partial_alpha_divisor: f64,
    partial_component_fraction: f64,
    partial_min_share: f64,
    degree_bound: f64,
    survival_runs: u64,
    survival_cap: u64,
    survival_sub_max: f64,
    survival_tolerance: f64,
    pgf_giant_tolerance: f64,
    domination_runs: u64,
    agreement_seeds: u64,
    agreement_se: f64,
    frontier_constant: f64,
    frontier_min_share: f64,
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn pkj(n: u64, k: u32, j: u32) -> f64 {
    threshold_p(n, k, j).unwrap().value
}

fn median(v: &[f64]) -> f64 {
    Stats::of(v).unwrap().median
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

// Criteria 1 and 2 share their runs.
fn oracle_equivalence(cfg: &Config) -> (Verdict, Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut instances = 0u64;
    let mut partition_failures = Vec::new();
    let mut coupling_failures = Vec::new();
    for k in 2..=4u32 {
        for j in 1..k {
            for factor in [Some(0.3), Some(1.0), Some(3.0), None] {
                for _ in 0..cfg.oracle_instances_per_cell {
                    let n = rng.random_range(k.max(3)..=12u32);
                    let p = match factor {
                        Some(f) => (f * pkj(u64::from(n), k, j)).min(1.0),
                        None => 0.5,
                    };
                    let seed = rng.random::<u64>();
                    let h = sample(n, k, p, seed, SampleMethod::Dense).unwrap();
                    let oracle = components_oracle(&h, j).unwrap();
                    let total = binom(u64::from(n), u64::from(k)).unwrap();
                    instances += 1;
                    for alg in [Algorithm::Dfs1, Algorithm::Bfs1] {
                        for rule in [NeutralRule::Pseudocode, NeutralRule::Prose] {
                            let mut c =
                                ExplorationConfig::new(alg, Backend::Exact, n, k, j, Source::Hypergraph(h.edges.clone()), seed);
                            c.neutral_rule = rule;
                            let res = run_exploration(c).unwrap();
                            let tag = format!("n={n} k={k} j={j} p={p:.4} {alg:?} {rule:?}");
                            if res.partition().unwrap() != oracle || res.hypergraph(seed).edges != h.edges {
                                partition_failures.push(tag.clone());
                            }
                            let mut ranks: Vec<u64> = res.trace.records.iter().map(|r| r.rank).collect();
                            ranks.sort_unstable();
                            let once = ranks.len() as u64 == total && ranks.iter().enumerate().all(|(i, &r)| r == i as u64);
                            if !once || res.summary.queries != total {
                                coupling_failures.push(tag);
                            }
                        }
                    }
                }
            }
        }
    }
    let c1 = verdict(
        instances >= 500 && partition_failures.is_empty(),
        format!(
            "{instances} instances x 4 runs, {} partition mismatches{}",
            partition_failures.len(),
            partition_failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    );
    let c2 = verdict(
        coupling_failures.is_empty(),
        format!("{} runs with a k-set not queried exactly once", coupling_failures.len()),
    );
    (c1, c2)
}

fn giant_fraction_check(cfg: &Config) -> Verdict {
    let (n, k, c) = (100_000u32, 3u32, 1.0);
    let p = c / binom(u64::from(n) - 1, 2).unwrap() as f64;
    let fracs: Vec<f64> = (0..10)
        .map(|s| {
            let h = sample(n, k, p, derive_seed(3, s), SampleMethod::Sparse).unwrap();
            components_oracle(&h, 1).unwrap().largest() as f64 / f64::from(n)
        })
        .collect();
    let mean = fracs.iter().sum::<f64>() / fracs.len() as f64;
    let target = giant_fraction(c, k).unwrap();
    verdict(
        (mean - target).abs() <= cfg.giant_tolerance,
        format!("mean largest/n = {mean:.4}, giant_fraction(1,3) = {target:.4}"),
    )
}

fn subcritical_bound(cfg: &Config) -> Verdict {
    let (n, eps) = (2000u32, 0.3);
    let p = (1.0 - eps) * pkj(u64::from(n), 3, 1);
    let bound = cfg.subcritical_size_constant * eps.powi(-2) * f64::from(n).ln();
    let sizes: Vec<u64> = (0..50)
        .map(|s| {
            let h = sample(n, 3, p, derive_seed(4, s), SampleMethod::Sparse).unwrap();
            components_oracle(&h, 1).unwrap().largest()
        })
        .collect();
    let ok = sizes.iter().filter(|&&s| s as f64 <= bound).count();
    verdict(
        ok >= cfg.subcritical_min_seeds,
        format!(
            "{ok}/50 seeds with largest <= {bound:.0} (max {})",
            sizes.iter().max().unwrap()
        ),
    )
}

fn sharpness(cfg: &Config) -> Verdict {
    let n = 300u32;
    let pc = pkj(u64::from(n), 3, 2);
    let cell = |ratio: f64, salt: u64| -> f64 {
        let sizes: Vec<f64> = (0..30)
            .map(|s| {
                let h = sample(n, 3, ratio * pc, derive_seed(salt, s), SampleMethod::Sparse).unwrap();
                components_oracle(&h, 2).unwrap().largest() as f64
            })
            .collect();
        median(&sizes)
    };
    let (low, high) = (cell(0.8, 50), cell(1.2, 51));
    let floor = cfg.sharpness_min_fraction * f64::from(n).powi(2);
    verdict(
        high >= cfg.sharpness_factor * low && high >= floor,
        format!("median largest: {low} at 0.8, {high} at 1.2 (factor {:.1}, floor {floor})", high / low),
    )
}

fn partial_runs(cfg: &Config) -> (f64, u64, Vec<ExplorationResult>) {
    let (n, eps) = (400u32, 0.3);
    let alpha = eps / cfg.partial_alpha_divisor;
    let budget = budget_from_alpha(alpha, n, 3);
    let p = (1.0 + eps) * pkj(u64::from(n), 3, 2);
    let runs = (0..20)
        .map(|s| {
            let mut c = ExplorationConfig::new(Algorithm::Dfs2, Backend::Exact, n, 3, 2, Source::Bernoulli { p }, derive_seed(6, s));
            c.budget = Some(budget);
            c.checkpoints = vec![budget / 4, budget / 2, budget];
            c.audit_events = true;
            c.record_trace = false;
            run_exploration(c).unwrap()
        })
        .collect();
    (alpha, budget, runs)
}

fn partial_component(cfg: &Config, runs: &[ExplorationResult]) -> Verdict {
    let (n, eps) = (400.0f64, 0.3);
    let need = cfg.partial_component_fraction * eps * n * n;
    let sizes: Vec<u64> = runs.iter().map(|r| r.summary.largest_component).collect();
    let ok = sizes.iter().filter(|&&s| s as f64 >= need).count();
    verdict(
        ok as f64 >= cfg.partial_min_share * runs.len() as f64,
        format!("{ok}/20 seeds with largest partial component >= {need} (sizes {sizes:?})"),
    )
}

fn degree_audit(cfg: &Config, alpha: f64, budget: u64, runs: &[ExplorationResult]) -> Verdict {
    let scale = alpha * 400.0;
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut growth_ok = true;
    for r in runs {
        let ts: Vec<u64> = r.checkpoints.iter().map(|c| c.t).collect();
        if ts != [budget / 4, budget / 2, budget] {
            return verdict(false, format!("unexpected checkpoints {ts:?}"));
        }
        for w in r.checkpoints.windows(2) {
            monotone &= w[0].profile.deltas.iter().zip(&w[1].profile.deltas).all(|(a, b)| a <= b);
        }
        for c in &r.checkpoints {
            worst = worst.max(c.profile.deltas[1] as f64 / scale);
            growth_ok &= c.growth.iter().all(|g| g.violations == 0 && g.strict == 0);
        }
    }
    verdict(
        worst <= cfg.degree_bound && monotone && growth_ok,
        format!("max D1/(alpha n) = {worst:.2}, monotone {monotone}, growth equality {growth_ok}"),
    )
}

fn branching_threshold(cfg: &Config) -> Verdict {
    let n = 10_000u64;
    let mut notes = Vec::new();
    let mut pass = true;
    for (k, j) in [(3u32, 1u32), (3, 2), (4, 2)] {
        let pc = pkj(n, k, j);
        let sub = OffspringLaw::for_exploration(n, k, j, 0.9 * pc).unwrap();
        let sup = OffspringLaw::for_exploration(n, k, j, 1.3 * pc).unwrap();
        let s_sub = survival_estimate(&sub, cfg.survival_cap, cfg.survival_runs, 81).unwrap();
        let s_sup = survival_estimate(&sup, cfg.survival_cap, cfg.survival_runs, 82).unwrap();
        let exact = pgf_survival(&sup, 1e-10).unwrap();
        pass &= s_sub.fraction <= cfg.survival_sub_max && (s_sup.fraction - exact).abs() <= cfg.survival_tolerance;
        notes.push(format!("({k},{j}) sub {:.4}, sup {:.4} vs pgf {exact:.4}", s_sub.fraction, s_sup.fraction));
    }
    let m = 100_000u64;
    let pgf = pgf_survival(&OffspringLaw::new(1, m, 2.0 / m as f64).unwrap(), 1e-12).unwrap();
    let giant = giant_fraction(2.0, 2).unwrap();
    pass &= (pgf - giant).abs() <= cfg.pgf_giant_tolerance;
    notes.push(format!("pgf {pgf:.5} vs giant_fraction(2,2) {giant:.5}"));
    verdict(pass, notes.join("; "))
}

fn domination(cfg: &Config) -> Verdict {
    let mut failures = Vec::new();
    let mut cells = 0;
    for r in [2u64, 3] {
        for m in [2u64, 5] {
            for q in [0.1, 0.2] {
                for s in [3u64, 5, 8] {
                    let rep = domination_check(r, m, q, s, cfg.domination_runs, 9 + cells).unwrap();
                    cells += 1;
                    if !rep.holds {
                        failures.push(format!("(r={r},m={m},q={q},s={s}) lhs {:.4} rhs {:.4}", rep.lhs, rep.rhs));
                    }
                }
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("{cells} cells, {} violations {}", failures.len(), failures.join(" ")),
    )
}

fn backend_agreement(cfg: &Config) -> Verdict {
    let (n, k, j) = (14u32, 3u32, 2u32);
    let p = 1.2 * pkj(u64::from(n), k, j);
    let collect = |backend: Backend| -> (Vec<f64>, Vec<f64>) {
        (0..cfg.agreement_seeds)
            .map(|s| {
                let seed = derive_seed(if backend == Backend::Exact { 100 } else { 101 }, s);
                let mut c = ExplorationConfig::new(Algorithm::Dfs2, backend, n, k, j, Source::Bernoulli { p }, seed);
                c.record_trace = false;
                let r = run_exploration(c).unwrap();
                (r.summary.edges_found as f64, r.summary.largest_component as f64)
            })
            .unzip()
    };
    let (ee, el) = collect(Backend::Exact);
    let (se, sl) = collect(Backend::Skip);
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, a, b) in [("edges_found", &ee, &se), ("largest", &el, &sl)] {
        let ((ma, sa), (mb, sb)) = (mean_se(a), mean_se(b));
        let z = (ma - mb).abs() / (sa * sa + sb * sb).sqrt();
        pass &= z <= cfg.agreement_se;
        notes.push(format!("{name}: exact {ma:.3}, skip {mb:.3}, |z| {z:.2}"));
    }
    verdict(pass, notes.join("; "))
}

fn frontier_walks(cfg: &Config) -> Verdict {
    let (n, eps) = (5000u32, 0.3);
    let p = (1.0 + eps) * pkj(u64::from(n), 3, 1);
    let need = cfg.frontier_constant * eps * eps * f64::from(n);
    let mut ok = 0;
    let mut unverifiable = 0;
    let mut fronts = Vec::new();
    for s in 0..20 {
        let mut c = ExplorationConfig::new(Algorithm::Dfs2, Backend::Skip, n, 3, 1, Source::Bernoulli { p }, derive_seed(11, s));
        c.capture_walk = true;
        c.record_trace = false;
        let r = run_exploration(c).unwrap();
        let walk = r.walk_at_max.unwrap_or_default();
        unverifiable += walk.unverifiable.len();
        if r.summary.max_frontier as f64 >= need {
            ok += 1;
        }
        fronts.push(r.summary.max_frontier);
    }
    verdict(
        ok as f64 >= cfg.frontier_min_share * 20.0 && unverifiable == 0,
        format!("{ok}/20 seeds with max frontier >= {need:.2} (frontiers {fronts:?}), {unverifiable} unverifiable adjacencies"),
    )
}

fn determinism() -> Verdict {
    let specs = [
        RunSpec {
            schema_version: experiments::SCHEMA_VERSION,
            kind: ExperimentKind::WalkLength,
            n: 800,
            k: 3,
            j: 1,
            eps: Some(0.3),
            p: None,
            ratios: None,
            exploration: Some(ExplorationFragment {
                algorithm: Algorithm::Dfs2,
                backend: Backend::Skip,
                budget_alpha: None,
                neutral_rule: NeutralRule::Pseudocode,
                start_order: StartOrder::Random,
                checkpoint_fractions: vec![],
            }),
            cap: None,
            method: None,
            seeds: SeedSpec { master: 12, runs: 24 },
            output: None,
        },
        RunSpec::from_json(
            r#"{"kind":"threshold-sweep","n":60,"k":3,"j":2,"seeds":{"master":5,"runs":6}}"#,
        )
        .unwrap(),
        RunSpec::from_json(
            r#"{"kind":"degree-audit","n":40,"k":3,"j":2,"eps":0.3,"seeds":{"master":8,"runs":8},
                "exploration":{"algorithm":"bfs2","budget_alpha":0.005,"checkpoint_fractions":[0.5,1.0]}}"#,
        )
        .unwrap(),
    ];
    let jsonl = |spec: &RunSpec, w: usize| -> Vec<u8> {
        let recs: Vec<RunRecord> = experiments::run(spec, Some(w))
            .unwrap()
            .iter()
            .map(RunRecord::without_timing)
            .collect();
        let mut buf = Vec::new();
        experiments::write_jsonl(&recs, &mut buf).unwrap();
        buf
    };
    let mut total = 0;
    let mut pass = true;
    for spec in &specs {
        let base = jsonl(spec, 1);
        total += base.iter().filter(|&&b| b == b'\n').count();
        pass &= jsonl(spec, 4) == base && jsonl(spec, 1) == base;
    }
    verdict(pass, format!("{total} records identical across reruns and worker counts 1 and 4"))
}

fn main() -> ExitCode {
    let cfg: Config = serde_json::from_str(include_str!("../config/acceptance.json")).expect("acceptance config");
    assert_eq!(cfg.schema_version, 1, "acceptance config schema");
    let mut results: Vec<(u32, Verdict, f64)> = Vec::new();
    let mut timed = |f: &mut dyn FnMut() -> Vec<(u32, Verdict)>| {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        for (id, v) in out {
            let line = format!(
                "criterion {id:>2}: {} ({secs:.1}s) {}",
                if v.pass { "PASS" } else { "FAIL" },
                v.detail
            );
            println!("{line}");
            results.push((id, v, secs));
        }
    };
    timed(&mut || {
        let (a, b) = oracle_equivalence(&cfg);
        vec![(1, a), (2, b)]
    });
    timed(&mut || vec![(3, giant_fraction_check(&cfg))]);
    timed(&mut || vec![(4, subcritical_bound(&cfg))]);
    timed(&mut || vec![(5, sharpness(&cfg))]);
    timed(&mut || {
        let (alpha, budget, runs) = partial_runs(&cfg);
        vec![(6, partial_component(&cfg, &runs)), (7, degree_audit(&cfg, alpha, budget, &runs))]
    });
    timed(&mut || vec![(8, branching_threshold(&cfg))]);
    timed(&mut || vec![(9, domination(&cfg))]);
    timed(&mut || vec![(10, backend_agreement(&cfg))]);
    timed(&mut || vec![(11, frontier_walks(&cfg))]);
    timed(&mut || vec![(12, determinism())]);
    let failed: Vec<u32> = results.iter().filter(|(_, v, _)| !v.pass).map(|(id, _, _)| *id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use hyperphase::branching::{outcomes_csv, simulate_many, OffspringLaw, DEFAULT_CAP};
use hyperphase::exploration::{
    budget_from_alpha, checkpoints_csv, run_exploration, Algorithm, Backend, ExplorationConfig, NeutralRule,
    Source, StartOrder,
};
use hyperphase::experiments::{self, RunSpec};
use hyperphase::hypergraph::{components_oracle, sample, HypergraphSample, SampleMethod};
use hyperphase::model::{bdl_constants, giant_fraction, threshold_p, ModelParams};
use hyperphase::{Error, Result};

#[derive(Parser)]
#[command(name = "hyperphase", version, about = "j-tuple components of random k-uniform hypergraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical edge probability p_kj.
    Threshold {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        j: u32,
    },
    /// Constants of the bounded-degree recursion.
    Constants {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        j: u32,
        #[arg(long)]
        eps: f64,
    },
    /// Giant-component fraction for p = c / binom(n-1, k-1).
    Giant {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        k: u32,
    },
    /// Draw a hypergraph and write it in the text format.
    Sample {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "sparse")]
        method: SampleMethod,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// j-tuple components of a stored hypergraph.
    Components {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        j: u32,
    },
    /// Run one exploration and print its summary.
    Explore {
        #[arg(long)]
        alg: Algorithm,
        #[arg(long, default_value = "exact")]
        backend: Backend,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        j: u32,
        #[arg(long, conflicts_with = "eps", required_unless_present = "eps")]
        p: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<f64>,
        #[arg(long)]
        budget_alpha: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "pseudocode")]
        neutral_rule: NeutralRule,
        #[arg(long, default_value = "random")]
        start_order: StartOrder,
        /// Query counts at which degree profiles are recorded.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        checkpoints: Vec<u64>,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        events_out: Option<PathBuf>,
        #[arg(long)]
        checkpoints_out: Option<PathBuf>,
    },
    /// Simulate branching processes; CSV `seed,tau,capped,generations`.
    Branching {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Execute a JSON run spec, writing JSONL records and a CSV summary.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize JSONL records as CSV.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Threshold { n, k, j } => {
            let t = threshold_p(n, k, j)?;
            print_json(&json!({
                "p": t.value, "numerator": t.numerator, "denominator": t.denominator,
            }))
        }
        Command::Constants { k, j, eps } => print_json(&serde_json::to_value(bdl_constants(k, j, eps)?)?),
        Command::Giant { c, k } => print_json(&json!({ "c": c, "k": k, "fraction": giant_fraction(c, k)? })),
        Command::Sample { n, k, p, seed, method, out } => {
            let h = sample(n, k, p, seed, method)?;
            write_or_print(out.as_ref(), &h.to_text()?)
        }
        Command::Components { input, j } => {
            let h = HypergraphSample::from_text(&fs::read_to_string(input)?)?;
            let part = components_oracle(&h, j)?;
            let mut sizes = part.sizes.clone();
            sizes.sort_unstable_by(|a, b| b.cmp(a));
            print_json(&json!({
                "n": h.n, "k": h.k, "j": j, "edges": h.edges.len(),
                "components": part.num_components(), "largest": part.largest(),
                "uncovered": part.uncovered, "sizes": sizes,
            }))
        }
        Command::Explore {
            alg,
            backend,
            n,
            k,
            j,
            p,
            eps,
            budget_alpha,
            seed,
            neutral_rule,
            start_order,
            checkpoints,
            trace_out,
            events_out,
            checkpoints_out,
        } => {
            let params = match (p, eps) {
                (Some(p), _) => ModelParams::from_p(u64::from(n), k, j, p)?,
                (None, Some(e)) => ModelParams::from_eps(u64::from(n), k, j, e)?,
                (None, None) => unreachable!("clap requires one of --p/--eps"),
            };
            let mut cfg = ExplorationConfig::new(alg, backend, n, k, j, Source::Bernoulli { p: params.p }, seed);
            cfg.budget = budget_alpha.map(|a| budget_from_alpha(a, n, k));
            cfg.checkpoints = checkpoints;
            cfg.neutral_rule = neutral_rule;
            cfg.start_order = start_order;
            cfg.record_trace = trace_out.is_some();
            cfg.audit_events = events_out.is_some();
            let res = run_exploration(cfg)?;
            if let Some(path) = trace_out {
                fs::write(path, res.trace.to_text())?;
            }
            if let (Some(path), Some(ev)) = (events_out, &res.events) {
                let table = hyperphase::combinat::BinomialTable::new(u64::from(n), k)?;
                fs::write(path, ev.to_csv(&table))?;
            }
            if let Some(path) = checkpoints_out {
                fs::write(path, checkpoints_csv(&res.checkpoints))?;
            }
            let profiles: Vec<_> = res
                .checkpoints
                .iter()
                .map(|c| json!({ "t": c.t, "deltas": c.profile.deltas }))
                .collect();
            print_json(&json!({
                "n": n, "k": k, "j": j, "p": params.p, "eps": params.eps,
                "algorithm": alg.name(), "backend": backend.name(), "seed": seed,
                "summary": res.summary, "checkpoints": profiles,
            }))
        }
        Command::Branching { r, m, q, cap, runs, seed } => {
            let law = OffspringLaw::new(r, m, q)?;
            let rows = simulate_many(&law, cap, runs, seed)?;
            write_or_print(None, &outcomes_csv(&rows))
        }
        Command::Sweep { spec, out } => {
            let spec = RunSpec::from_json(&fs::read_to_string(spec)?)?;
            let records = experiments::run(&spec, experiments::workers_from_env()?)?;
            let path = out.or_else(|| spec.output.as_ref().map(PathBuf::from));
            let mut summary = Vec::new();
            experiments::write_summary_csv(&experiments::summarize(&records), &mut summary)?;
            match path {
                Some(p) => {
                    experiments::write_jsonl(&records, io::BufWriter::new(fs::File::create(&p)?))?;
                    let mut csv_path = p.into_os_string();
                    csv_path.push(".summary.csv");
                    fs::write(csv_path, &summary)?;
                }
                None => experiments::write_jsonl(&records, io::stdout().lock())?,
            }
            io::stderr().lock().write_all(&summary)?;
            Ok(())
        }
        Command::Summarize { input } => {
            let records = experiments::read_jsonl(BufReader::new(fs::File::open(input)?))?;
            experiments::write_summary_csv(&experiments::summarize(&records), io::stdout().lock())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> ExitCode {
    let msg = json!({ "error": e.category(), "message": e.to_string() });
    eprintln!("{msg}");
    ExitCode::from(e.exit_code() as u8)
}

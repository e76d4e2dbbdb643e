use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use daycare_core::algorithms::trace::ExecutionTrace;
use daycare_core::algorithms::Algorithm;
use daycare_core::diagnostics::{reference_from_meta, structure_report};
use daycare_core::experiment::{render_report, run_sweep, ReportFormat, SweepSpec};
use daycare_core::market::{gen_instance, MarketConfig};
use daycare_core::solver::{find_stable, SearchBudget, SolverResult};
use daycare_core::stability::{find_blocking_coalition, StabilityMode};
use daycare_core::{load_instance, Instance, Matching};
use serde_json::json;

#[derive(Parser)]
#[command(name = "daycare", version, about = "Daycare matching with siblings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random market.
    Gen {
        /// Base config as JSON; the flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        phi: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test a matching for stability.
    Check {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        matching: PathBuf,
        #[arg(long, default_value = "ours")]
        mode: StabilityMode,
    },
    /// Run one of the matching algorithms.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "esda")]
        algo: Algorithm,
        /// Write the event log here, one JSON object per line.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Decide by exhaustive search whether a stable matching exists.
    Exists {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "ours")]
        mode: StabilityMode,
        #[arg(long)]
        max_nodes: Option<u64>,
        #[arg(long)]
        max_millis: Option<u64>,
    },
    /// Report family structure and, given a trace, its chains and invariants.
    Inspect {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a sweep of generated markets.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_instance(path: &Path) -> Result<Instance> {
    load_instance(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { config, n, alpha, phi, sigma, epsilon, seed, out } => {
            let mut cfg: MarketConfig = match config {
                Some(p) => serde_json::from_slice(&read(&p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => MarketConfig::default(),
            };
            cfg.n = n.unwrap_or(cfg.n);
            cfg.alpha = alpha.unwrap_or(cfg.alpha);
            cfg.phi = phi.unwrap_or(cfg.phi);
            cfg.sigma = sigma.unwrap_or(cfg.sigma);
            cfg.epsilon = epsilon.unwrap_or(cfg.epsilon);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let g = gen_instance(&cfg)?;
            emit(out.as_deref(), &(g.instance.to_json() + "\n"))
        }
        Command::Check { instance, matching, mode } => {
            let inst = read_instance(&instance)?;
            let m = Matching::load(&inst, &read(&matching)?).with_context(|| format!("loading {}", matching.display()))?;
            match find_blocking_coalition(&inst, &m, mode)? {
                None => println!("STABLE"),
                Some(bc) => {
                    println!("UNSTABLE");
                    print!("{}", pretty(&bc.to_json(&inst)));
                }
            }
            Ok(())
        }
        Command::Solve { instance, algo, trace } => {
            let inst = read_instance(&instance)?;
            let out = algo.run(&inst);
            if let Some(p) = trace {
                emit(Some(&p), &out.trace.to_json_lines(&inst))?;
            }
            print!("{}", pretty(&out.to_json(&inst)));
            Ok(())
        }
        Command::Exists { instance, mode, max_nodes, max_millis } => {
            let inst = read_instance(&instance)?;
            let d = SearchBudget::default();
            let budget = SearchBudget::new(max_nodes.unwrap_or(d.max_nodes), max_millis.unwrap_or(d.max_millis))?;
            let v = match find_stable(&inst, mode, budget) {
                SolverResult::Found(m) => json!({"result": "found", "matching": m.to_doc(&inst)}),
                SolverResult::NoneExists => json!({"result": "none"}),
                SolverResult::BudgetExceeded { nodes } => json!({"result": "budget_exceeded", "nodes": nodes}),
            };
            print!("{}", pretty(&v));
            Ok(())
        }
        Command::Inspect { instance, trace } => {
            let inst = read_instance(&instance)?;
            let trace = match trace {
                Some(p) => {
                    let text = String::from_utf8(read(&p)?).context("trace is not UTF-8")?;
                    Some(ExecutionTrace::from_json_lines(&inst, &text).with_context(|| format!("parsing {}", p.display()))?)
                }
                None => None,
            };
            let reference = reference_from_meta(&inst)?;
            let report = structure_report(&inst, reference.as_deref(), trace.as_ref())?;
            print!("{}", pretty(&serde_json::to_value(report)?));
            Ok(())
        }
        Command::Experiment { spec, out, format } => {
            let bytes = read(&spec)?;
            let de = &mut serde_json::Deserializer::from_slice(&bytes);
            let spec: SweepSpec = serde_path_to_error::deserialize(de)
                .map_err(|e| anyhow::anyhow!("{} at {}", e.inner(), e.path()))
                .with_context(|| format!("parsing {}", spec.display()))?;
            let report = run_sweep(&spec)?;
            emit(out.as_deref(), &render_report(&report, format))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! Seeded sweeps over generated markets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::Algorithm;
use crate::market::{gen_instance, MarketConfig, MarketError};
use crate::model::Instance;
use crate::solver::{find_stable, SearchBudget, SolverResult};
use crate::stability::{is_stable, StabilityMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAlgorithm {
    Da,
    Sc,
    Sda,
    Esda,
    ExactOurs,
    ExactAbh,
}

impl SweepAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            SweepAlgorithm::Da => "da",
            SweepAlgorithm::Sc => "sc",
            SweepAlgorithm::Sda => "sda",
            SweepAlgorithm::Esda => "esda",
            SweepAlgorithm::ExactOurs => "exact-ours",
            SweepAlgorithm::ExactAbh => "exact-abh",
        }
    }

    fn is_exact(self) -> bool {
        matches!(self, SweepAlgorithm::ExactOurs | SweepAlgorithm::ExactAbh)
    }
}

impl FromStr for SweepAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown algorithm {s:?}"))
    }
}

fn default_trials() -> usize {
    100
}

fn default_exact_cap() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub sizes: Vec<usize>,
    pub phis: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub algorithms: Vec<SweepAlgorithm>,
    #[serde(default)]
    pub base: MarketConfig,
    #[serde(default)]
    pub seed: u64,
    /// Exact cells with more children than this are skipped.
    #[serde(default = "default_exact_cap")]
    pub exact_cap: usize,
    #[serde(default)]
    pub budget: SearchBudget,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error("market for n = {n}, phi = {phi}: {source}")]
    Market {
        n: usize,
        phi: f64,
        #[source]
        source: MarketError,
    },
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::Spec("trials must be at least 1".into()));
        }
        if let Some(phi) = self.phis.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ExperimentError::Spec(format!("phi {phi} outside [0, 1]")));
        }
        if self.budget.max_nodes == 0 || self.budget.max_millis == 0 {
            return Err(ExperimentError::Spec("budget limits must be positive".into()));
        }
        for &n in &self.sizes {
            for &phi in &self.phis {
                self.market(n, phi, 0).validate().map_err(|source| ExperimentError::Market { n, phi, source })?;
            }
        }
        Ok(())
    }

    fn market(&self, n: usize, phi: f64, trial: usize) -> MarketConfig {
        MarketConfig { n, phi, seed: instance_seed(self.seed, n, phi, trial), ..self.base.clone() }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of one generated market; depends only on its coordinates in the sweep.
pub fn instance_seed(seed: u64, n: usize, phi: f64, trial: usize) -> u64 {
    [n as u64, phi.to_bits(), trial as u64].iter().fold(splitmix64(seed), |h, &x| splitmix64(h ^ x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub n: usize,
    pub phi: f64,
    pub algorithm: SweepAlgorithm,
    pub trials: usize,
    pub success: usize,
    pub skipped: bool,
    /// Seconds, over successful runs only.
    pub time_mean: Option<f64>,
    pub time_std: Option<f64>,
    pub failures: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ExperimentReport {
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Clone)]
struct RunRecord {
    success: bool,
    failure: Option<String>,
    seconds: f64,
}

fn run_one(inst: &Instance, alg: SweepAlgorithm, budget: SearchBudget) -> RunRecord {
    let timed = |f: &dyn Fn() -> (bool, Option<String>)| {
        let t = Instant::now();
        let (success, failure) = f();
        RunRecord { success, failure, seconds: t.elapsed().as_secs_f64() }
    };
    let heuristic = |a: Algorithm, verify: Option<StabilityMode>| {
        let out = a.run(inst);
        match (out.matching(), verify) {
            (Some(m), Some(mode)) if !is_stable(inst, m, mode) => (false, Some("unverified".to_string())),
            (Some(_), _) => (true, None),
            (None, _) => (false, out.failure().map(|f| f.label().to_string())),
        }
    };
    let exact = |mode: StabilityMode| match find_stable(inst, mode, budget) {
        SolverResult::Found(_) => (true, None),
        SolverResult::NoneExists => (false, Some("none".to_string())),
        SolverResult::BudgetExceeded { .. } => (false, Some("budget".to_string())),
    };
    let result = catch_unwind(AssertUnwindSafe(|| match alg {
        SweepAlgorithm::Da => timed(&|| heuristic(Algorithm::Da, None)),
        SweepAlgorithm::Sc => timed(&|| heuristic(Algorithm::Sc, None)),
        SweepAlgorithm::Sda => timed(&|| heuristic(Algorithm::Sda, Some(StabilityMode::Abh))),
        SweepAlgorithm::Esda => timed(&|| heuristic(Algorithm::Esda, Some(StabilityMode::Ours))),
        SweepAlgorithm::ExactOurs => timed(&|| exact(StabilityMode::Ours)),
        SweepAlgorithm::ExactAbh => timed(&|| exact(StabilityMode::Abh)),
    }));
    result.unwrap_or(RunRecord { success: false, failure: Some("harness_error".into()), seconds: 0.0 })
}

pub fn run_sweep(spec: &SweepSpec) -> Result<ExperimentReport, ExperimentError> {
    spec.validate()?;
    let jobs: Vec<(usize, usize, usize)> = (0..spec.sizes.len())
        .flat_map(|s| (0..spec.phis.len()).flat_map(move |p| (0..spec.trials).map(move |t| (s, p, t))))
        .collect();
    let results: Vec<Vec<Option<RunRecord>>> = jobs
        .par_iter()
        .map(|&(s, p, t)| {
            let (n, phi) = (spec.sizes[s], spec.phis[p]);
            let cfg = spec.market(n, phi, t);
            let generated = catch_unwind(AssertUnwindSafe(|| gen_instance(&cfg)));
            spec.algorithms
                .iter()
                .map(|&alg| {
                    if alg.is_exact() && n > spec.exact_cap {
                        return None;
                    }
                    Some(match &generated {
                        Ok(Ok(g)) => run_one(&g.instance, alg, spec.budget),
                        _ => RunRecord { success: false, failure: Some("harness_error".into()), seconds: 0.0 },
                    })
                })
                .collect()
        })
        .collect();

    let mut cells = Vec::new();
    for (s, &n) in spec.sizes.iter().enumerate() {
        for (p, &phi) in spec.phis.iter().enumerate() {
            let base = (s * spec.phis.len() + p) * spec.trials;
            for (a, &alg) in spec.algorithms.iter().enumerate() {
                let runs: Vec<&RunRecord> =
                    results[base..base + spec.trials].iter().filter_map(|r| r[a].as_ref()).collect();
                cells.push(aggregate(n, phi, alg, spec.trials, &runs));
            }
        }
    }
    Ok(ExperimentReport { cells })
}

fn aggregate(n: usize, phi: f64, algorithm: SweepAlgorithm, trials: usize, runs: &[&RunRecord]) -> CellReport {
    let skipped = runs.is_empty();
    let times: Vec<f64> = runs.iter().filter(|r| r.success).map(|r| r.seconds).collect();
    let mut failures = BTreeMap::new();
    for r in runs.iter().filter(|r| !r.success) {
        *failures.entry(r.failure.clone().unwrap_or_else(|| "unknown".into())).or_insert(0) += 1;
    }
    let (time_mean, time_std) = if times.is_empty() {
        (None, None)
    } else {
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let var = if times.len() > 1 {
            times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (times.len() - 1) as f64
        } else {
            0.0
        };
        (Some(mean), Some(var.sqrt()))
    };
    CellReport { n, phi, algorithm, trials, success: times.len(), skipped, time_mean, time_std, failures }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

pub const CSV_HEADER: &str = "n,phi,algorithm,success,trials,time_mean,time_std,failures";

fn histogram(failures: &BTreeMap<String, usize>) -> String {
    failures.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn seconds(x: Option<f64>) -> String {
    x.map(|t| format!("{t:.6}")).unwrap_or_default()
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn render_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &report.cells {
        let success = if c.skipped { "skipped".to_string() } else { c.success.to_string() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.n,
            c.phi,
            c.algorithm.name(),
            success,
            c.trials,
            seconds(c.time_mean),
            seconds(c.time_std),
            histogram(&c.failures)
        );
    }
    out
}

/// One row per (n, algorithm), one Success/Time column pair per φ.
fn render_markdown(report: &ExperimentReport) -> String {
    let mut phis: Vec<f64> = Vec::new();
    let mut rows: Vec<(usize, SweepAlgorithm)> = Vec::new();
    for c in &report.cells {
        if !phis.contains(&c.phi) {
            phis.push(c.phi);
        }
        if !rows.contains(&(c.n, c.algorithm)) {
            rows.push((c.n, c.algorithm));
        }
    }
    let mut out = String::from("| #children | Algorithm |");
    for phi in &phis {
        let _ = write!(out, " φ = {phi:.1} Success | Time (s) |");
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---:|---:|".repeat(phis.len()));
    out.push('\n');
    let mut last_n = None;
    for &(n, alg) in &rows {
        let label = if last_n == Some(n) { String::new() } else { n.to_string() };
        last_n = Some(n);
        let _ = write!(out, "| {label} | {} |", alg.name().to_uppercase());
        for &phi in &phis {
            match report.cells.iter().find(|c| c.n == n && c.algorithm == alg && c.phi == phi) {
                Some(c) if c.skipped => out.push_str(" skipped | |"),
                Some(c) => {
                    let time = match (c.time_mean, c.time_std) {
                        (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
                        _ => "nan ± nan".to_string(),
                    };
                    let _ = write!(out, " {}/{} | {time} |", c.success, c.trials);
                }
                None => out.push_str(" | |"),
            }
        }
        out.push('\n');
    }
    out
}

use rayon::prelude::*;

use super::config::{ExperimentConfig, InitConfig, ProblemConfig, RunKind, RunSpec};
use crate::chaining::{run_fedchain, run_partial_fedavg_sgd};
use crate::error::{Error, Result};
use crate::federation::{Env, FederatedProblem, OracleConfig};
use crate::metrics::fit_rate_slope;
use crate::objectives::{
    initial_point_with_gap, make_hard_instance, make_hard_problem, make_pl_problem, make_shuffle_federation,
    make_synthetic_federation, make_two_client_toy, HardInstance,
};
use crate::optimizers::{run_optimizer, RunOutput};
use crate::trace::Trace;
use crate::vector::Vector;

pub fn build_problem(cfg: &ProblemConfig) -> Result<FederatedProblem> {
    match cfg {
        ProblemConfig::Toy => Ok(make_two_client_toy()),
        ProblemConfig::Pl => Ok(make_pl_problem()),
        ProblemConfig::Synthetic(spec) => make_synthetic_federation(spec),
        ProblemConfig::Shuffle(spec) => make_shuffle_federation(spec),
        ProblemConfig::Hard {
            l2,
            zeta_hat,
            mu,
            rounds,
            dim,
        } => {
            let mu = mu.unwrap_or_else(|| HardInstance::convex_case_mu(*l2, *rounds));
            let dim = match dim {
                Some(d) => *d,
                None => HardInstance::required_dim(*l2, mu, *rounds)?,
            };
            make_hard_problem(&make_hard_instance(*l2, *zeta_hat, mu, dim)?)
        }
    }
}

pub fn initial_point(cfg: &InitConfig, problem: &FederatedProblem) -> Result<Vector> {
    let x0 = match cfg {
        InitConfig::Zero => Vector::zeros(problem.dim()),
        InitConfig::Gap { gap, seed } => initial_point_with_gap(problem, *gap, *seed)?,
        InitConfig::Point(p) => p.clone(),
    };
    if x0.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: x0.dim(),
        });
    }
    Ok(x0)
}

/// Runs one spec on a fresh environment.
pub fn execute(
    spec: &RunSpec,
    problem: &FederatedProblem,
    oracle: OracleConfig,
    seed: u64,
    x0: &Vector,
) -> Result<RunOutput> {
    execute_in(spec, &mut Env::new(problem, oracle, seed), x0)
}

/// Runs one spec on a caller-supplied environment (e.g. one with a query log).
pub fn execute_in(spec: &RunSpec, env: &mut Env, x0: &Vector) -> Result<RunOutput> {
    match &spec.kind {
        RunKind::Single(s) => run_optimizer(s, env, x0),
        RunKind::Chain(c) => run_fedchain(c, env, x0).map(Into::into),
        RunKind::Partial(p) => {
            let mut p = p.clone();
            if p.eta1.is_nan() {
                let beta = env.problem.smoothness();
                let mu = p.mu.unwrap_or_else(|| env.problem.strong_convexity());
                p.eta1 = mu / (8.0 * beta * beta);
            }
            run_partial_fedavg_sgd(&p, env, x0).map(Into::into)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Position of the spec in the config.
    pub index: usize,
    pub label: String,
    pub method: String,
    pub repeat: usize,
    pub seed: u64,
    pub output: RunOutput,
}

impl RunResult {
    pub fn file_stem(&self) -> String {
        format!("{}-seed{}", self.label, self.seed)
    }
}

/// Seed of repeat `rep`.
pub fn repeat_seed(base: u64, rep: usize) -> u64 {
    base.wrapping_add(rep as u64)
}

/// Runs every spec and repeat, in parallel, returning results in config order
/// (spec-major). The first failing job in that order decides the error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    let problem = build_problem(&cfg.problem)?;
    let x0 = initial_point(&cfg.init, &problem)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.runs.len())
        .flat_map(|i| (0..cfg.repeat).map(move |r| (i, r)))
        .collect();
    let outcomes: Vec<Result<RunResult>> = jobs
        .par_iter()
        .map(|&(i, rep)| {
            let spec = &cfg.runs[i];
            let seed = repeat_seed(cfg.seed, rep);
            execute(spec, &problem, cfg.oracle, seed, &x0).map(|output| RunResult {
                index: i,
                label: spec.label.clone(),
                method: spec.method_name(),
                repeat: rep,
                seed,
                output,
            })
        })
        .collect();
    outcomes.into_iter().collect()
}

/// Slope over `window`, or over the longest prefix of positive suboptimality.
pub fn trace_slope(trace: &Trace, window: Option<(usize, usize)>) -> Option<f64> {
    let range = match window {
        Some((a, b)) => a..b,
        None => {
            let end = trace
                .records
                .iter()
                .position(|r| !r.suboptimality.is_some_and(|s| s > 0.0 && s.is_finite()))
                .unwrap_or(trace.records.len());
            let last_round = if end == 0 { 0 } else { trace.records[end - 1].round + 1 };
            0..last_round
        }
    };
    fit_rate_slope(trace, range).ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub method: String,
    pub seed: u64,
    pub rounds: usize,
    pub final_suboptimality: Option<f64>,
    pub slope: Option<f64>,
    pub grad_calls: u64,
    pub value_calls: u64,
}

pub fn summarize(cfg: &ExperimentConfig, results: &[RunResult]) -> Vec<SummaryRow> {
    results
        .iter()
        .map(|r| {
            let last = r.output.trace.last().expect("traces start with round 0");
            SummaryRow {
                label: r.label.clone(),
                method: r.method.clone(),
                seed: r.seed,
                rounds: last.round,
                final_suboptimality: last.suboptimality,
                slope: trace_slope(&r.output.trace, cfg.slope_window),
                grad_calls: last.grad_oracle_calls,
                value_calls: last.value_oracle_calls,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub rank: usize,
    pub label: String,
    pub method: String,
    pub median_final: Option<f64>,
    pub median_slope: Option<f64>,
    /// Oracle calls of the first repeat; identical across repeats.
    pub grad_calls: u64,
    pub value_calls: u64,
}

/// Median of the finite values; the upper median for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

/// Ranks specs by median final suboptimality; ties keep config order and
/// specs without a known optimum go last.
pub fn compare(cfg: &ExperimentConfig, results: &[RunResult]) -> Result<Vec<CompareRow>> {
    if cfg.runs.len() < 2 {
        return Err(Error::Config("compare needs at least two optimizer specs".into()));
    }
    let summary = summarize(cfg, results);
    let mut rows: Vec<(usize, CompareRow)> = cfg
        .runs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let mine: Vec<&SummaryRow> = results
                .iter()
                .zip(&summary)
                .filter(|(r, _)| r.index == i)
                .map(|(_, s)| s)
                .collect();
            let finals: Vec<f64> = mine.iter().filter_map(|s| s.final_suboptimality).collect();
            let slopes: Vec<f64> = mine.iter().filter_map(|s| s.slope).collect();
            let first = mine.first().copied();
            (
                i,
                CompareRow {
                    rank: 0,
                    label: spec.label.clone(),
                    method: spec.method_name(),
                    median_final: median(&finals),
                    median_slope: median(&slopes),
                    grad_calls: first.map_or(0, |s| s.grad_calls),
                    value_calls: first.map_or(0, |s| s.value_calls),
                },
            )
        })
        .collect();
    rows.sort_by(|(ia, a), (ib, b)| {
        let key = |r: &CompareRow| r.median_final.unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b)).then(ia.cmp(ib))
    });
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(rank, (_, mut row))| {
            row.rank = rank + 1;
            row
        })
        .collect())
}

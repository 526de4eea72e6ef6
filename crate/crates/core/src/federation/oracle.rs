use rand::Rng;

use super::problem::FederatedProblem;
use crate::error::{invalid, Result};
use crate::rng::{Purpose, RngStream, StreamId};
use crate::vector::Vector;

/// Noise levels of the stochastic oracles. Both are isotropic Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleConfig {
    /// Gradient noise: `E‖g̃ − ∇F_i‖² = σ²` for a single sample.
    pub sigma: f64,
    /// Value noise standard deviation for a single sample.
    pub sigma_f: f64,
}

impl OracleConfig {
    pub fn exact() -> Self {
        OracleConfig::default()
    }

    pub fn new(sigma: f64, sigma_f: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite() && sigma_f >= 0.0 && sigma_f.is_finite()) {
            return Err(invalid("oracle noise levels must be finite and nonnegative"));
        }
        Ok(OracleConfig { sigma, sigma_f })
    }
}

/// Uniform `count`-subset of `0..total` by partial Fisher–Yates, returned in
/// draw order.
pub fn sample_clients(total: usize, count: usize, stream: RngStream) -> Result<Vec<usize>> {
    if count == 0 || count > total {
        return Err(invalid(format!("cannot sample {count} of {total} clients")));
    }
    let mut idx: Vec<usize> = (0..total).collect();
    if count == total {
        return Ok(idx);
    }
    let mut rng = stream.rng();
    for i in 0..count {
        let j = rng.random_range(i..total);
        idx.swap(i, j);
    }
    idx.truncate(count);
    Ok(idx)
}

/// Average of `k` noisy gradient samples of client `i` at `x`.
///
/// The `k` isotropic samples are aggregated in distribution: one standard
/// normal vector scaled by `σ/√(d·k)` per coordinate.
pub fn grad_query(
    problem: &FederatedProblem,
    i: usize,
    x: &Vector,
    k: usize,
    config: &OracleConfig,
    stream: RngStream,
) -> Vector {
    let mut g = problem.client(i).grad(x);
    if config.sigma > 0.0 {
        let d = x.dim() as f64;
        let scale = config.sigma / (d * k.max(1) as f64).sqrt();
        g.add_scaled(scale, &stream.gaussian(x.dim()));
    }
    g
}

/// Noisy average of client values over `subset`, `k` samples each.
///
/// Each client's noise is drawn from `noise(i)`, so callers that pass the same
/// stream family for two points evaluate them with the same sample draws.
pub fn value_query<F>(
    problem: &FederatedProblem,
    subset: &[usize],
    x: &Vector,
    k: usize,
    config: &OracleConfig,
    noise: F,
) -> Result<f64>
where
    F: Fn(usize) -> RngStream,
{
    if subset.is_empty() {
        return Err(invalid("value query needs a nonempty client subset"));
    }
    if k == 0 {
        return Err(invalid("value query needs at least one sample"));
    }
    let per_client = config.sigma_f / (k as f64).sqrt();
    let mut total = 0.0;
    for &i in subset {
        let mut v = problem.client(i).value(x);
        if config.sigma_f > 0.0 {
            v += per_client * noise(i).gaussian(1)[0];
        }
        total += v;
    }
    Ok(total / subset.len() as f64)
}

/// Communication slot of a gradient query, ordered in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comm {
    /// Control-variate initialisation just before round `r`.
    WarmStart(usize),
    Main(usize),
    Refresh(usize),
}

impl Comm {
    /// Total order key: warm start, main and refresh slots per round.
    pub fn key(&self) -> usize {
        match self {
            Comm::WarmStart(r) => 3 * r,
            Comm::Main(r) => 3 * r + 1,
            Comm::Refresh(r) => 3 * r + 2,
        }
    }

    pub fn round(&self) -> usize {
        match self {
            Comm::WarmStart(r) | Comm::Main(r) | Comm::Refresh(r) => *r,
        }
    }
}

/// One gradient query: where a client evaluated and what it saw.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEvent {
    pub comm: Comm,
    pub client: usize,
    pub step: usize,
    pub point: Vector,
    pub grad: Vector,
}

/// Per-step record of a run, used by the support and distance audits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryLog {
    pub events: Vec<QueryEvent>,
    /// Server-side output iterate after each round (`(round, x)`, round ≥ 1);
    /// round 0 is the initial point.
    pub iterates: Vec<(usize, Vector)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub grad: u64,
    pub value: u64,
}

/// Execution context shared by the optimizers of one run.
#[derive(Debug)]
pub struct Env<'a> {
    pub problem: &'a FederatedProblem,
    pub oracle: OracleConfig,
    pub seed: u64,
    /// Separates the random streams of chained phases and repeats.
    pub phase: u32,
    pub counters: Counters,
    pub log: Option<QueryLog>,
}

impl<'a> Env<'a> {
    pub fn new(problem: &'a FederatedProblem, oracle: OracleConfig, seed: u64) -> Self {
        Env {
            problem,
            oracle,
            seed,
            phase: 0,
            counters: Counters::default(),
            log: None,
        }
    }

    pub fn with_log(mut self) -> Self {
        self.log = Some(QueryLog::default());
        self
    }

    pub fn stream(&self, id: StreamId) -> RngStream {
        RngStream::new(self.seed, id.phase(self.phase))
    }

    pub fn sample(&self, round: usize, count: usize, purpose: Purpose) -> Result<Vec<usize>> {
        let stream = self.stream(StreamId::new(purpose).round(round));
        sample_clients(self.problem.n_clients(), count, stream)
    }

    /// Noise stream for one gradient query.
    pub fn grad_stream(&self, purpose: Purpose, client: usize, round: usize, step: usize) -> RngStream {
        self.stream(StreamId::new(purpose).client(client).round(round).step(step))
    }

    pub fn logging(&self) -> bool {
        self.log.is_some()
    }

    pub fn record(&mut self, events: impl IntoIterator<Item = QueryEvent>) {
        if let Some(log) = &mut self.log {
            log.events.extend(events);
        }
    }

    pub fn record_iterate(&mut self, round: usize, x: &Vector) {
        if let Some(log) = &mut self.log {
            log.iterates.push((round, x.clone()));
        }
    }
}

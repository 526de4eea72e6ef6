//! Local-then-global chaining: run a local-update method, keep the better of
//! its output and the starting point, and finish with a global-update method.

use crate::error::{invalid, Error, Result};
use crate::federation::{value_query, Comm, Env, QueryEvent};
use crate::optimizers::{check_start, measure, query_batch, run_phase, OptimizerSpec, RunOutput};
use crate::rng::{Purpose, StreamId};
use crate::trace::{Phase, Trace, TraceEvent};
use crate::vector::Vector;

/// Whether the two candidates see the same sample draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionNoise {
    /// Same clients and same draws for both points.
    #[default]
    Shared,
    /// Same clients, independent draws per point.
    Independent,
}

/// Value-query comparison between the start and the local-phase output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    /// `S`, clients in the comparison subset.
    pub clients: usize,
    /// `K̂`, value samples per client and point.
    pub samples: usize,
    pub noise: SelectionNoise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    pub point: Vector,
    pub picked_local: bool,
    /// Estimated values at `(x0, x_half)`.
    pub estimates: (f64, f64),
}

/// Picks whichever of `x0`, `x_half` has the smaller estimated value on one
/// shared client subset; ties go to `x_half`. Charges `2·S·K̂` value calls.
pub fn select_better(env: &mut Env, x0: &Vector, x_half: &Vector, selection: &Selection) -> Result<Selected> {
    if selection.samples == 0 {
        return Err(invalid("selection needs at least one sample per client"));
    }
    let subset = env.sample(0, selection.clients, Purpose::SelectionSample)?;
    let view: &Env = env;
    let stream = |point: usize| {
        let step = match selection.noise {
            SelectionNoise::Shared => 0,
            SelectionNoise::Independent => point,
        };
        move |i: usize| view.stream(StreamId::new(Purpose::ValueNoise).client(i).step(step))
    };
    let k = selection.samples;
    let v0 = value_query(view.problem, &subset, x0, k, &view.oracle, stream(0))?;
    let v_half = value_query(view.problem, &subset, x_half, k, &view.oracle, stream(1))?;
    env.counters.value += 2 * (subset.len() * k) as u64;
    let picked_local = v_half <= v0;
    Ok(Selected {
        point: if picked_local { x_half.clone() } else { x0.clone() },
        picked_local,
        estimates: (v0, v_half),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub local: OptimizerSpec,
    pub global: OptimizerSpec,
    /// Defaults to the local method's `S` and `K`.
    pub selection: Option<Selection>,
}

impl ChainConfig {
    pub fn new(local: OptimizerSpec, global: OptimizerSpec) -> Self {
        ChainConfig {
            local,
            global,
            selection: None,
        }
    }

    /// Splits `total` rounds evenly, the extra round going to the global phase.
    pub fn split(local: OptimizerSpec, global: OptimizerSpec, total: usize) -> Self {
        let r_local = total / 2;
        Self::new(local.with_rounds(r_local), global.with_rounds(total - r_local))
    }

    pub fn selection(&self) -> Selection {
        self.selection.unwrap_or(Selection {
            clients: self.local.plan.clients,
            samples: self.local.plan.local_steps,
            noise: SelectionNoise::Shared,
        })
    }

    pub fn total_rounds(&self) -> usize {
        self.local.rounds + self.global.rounds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub x: Vector,
    pub trace: Trace,
    pub x_half: Vector,
    pub x_selected: Vector,
    pub picked_local: bool,
}

impl From<ChainOutput> for RunOutput {
    fn from(c: ChainOutput) -> Self {
        RunOutput { x: c.x, trace: c.trace }
    }
}

/// Stream namespaces of the two chained phases.
const LOCAL_PHASE: u32 = 1;
const GLOBAL_PHASE: u32 = 2;

pub fn run_fedchain(config: &ChainConfig, env: &mut Env, x0: &Vector) -> Result<ChainOutput> {
    check_start(env, x0)?;
    let base_phase = env.phase;
    let mut trace = Trace::default();
    trace.records.push(measure(env, x0, 0, Phase::Init));
    env.record_iterate(0, x0);

    env.phase = base_phase + LOCAL_PHASE;
    let local = run_phase(&config.local, env, x0, Phase::Local, 0, &mut trace);
    let x_half = match local {
        Ok(x) => x,
        Err(e) => {
            env.phase = base_phase;
            return Err(e);
        }
    };
    let selected = select_better(env, x0, &x_half, &config.selection());
    let selected = match selected {
        Ok(s) => s,
        Err(e) => {
            env.phase = base_phase;
            return Err(e);
        }
    };
    let boundary = config.local.rounds;
    trace.events.push(TraceEvent::PhaseBoundary {
        round: boundary,
        picked_local: selected.picked_local,
    });

    env.phase = base_phase + GLOBAL_PHASE;
    let global = run_phase(
        &config.global,
        env,
        &selected.point,
        Phase::Global,
        boundary,
        &mut trace,
    );
    env.phase = base_phase;
    let x = global?;
    if let Some(last) = trace.records.last_mut() {
        // Selection's value calls land on the final record even if the
        // global phase is empty.
        last.value_oracle_calls = env.counters.value;
    }
    Ok(ChainOutput {
        x,
        trace,
        x_half,
        x_selected: selected.point,
        picked_local: selected.picked_local,
    })
}

/// Server stepsizes of the second phase.
#[derive(Debug, Clone, PartialEq)]
pub enum Phase2Stepsize {
    Constant(f64),
    /// `η⁽²⁾_r` for `r = 1, …, R−1`.
    Schedule(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialChainConfig {
    /// `η⁽¹⁾`, the single client's local stepsize.
    pub eta1: f64,
    /// Strong convexity used in the weights; defaults to the problem's.
    pub mu: Option<f64>,
    /// `K`, local steps in phase 1 and gradients per client in phase 2.
    pub local_steps: usize,
    pub eta2: Phase2Stepsize,
    /// `S`, clients per phase-2 round.
    pub clients: usize,
    /// Total rounds `R`, the first being the single-client round.
    pub rounds: usize,
}

/// Normalised phase-one weights `w_k/W_K`, `w_k = (1 − ημ/4)^{−k}`, `k = 1..K`.
pub fn phase_one_weights(eta: f64, mu: f64, k: usize) -> Vec<f64> {
    let shrink = 1.0 - eta * mu / 4.0;
    // w_k/w_K = shrink^{K−k}, computed from the newest weight down.
    let mut w: Vec<f64> = (1..=k).map(|j| shrink.powi((k - j) as i32)).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// One uniformly chosen client runs `K` weighted-averaged local GD steps from
/// `x0`; the server then runs SGD rounds over `S` clients with exact gradients.
pub fn run_partial_fedavg_sgd(config: &PartialChainConfig, env: &mut Env, x0: &Vector) -> Result<ChainOutput> {
    check_start(env, x0)?;
    let problem = env.problem;
    if env.oracle.sigma != 0.0 {
        return Err(Error::Config(
            "partial-participation chaining assumes exact gradients (sigma = 0)".into(),
        ));
    }
    let beta = problem.smoothness();
    let mu = config.mu.unwrap_or_else(|| problem.strong_convexity());
    if !(mu > 0.0) {
        return Err(Error::Config("partial-participation chaining needs mu > 0".into()));
    }
    let limit = mu / (8.0 * beta * beta);
    if !(config.eta1 > 0.0 && config.eta1 <= limit * (1.0 + 1e-12)) {
        return Err(Error::Config(format!(
            "phase-1 stepsize {} exceeds mu/(8 beta^2) = {limit}",
            config.eta1
        )));
    }
    if config.local_steps == 0 || config.rounds == 0 {
        return Err(invalid("partial chaining needs K >= 1 and R >= 1"));
    }
    let schedule = |r: usize| -> Result<f64> {
        match &config.eta2 {
            Phase2Stepsize::Constant(e) => Ok(*e),
            Phase2Stepsize::Schedule(v) => v
                .get(r - 1)
                .copied()
                .ok_or_else(|| Error::Config(format!("phase-2 schedule has no stepsize for round {r}"))),
        }
    };

    let mut trace = Trace::default();
    trace.records.push(measure(env, x0, 0, Phase::Init));
    env.record_iterate(0, x0);

    let j = env.sample(0, 1, Purpose::ClientSample)?[0];
    let shrink = 1.0 - config.eta1 * mu / 4.0;
    let mut x = x0.clone();
    let mut avg = x0.clone();
    let mut ratio = 0.0;
    let mut events = Vec::new();
    for k in 0..config.local_steps {
        let g = problem.client(j).grad(&x);
        if env.logging() {
            events.push(QueryEvent {
                comm: Comm::Main(0),
                client: j,
                step: k,
                point: x.clone(),
                grad: g.clone(),
            });
        }
        x.add_scaled(-config.eta1, &g);
        // W_k/w_k = 1 + shrink·W_{k−1}/w_{k−1}.
        ratio = 1.0 + shrink * ratio;
        avg = x.lerp(1.0 / ratio, &avg);
    }
    env.counters.grad += config.local_steps as u64;
    env.record(events);
    if !avg.is_finite() {
        return Err(Error::NonFinite { round: 1 });
    }
    let x_half = avg;
    env.record_iterate(1, &x_half);
    trace.records.push(measure(env, &x_half, 1, Phase::Local));
    trace.events.push(TraceEvent::PhaseBoundary {
        round: 1,
        picked_local: true,
    });

    let mut x = x_half.clone();
    for r in 1..config.rounds {
        let eta = schedule(r)?;
        let clients = env.sample(r, config.clients, Purpose::ClientSample)?;
        let points = vec![x.clone(); clients.len()];
        let grads = query_batch(
            env,
            Comm::Main(r),
            Purpose::GradNoise,
            &clients,
            &points,
            config.local_steps,
        );
        let g = Vector::mean(&grads).expect("at least one client");
        x.add_scaled(-eta, &g);
        if !x.is_finite() {
            return Err(Error::NonFinite { round: r + 1 });
        }
        env.record_iterate(r + 1, &x);
        trace.records.push(measure(env, &x, r + 1, Phase::Global));
    }
    Ok(ChainOutput {
        x,
        trace,
        x_selected: x_half.clone(),
        x_half,
        picked_local: true,
    })
}

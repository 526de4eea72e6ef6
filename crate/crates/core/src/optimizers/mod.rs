//! Single-method optimizers as round-step functions over explicit state, plus
//! the stepsize-halving multistage wrapper and the rate-derived stepsize presets.

mod asg;
mod fedavg;
mod multistage;
mod presets;
mod saga;
mod sgd;
mod ssnm;


use rayon::prelude::*;

pub use asg::{asg_round, AsgSchedule, AsgStagePlan, AsgState};
pub use fedavg::{fedavg_round, integer_sqrt, FedAvgState};
pub use multistage::{stage_lengths, MultistageSchedule};
pub use presets::{
    asg_stage_plan, fedavg_preset, saga_preset, sgd_preset, ssnm_preset, update_variance, ProblemConstants,
};
pub use saga::{saga_round, variance_reduced_estimate, SagaOption, SagaState};
pub use sgd::{sgd_round, Averaging, SgdState};
pub use ssnm::{prox_l2, ssnm_round, SsnmState};

use crate::error::{invalid, Error, Result};
use crate::federation::{grad_query, Comm, Env, QueryEvent};
use crate::rng::Purpose;
use crate::trace::{Phase, RoundRecord, Trace, TraceEvent};
use crate::vector::Vector;

/// Clients and per-client batch of one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundPlan {
    /// `S`, clients sampled per round.
    pub clients: usize,
    /// `K`, gradient samples per client per round.
    pub local_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stepsize {
    Fixed(f64),
    /// Resolved from the method's preset at run time.
    Preset,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Sgd {
        averaging: Averaging,
    },
    Asg {
        schedule: AsgSchedule,
    },
    FedAvg,
    Saga {
        option: SagaOption,
    },
    /// `tau = None` takes the preset momentum.
    Ssnm {
        tau: Option<f64>,
    },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sgd { .. } => "sgd",
            Method::Asg { .. } => "asg",
            Method::FedAvg => "fedavg",
            Method::Saga { .. } => "saga",
            Method::Ssnm { .. } => "ssnm",
        }
    }

    /// Local-update methods take several model steps per round.
    pub fn is_local(&self) -> bool {
        matches!(self, Method::FedAvg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub method: Method,
    pub eta: Stepsize,
    pub plan: RoundPlan,
    pub rounds: usize,
    /// Stepsize-halving restarts (M-SGD, M-FedAvg, M-ASG).
    pub multistage: bool,
}

impl OptimizerSpec {
    pub fn new(method: Method, eta: Stepsize, clients: usize, local_steps: usize, rounds: usize) -> Self {
        OptimizerSpec {
            method,
            eta,
            plan: RoundPlan { clients, local_steps },
            rounds,
            multistage: false,
        }
    }

    pub fn sgd(eta: f64, clients: usize, local_steps: usize, rounds: usize) -> Self {
        Self::new(
            Method::Sgd {
                averaging: Averaging::Last,
            },
            Stepsize::Fixed(eta),
            clients,
            local_steps,
            rounds,
        )
    }

    pub fn fedavg(eta: f64, clients: usize, local_steps: usize, rounds: usize) -> Self {
        Self::new(Method::FedAvg, Stepsize::Fixed(eta), clients, local_steps, rounds)
    }

    pub fn asg(clients: usize, local_steps: usize, rounds: usize) -> Self {
        Self::new(
            Method::Asg {
                schedule: AsgSchedule::default(),
            },
            Stepsize::Preset,
            clients,
            local_steps,
            rounds,
        )
    }

    pub fn with_multistage(mut self) -> Self {
        self.multistage = true;
        self
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn validate(&self, n_clients: usize) -> Result<()> {
        let RoundPlan { clients, local_steps } = self.plan;
        if clients == 0 || clients > n_clients {
            return Err(invalid(format!(
                "cannot sample {clients} of {n_clients} clients per round"
            )));
        }
        if local_steps == 0 {
            return Err(invalid("local_steps must be at least 1"));
        }
        if let Stepsize::Fixed(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(invalid(format!("stepsize must be positive and finite, got {eta}")));
            }
        }
        if matches!(self.method, Method::FedAvg) {
            integer_sqrt(local_steps)?;
        }
        Ok(())
    }
}

/// Result of one optimizer (or chain) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub x: Vector,
    pub trace: Trace,
}

/// Round record of `x` against the problem's known optimum.
pub fn measure(env: &Env, x: &Vector, round: usize, phase: Phase) -> RoundRecord {
    let problem = env.problem;
    RoundRecord {
        round,
        suboptimality: problem.excess(x),
        grad_norm_sq: problem.grad(x).norm_sq(),
        dist_sq: problem.x_star().map(|xs| x.dist_sq(xs)),
        grad_oracle_calls: env.counters.grad,
        value_oracle_calls: env.counters.value,
        phase,
    }
}

/// Gradient queries by `clients` at their `points`, evaluated in parallel and
/// returned in client order. Charges `|clients|·k` gradient calls.
pub(crate) fn query_batch(
    env: &mut Env,
    comm: Comm,
    purpose: Purpose,
    clients: &[usize],
    points: &[Vector],
    k: usize,
) -> Vec<Vector> {
    debug_assert_eq!(clients.len(), points.len());
    let round = comm.key();
    let grads: Vec<Vector> = {
        let env: &Env = env;
        clients
            .par_iter()
            .zip(points.par_iter())
            .map(|(&i, x)| grad_query(env.problem, i, x, k, &env.oracle, env.grad_stream(purpose, i, round, 0)))
            .collect()
    };
    env.counters.grad += (clients.len() * k) as u64;
    if env.logging() {
        let events: Vec<QueryEvent> = clients
            .iter()
            .zip(points)
            .zip(&grads)
            .map(|((&client, point), grad)| QueryEvent {
                comm,
                client,
                step: 0,
                point: point.clone(),
                grad: grad.clone(),
            })
            .collect();
        env.record(events);
    }
    grads
}

/// Method state behind the generic driver.
#[derive(Debug, Clone, PartialEq)]
enum State {
    Sgd(SgdState),
    Asg(AsgState),
    FedAvg(FedAvgState),
    Saga(SagaState),
    Ssnm(SsnmState),
}

impl State {
    fn output(&self) -> &Vector {
        match self {
            State::Sgd(s) => s.output(),
            State::Asg(s) => &s.x_ag,
            State::FedAvg(s) => &s.x,
            State::Saga(s) => &s.x,
            State::Ssnm(s) => &s.x,
        }
    }

    fn step(self, env: &mut Env, plan: &RoundPlan, round: usize) -> Result<State> {
        Ok(match self {
            State::Sgd(s) => State::Sgd(sgd_round(s, env, plan, round)?),
            State::Asg(s) => State::Asg(asg_round(s, env, plan, round)?),
            State::FedAvg(s) => State::FedAvg(fedavg_round(s, env, plan, round)?),
            State::Saga(s) => State::Saga(saga_round(s, env, plan, round)?),
            State::Ssnm(s) => State::Ssnm(ssnm_round(s, env, plan, round)?),
        })
    }
}

/// One stretch of rounds run with a fixed parameterisation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Stage {
    rounds: usize,
    /// Stepsize, or `1/(2φ)` for AC-SA.
    eta: f64,
}

fn initial_state(spec: &OptimizerSpec, env: &mut Env, x0: &Vector, eta: f64, round: usize) -> Result<State> {
    let mu = env.problem.strong_convexity();
    Ok(match &spec.method {
        Method::Sgd { averaging } => State::Sgd(SgdState::new(x0.clone(), eta, mu, *averaging)?),
        Method::Asg { .. } => State::Asg(AsgState::new(x0.clone(), mu, 1.0 / (2.0 * eta))?),
        Method::FedAvg => State::FedAvg(FedAvgState::new(x0.clone(), eta, spec.plan.local_steps)?),
        Method::Saga { option } => State::Saga(SagaState::warm_start(
            env,
            x0.clone(),
            eta,
            *option,
            spec.plan.local_steps,
            round,
        )?),
        Method::Ssnm { tau } => {
            let tau = match tau {
                Some(t) => *t,
                None => ssnm_preset(env.problem, &spec.plan)?.1,
            };
            State::Ssnm(SsnmState::warm_start(
                env,
                x0.clone(),
                eta,
                tau,
                mu,
                spec.plan.local_steps,
                round,
            )?)
        }
    })
}

fn resolve_eta(spec: &OptimizerSpec, env: &Env, x0: &Vector) -> Result<f64> {
    let eta = match (&spec.eta, &spec.method) {
        (Stepsize::Fixed(eta), _) => *eta,
        (Stepsize::Preset, Method::Sgd { .. }) => sgd_preset(env.problem, &env.oracle, &spec.plan, spec.rounds, x0)?,
        (Stepsize::Preset, Method::FedAvg) => fedavg_preset(env.problem),
        (Stepsize::Preset, Method::Saga { .. }) => saga_preset(env.problem, &env.oracle, &spec.plan, spec.rounds, x0)?,
        (Stepsize::Preset, Method::Ssnm { .. }) => ssnm_preset(env.problem, &spec.plan)?.0,
        // AC-SA stage parameters come from its own schedule; the base value
        // here only drives the stepsize-halving wrapper (φ = 1/(2η)).
        (Stepsize::Preset, Method::Asg { .. }) => 1.0 / (4.0 * env.problem.smoothness()),
    };
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!(
            "{} stepsize evaluated to {eta}",
            spec.method.name()
        )));
    }
    Ok(eta)
}

fn plan_stages(spec: &OptimizerSpec, env: &Env, x0: &Vector, eta: f64) -> Result<(Vec<Stage>, bool)> {
    if spec.multistage {
        let mu = env.problem.strong_convexity();
        let k_eff = if spec.method.is_local() {
            spec.plan.local_steps
        } else {
            1
        };
        let sched = MultistageSchedule::new(eta, mu, k_eff)?;
        let (lengths, truncated) = sched.fit(spec.rounds);
        let stages = lengths
            .iter()
            .enumerate()
            .map(|(s, &rounds)| Stage {
                rounds,
                eta: sched.eta(s + 1),
            })
            .collect();
        return Ok((stages, truncated));
    }
    if let Method::Asg {
        schedule: AsgSchedule::Multistage { delta, zeta },
    } = &spec.method
    {
        let plan = asg_stage_plan(env.problem, &env.oracle, &spec.plan, x0, *delta, *zeta)?;
        let mut stages = Vec::new();
        let mut left = spec.rounds;
        let mut s = 1;
        while left > 0 {
            let (len, phi) = plan.stage(s);
            let len = len.min(left);
            stages.push(Stage {
                rounds: len,
                eta: 1.0 / (2.0 * phi),
            });
            left -= len;
            s += 1;
        }
        let truncated = stages.len() == 1 && plan.stage(1).0 > spec.rounds;
        return Ok((stages, truncated));
    }
    if let Method::Asg {
        schedule: AsgSchedule::Fixed { phi },
    } = &spec.method
    {
        return Ok((
            vec![Stage {
                rounds: spec.rounds,
                eta: 1.0 / (2.0 * phi),
            }],
            false,
        ));
    }
    Ok((
        vec![Stage {
            rounds: spec.rounds,
            eta,
        }],
        false,
    ))
}

pub(crate) fn check_start(env: &Env, x0: &Vector) -> Result<()> {
    if x0.dim() != env.problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: env.problem.dim(),
            found: x0.dim(),
        });
    }
    Ok(())
}

/// Runs `spec` from `x0`, appending rounds `offset+1 ..= offset+R` to `trace`.
/// The caller records round `offset` itself.
pub(crate) fn run_phase(
    spec: &OptimizerSpec,
    env: &mut Env,
    x0: &Vector,
    phase: Phase,
    offset: usize,
    trace: &mut Trace,
) -> Result<Vector> {
    spec.validate(env.problem.n_clients())?;
    check_start(env, x0)?;
    if spec.rounds == 0 {
        return Ok(x0.clone());
    }
    let eta = resolve_eta(spec, env, x0)?;
    let (stages, truncated) = plan_stages(spec, env, x0, eta)?;
    if truncated {
        trace.events.push(TraceEvent::TruncatedStage {
            round: offset,
            planned: spec.rounds,
        });
    }
    let mut x = x0.clone();
    let mut round = offset;
    for (s, stage) in stages.iter().enumerate() {
        if stages.len() > 1 || spec.multistage {
            trace.events.push(TraceEvent::StageBoundary {
                round,
                stage: s + 1,
                eta: stage.eta,
            });
        }
        let mut state = initial_state(spec, env, &x, stage.eta, round)?;
        for _ in 0..stage.rounds {
            state = state.step(env, &spec.plan, round)?;
            round += 1;
            let out = state.output();
            if !out.is_finite() {
                return Err(Error::NonFinite { round });
            }
            env.record_iterate(round, out);
            trace.records.push(measure(env, out, round, phase));
        }
        x = state.output().clone();
    }
    Ok(x)
}

/// Runs a single optimizer from `x0`; the trace starts with round 0.
pub fn run_optimizer(spec: &OptimizerSpec, env: &mut Env, x0: &Vector) -> Result<RunOutput> {
    check_start(env, x0)?;
    let mut trace = Trace::default();
    trace.records.push(measure(env, x0, 0, Phase::Init));
    env.record_iterate(0, x0);
    let x = run_phase(spec, env, x0, Phase::Single, 0, &mut trace)?;
    Ok(RunOutput { x, trace })
}

/// One configuration of every shipped method for a two-client problem with
/// smoothness `beta`: SGD, FedAvg (K = 4), ASG, both SAGA options and SSNM,
/// the last three with one client per round.
pub fn optimizer_suite(beta: f64, rounds: usize) -> Vec<OptimizerSpec> {
    vec![
        OptimizerSpec::sgd(1.0 / beta, 2, 1, rounds),
        OptimizerSpec::fedavg(0.5 / beta, 2, 4, rounds),
        OptimizerSpec::new(
            Method::Asg {
                schedule: AsgSchedule::Fixed { phi: 2.0 * beta },
            },
            Stepsize::Preset,
            2,
            1,
            rounds,
        ),
        OptimizerSpec::new(
            Method::Saga {
                option: SagaOption::One,
            },
            Stepsize::Fixed(0.3 / beta),
            1,
            1,
            rounds,
        ),
        OptimizerSpec::new(
            Method::Saga {
                option: SagaOption::Two,
            },
            Stepsize::Fixed(0.3 / beta),
            1,
            1,
            rounds,
        ),
        OptimizerSpec::new(
            Method::Ssnm { tau: Some(0.5) },
            Stepsize::Fixed(0.1 / beta),
            1,
            1,
            rounds,
        ),
    ]
}

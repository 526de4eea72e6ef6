use rayon::prelude::*;

use super::RoundPlan;
use crate::error::{invalid, Result};
use crate::federation::{grad_query, Comm, Env, QueryEvent};
use crate::rng::Purpose;
use crate::vector::Vector;

/// `√K`, or an error when `K` is not a perfect square.
pub fn integer_sqrt(k: usize) -> Result<usize> {
    let r = (k as f64).sqrt().round() as usize;
    if r * r == k && k > 0 {
        Ok(r)
    } else {
        Err(invalid(format!("FedAvg needs a perfect-square K, got {k}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedAvgState {
    pub x: Vector,
    pub eta: f64,
    pub root_k: usize,
}

impl FedAvgState {
    pub fn new(x: Vector, eta: f64, k: usize) -> Result<Self> {
        Ok(FedAvgState {
            x,
            eta,
            root_k: integer_sqrt(k)?,
        })
    }
}

struct LocalRun {
    displacement: Vector,
    events: Vec<QueryEvent>,
}

/// One FedAvg round: every sampled client runs `√K` local steps with
/// `√K`-sample gradients and returns `g_i = Σ_k g_{i,k}`; the server applies
/// `x ← x − η·(1/S)Σ g_i`.
pub fn fedavg_round(mut state: FedAvgState, env: &mut Env, plan: &RoundPlan, round: usize) -> Result<FedAvgState> {
    let root_k = integer_sqrt(plan.local_steps)?;
    let clients = env.sample(round, plan.clients, Purpose::ClientSample)?;
    let runs: Vec<LocalRun> = {
        let env: &Env = env;
        let (x, eta, logging) = (&state.x, state.eta, env.logging());
        clients
            .par_iter()
            .map(|&i| {
                let mut local = x.clone();
                let mut sum = Vector::zeros(x.dim());
                let mut events = Vec::new();
                for k in 0..root_k {
                    let stream = env.grad_stream(Purpose::GradNoise, i, Comm::Main(round).key(), k);
                    let g = grad_query(env.problem, i, &local, root_k, &env.oracle, stream);
                    if logging {
                        events.push(QueryEvent {
                            comm: Comm::Main(round),
                            client: i,
                            step: k,
                            point: local.clone(),
                            grad: g.clone(),
                        });
                    }
                    local.add_scaled(-eta, &g);
                    sum += &g;
                }
                LocalRun {
                    displacement: sum,
                    events,
                }
            })
            .collect()
    };
    env.counters.grad += (clients.len() * root_k * root_k) as u64;
    let g = Vector::mean(runs.iter().map(|r| &r.displacement)).expect("at least one client");
    if env.logging() {
        env.record(runs.into_iter().flat_map(|r| r.events));
    }
    state.x.add_scaled(-state.eta, &g);
    Ok(state)
}

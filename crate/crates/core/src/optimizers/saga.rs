use super::{query_batch, RoundPlan};
use crate::error::Result;
use crate::federation::{Comm, Env};
use crate::rng::Purpose;
use crate::vector::Vector;

/// How SAGA refreshes its control variates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SagaOption {
    /// Reuse the sampled clients' gradients.
    #[default]
    One,
    /// Query an independent client sample at the same point.
    Two,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SagaState {
    pub x: Vector,
    pub eta: f64,
    pub option: SagaOption,
    /// Control variates `c_i`, one per client.
    pub variates: Vec<Vector>,
    /// Points `φ_i` where each variate was last computed.
    pub anchors: Vec<Vector>,
    /// `c̄ = (1/N)Σ c_i`.
    pub mean_variate: Vector,
}

/// `(1/S)Σ_{i∈S} g_i − (1/S)Σ_{i∈S} c_i + c̄`.
pub fn variance_reduced_estimate(grads: &[Vector], sampled_variates: &[&Vector], mean_variate: &Vector) -> Vector {
    let s = grads.len() as f64;
    let mut g = mean_variate.clone();
    for (gi, ci) in grads.iter().zip(sampled_variates) {
        g.add_scaled(1.0 / s, gi);
        g.add_scaled(-1.0 / s, ci);
    }
    g
}

impl SagaState {
    /// Initialises every client's variate at `x0`, charging `N·K` calls.
    pub fn warm_start(env: &mut Env, x0: Vector, eta: f64, option: SagaOption, k: usize, round: usize) -> Result<Self> {
        let n = env.problem.n_clients();
        let all: Vec<usize> = (0..n).collect();
        let points = vec![x0.clone(); n];
        let variates = query_batch(env, Comm::WarmStart(round), Purpose::WarmStartNoise, &all, &points, k);
        let mean_variate = Vector::mean(&variates).expect("at least one client");
        Ok(SagaState {
            x: x0,
            eta,
            option,
            variates,
            anchors: points,
            mean_variate,
        })
    }

    fn refresh_mean(&mut self) {
        self.mean_variate = Vector::mean(&self.variates).expect("at least one client");
    }
}

/// One SAGA round. Option I costs `S·K` calls, Option II `2·S·K`.
pub fn saga_round(mut state: SagaState, env: &mut Env, plan: &RoundPlan, round: usize) -> Result<SagaState> {
    let clients = env.sample(round, plan.clients, Purpose::ClientSample)?;
    let points = vec![state.x.clone(); clients.len()];
    let grads = query_batch(
        env,
        Comm::Main(round),
        Purpose::GradNoise,
        &clients,
        &points,
        plan.local_steps,
    );
    let sampled: Vec<&Vector> = clients.iter().map(|&i| &state.variates[i]).collect();
    let g = variance_reduced_estimate(&grads, &sampled, &state.mean_variate);
    let x_prev = state.x.clone();
    state.x.add_scaled(-state.eta, &g);

    match state.option {
        SagaOption::One => {
            for (&i, gi) in clients.iter().zip(grads) {
                state.variates[i] = gi;
                state.anchors[i] = x_prev.clone();
            }
        }
        SagaOption::Two => {
            let fresh = env.sample(round, plan.clients, Purpose::RefreshSample)?;
            let points = vec![x_prev.clone(); fresh.len()];
            let refreshed = query_batch(
                env,
                Comm::Refresh(round),
                Purpose::RefreshNoise,
                &fresh,
                &points,
                plan.local_steps,
            );
            for (&i, gi) in fresh.iter().zip(refreshed) {
                state.variates[i] = gi;
                state.anchors[i] = x_prev.clone();
            }
        }
    }
    state.refresh_mean();
    Ok(state)
}

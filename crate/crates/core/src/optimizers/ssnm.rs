use super::{query_batch, saga::variance_reduced_estimate, RoundPlan};
use crate::error::{invalid, Result};
use crate::federation::{Comm, Env};
use crate::rng::Purpose;
use crate::vector::Vector;

/// `argmin_x {(μ/2)‖x‖² + ⟨g, x⟩ + ‖x_prev − x‖²/(2η)} = (x_prev − ηg)/(1 + ημ)`.
pub fn prox_l2(x_prev: &Vector, g: &Vector, eta: f64, mu: f64) -> Vector {
    let mut x = x_prev.clone();
    x.add_scaled(-eta, g);
    x.scale(1.0 / (1.0 + eta * mu))
}

/// SSNM splits each client loss as `F_i = F̃_i + (μ/2)‖x‖²`; variates and
/// queried gradients refer to `F̃_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsnmState {
    pub x: Vector,
    pub eta: f64,
    pub tau: f64,
    pub mu: f64,
    pub anchors: Vec<Vector>,
    pub variates: Vec<Vector>,
    pub mean_variate: Vector,
}

/// Gradients of `F̃_i` from raw gradients of `F_i` taken at `points`.
fn strip_regularizer(grads: Vec<Vector>, points: &[Vector], mu: f64) -> Vec<Vector> {
    grads
        .into_iter()
        .zip(points)
        .map(|(mut g, p)| {
            g.add_scaled(-mu, p);
            g
        })
        .collect()
}

impl SsnmState {
    pub fn warm_start(env: &mut Env, x0: Vector, eta: f64, tau: f64, mu: f64, k: usize, round: usize) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(crate::error::Error::Config(format!(
                "SSNM momentum tau = {tau} outside (0, 1)"
            )));
        }
        if !(mu > 0.0) {
            return Err(invalid("SSNM needs a strongly convex regularizer, mu > 0"));
        }
        let n = env.problem.n_clients();
        let all: Vec<usize> = (0..n).collect();
        let points = vec![x0.clone(); n];
        let raw = query_batch(env, Comm::WarmStart(round), Purpose::WarmStartNoise, &all, &points, k);
        let variates = strip_regularizer(raw, &points, mu);
        let mean_variate = Vector::mean(&variates).expect("at least one client");
        Ok(SsnmState {
            x: x0,
            eta,
            tau,
            mu,
            anchors: points,
            variates,
            mean_variate,
        })
    }
}

/// One SSNM round: negative-momentum points `y_i = τx + (1−τ)φ_i`, a
/// variance-reduced prox step, then an independent sample moves its anchors to
/// `τx⁺ + (1−τ)φ_I` and recomputes their variates. `2·S·K` calls.
pub fn ssnm_round(mut state: SsnmState, env: &mut Env, plan: &RoundPlan, round: usize) -> Result<SsnmState> {
    let (tau, mu) = (state.tau, state.mu);
    let clients = env.sample(round, plan.clients, Purpose::ClientSample)?;
    let points: Vec<Vector> = clients.iter().map(|&i| state.x.lerp(tau, &state.anchors[i])).collect();
    let raw = query_batch(
        env,
        Comm::Main(round),
        Purpose::GradNoise,
        &clients,
        &points,
        plan.local_steps,
    );
    let grads = strip_regularizer(raw, &points, mu);
    let sampled: Vec<&Vector> = clients.iter().map(|&i| &state.variates[i]).collect();
    let g = variance_reduced_estimate(&grads, &sampled, &state.mean_variate);
    state.x = prox_l2(&state.x, &g, state.eta, mu);

    let fresh = env.sample(round, plan.clients, Purpose::RefreshSample)?;
    let anchors: Vec<Vector> = fresh.iter().map(|&i| state.x.lerp(tau, &state.anchors[i])).collect();
    let raw = query_batch(
        env,
        Comm::Refresh(round),
        Purpose::RefreshNoise,
        &fresh,
        &anchors,
        plan.local_steps,
    );
    let refreshed = strip_regularizer(raw, &anchors, mu);
    for ((&i, phi), c) in fresh.iter().zip(anchors).zip(refreshed) {
        state.anchors[i] = phi;
        state.variates[i] = c;
    }
    state.mean_variate = Vector::mean(&state.variates).expect("at least one client");
    Ok(state)
}

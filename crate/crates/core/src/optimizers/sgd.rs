use super::{query_batch, RoundPlan};
use crate::error::{invalid, Result};
use crate::federation::{Comm, Env};
use crate::rng::Purpose;
use crate::vector::Vector;

/// Which iterate SGD reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    #[default]
    Last,
    /// `x̂ = Σ_{r=0}^{R} w_r x⁽ʳ⁾ / W_R` with `w_r = (1 − ημ)^{−r}`.
    Weighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub x: Vector,
    pub eta: f64,
    pub mu: f64,
    pub averaging: Averaging,
    /// Running weighted average; equals `x` under [`Averaging::Last`].
    pub average: Vector,
    /// `W_r / w_r`, kept instead of the weights themselves, which overflow.
    weight_ratio: f64,
}

impl SgdState {
    pub fn new(x: Vector, eta: f64, mu: f64, averaging: Averaging) -> Result<Self> {
        if averaging == Averaging::Weighted && !(eta * mu > 0.0 && eta * mu < 1.0) {
            return Err(invalid("weighted averaging needs 0 < eta*mu < 1"));
        }
        Ok(SgdState {
            average: x.clone(),
            x,
            eta,
            mu,
            averaging,
            weight_ratio: 1.0,
        })
    }

    pub fn output(&self) -> &Vector {
        match self.averaging {
            Averaging::Last => &self.x,
            Averaging::Weighted => &self.average,
        }
    }
}

/// One round of minibatch SGD: `x ← x − η·(1/S)Σ_{i∈S} g_i`, `S·K` calls.
pub fn sgd_round(mut state: SgdState, env: &mut Env, plan: &RoundPlan, round: usize) -> Result<SgdState> {
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
    let g = Vector::mean(&grads).expect("at least one client");
    state.x.add_scaled(-state.eta, &g);
    if state.averaging == Averaging::Weighted {
        // W_r/w_r = 1 + (1 − ημ)·W_{r−1}/w_{r−1}.
        state.weight_ratio = 1.0 + (1.0 - state.eta * state.mu) * state.weight_ratio;
        let rho = 1.0 / state.weight_ratio;
        state.average = state.x.lerp(rho, &state.average);
    }
    Ok(state)
}

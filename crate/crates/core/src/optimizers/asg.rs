use super::{query_batch, RoundPlan};
use crate::error::{invalid, Result};
use crate::federation::{Comm, Env};
use crate::rng::Purpose;
use crate::vector::Vector;

/// How AC-SA picks its stage lengths and `φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum AsgSchedule {
    /// Restarted stages with the analysed `R_s`, `φ_s`. `delta` and `zeta`
    /// override the measured initial gap and heterogeneity.
    Multistage { delta: Option<f64>, zeta: Option<f64> },
    /// One run of `R` rounds with a constant `φ`.
    Fixed { phi: f64 },
}

impl Default for AsgSchedule {
    fn default() -> Self {
        AsgSchedule::Multistage {
            delta: None,
            zeta: None,
        }
    }
}

/// Stage rule `R_s = ⌈max{4√(4β/μ), 128c/(3μΔ2^{−(s+1)})}⌉` and
/// `φ_s = max{2β, [μc/(3Δ2^{−(s−1)}R_s(R_s+1)(R_s+2))]^{1/2}}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsgStagePlan {
    pub beta: f64,
    pub mu: f64,
    /// Update variance `c`.
    pub c: f64,
    pub delta: f64,
}

impl AsgStagePlan {
    /// `(R_s, φ_s)` for the 1-based stage `s`.
    pub fn stage(&self, s: usize) -> (usize, f64) {
        let AsgStagePlan { beta, mu, c, delta } = *self;
        let s = s as i32;
        let curvature = 4.0 * (4.0 * beta / mu).sqrt();
        let noise = if c > 0.0 {
            128.0 * c / (3.0 * mu * delta * 2f64.powi(-(s + 1)))
        } else {
            0.0
        };
        let len = curvature.max(noise).ceil();
        let len = if len.is_finite() && len < usize::MAX as f64 {
            len as usize
        } else {
            usize::MAX
        };
        let rf = len as f64;
        let phi_noise = if c > 0.0 {
            (mu * c / (3.0 * delta * 2f64.powi(-(s - 1)) * rf * (rf + 1.0) * (rf + 2.0))).sqrt()
        } else {
            0.0
        };
        (len.max(1), (2.0 * beta).max(phi_noise))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsgState {
    pub x: Vector,
    pub x_ag: Vector,
    /// Rounds completed in the current stage.
    pub r: usize,
    pub mu: f64,
    pub phi: f64,
}

impl AsgState {
    pub fn new(x0: Vector, mu: f64, phi: f64) -> Result<Self> {
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(invalid(format!("AC-SA needs phi > 0, got {phi}")));
        }
        if mu < 0.0 {
            return Err(invalid("AC-SA needs mu >= 0"));
        }
        Ok(AsgState {
            x_ag: x0.clone(),
            x: x0,
            r: 0,
            mu,
            phi,
        })
    }

    /// `(α_r, γ_r)` for the 1-based round `r`.
    pub fn coefficients(&self, r: usize) -> (f64, f64) {
        let rf = r as f64;
        (2.0 / (rf + 1.0), 4.0 * self.phi / (rf * (rf + 1.0)))
    }
}

/// One AC-SA round: gradient at `x_md`, closed-form prox-like step for `x`,
/// then `x_ag ← α x + (1 − α) x_ag`.
pub fn asg_round(mut state: AsgState, env: &mut Env, plan: &RoundPlan, round: usize) -> Result<AsgState> {
    let r = state.r + 1;
    let (alpha, gamma) = state.coefficients(r);
    let mu = state.mu;
    let denom = gamma + (1.0 - alpha * alpha) * mu;
    if !(denom > 0.0) {
        return Err(invalid("AC-SA denominator vanished"));
    }
    let w_ag = (1.0 - alpha) * (mu + gamma) / denom;
    let w_x = alpha * ((1.0 - alpha) * mu + gamma) / denom;
    let mut x_md = state.x_ag.scale(w_ag);
    x_md.add_scaled(w_x, &state.x);

    let clients = env.sample(round, plan.clients, Purpose::ClientSample)?;
    let points = vec![x_md.clone(); clients.len()];
    let grads = query_batch(
        env,
        Comm::Main(round),
        Purpose::GradNoise,
        &clients,
        &points,
        plan.local_steps,
    );
    let g = Vector::mean(&grads).expect("at least one client");

    // Stationarity of α[⟨g,x⟩ + μ/2‖x_md − x‖²] + ((1−α)μ + γ)/2‖x_prev − x‖².
    let keep = (1.0 - alpha) * mu + gamma;
    let mut x = x_md.scale(alpha * mu);
    x.add_scaled(keep, &state.x);
    x.add_scaled(-alpha, &g);
    let x = x.scale(1.0 / (mu + gamma));

    state.x_ag = x.lerp(alpha, &state.x_ag);
    state.x = x;
    state.r = r;
    Ok(state)
}

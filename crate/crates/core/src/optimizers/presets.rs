//! Stepsize presets derived from the convergence rates.

use std::f64::consts::E;

use super::{AsgStagePlan, RoundPlan};
use crate::error::{Error, Result};
use crate::federation::{Family, FederatedProblem, OracleConfig};
use crate::vector::Vector;

/// Constants the presets read off a problem and a starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub beta: f64,
    pub mu: f64,
    pub n: usize,
    /// Exact `ζ` when the family exposes it, else the gap at `x0`.
    pub zeta: f64,
    /// `F(x0) − F*` when the optimum is known.
    pub delta: Option<f64>,
}

impl ProblemConstants {
    pub fn measure(problem: &FederatedProblem, x0: &Vector) -> Self {
        let zeta = match problem.family() {
            Family::Synthetic { zeta_exact: Some(z) } => *z,
            _ => {
                let g = problem.grad(x0);
                problem
                    .clients()
                    .iter()
                    .map(|c| (&c.grad(x0) - &g).norm())
                    .fold(0.0, f64::max)
            }
        };
        ProblemConstants {
            beta: problem.smoothness(),
            mu: problem.strong_convexity(),
            n: problem.n_clients(),
            zeta,
            delta: problem.excess(x0),
        }
    }
}

/// `c = σ²/(SK) + (1 − (S−1)/(N−1))·ζ²/S`; the sampling term vanishes for `N = 1`.
pub fn update_variance(sigma: f64, plan: &RoundPlan, n: usize, zeta: f64) -> f64 {
    let (s, k) = (plan.clients as f64, plan.local_steps as f64);
    let sampling = if n > 1 { 1.0 - (s - 1.0) / (n as f64 - 1.0) } else { 0.0 };
    sigma * sigma / (s * k) + sampling * zeta * zeta / s
}

fn need_delta(pc: &ProblemConstants, what: &str) -> Result<f64> {
    pc.delta
        .ok_or_else(|| Error::Missing(format!("{what} preset needs the initial gap; the optimum is unknown")))
}

/// `η = min{1/β, ln(max{e, μ²ΔR/(βc)})/(μR)}`; general convex problems take
/// `min{1/β, (Δ/(βcR))^{1/2}}` instead.
pub fn sgd_preset(
    problem: &FederatedProblem,
    oracle: &OracleConfig,
    plan: &RoundPlan,
    rounds: usize,
    x0: &Vector,
) -> Result<f64> {
    let pc = ProblemConstants::measure(problem, x0);
    let c = update_variance(oracle.sigma, plan, pc.n, pc.zeta);
    let cap = 1.0 / pc.beta;
    if c == 0.0 {
        return Ok(cap);
    }
    let delta = need_delta(&pc, "SGD")?;
    let r = rounds.max(1) as f64;
    let eta = if pc.mu > 0.0 {
        let arg = (pc.mu * pc.mu * delta * r / (pc.beta * c)).max(E);
        arg.ln() / (pc.mu * r)
    } else {
        (delta / (pc.beta * c * r)).sqrt()
    };
    Ok(cap.min(eta))
}

/// `η = 1/(2β)`.
pub fn fedavg_preset(problem: &FederatedProblem) -> f64 {
    1.0 / (2.0 * problem.smoothness())
}

/// `η = min{1/(3β(N/S)^{2/3}), ln(max{e, μ²ΔR/(βc)})/(μR)}` with the
/// sampling-free variance `c = σ²/(SK)`.
pub fn saga_preset(
    problem: &FederatedProblem,
    oracle: &OracleConfig,
    plan: &RoundPlan,
    rounds: usize,
    x0: &Vector,
) -> Result<f64> {
    let pc = ProblemConstants::measure(problem, x0);
    let ratio = pc.n as f64 / plan.clients as f64;
    let cap = 1.0 / (3.0 * pc.beta * ratio.powf(2.0 / 3.0));
    let c = update_variance(oracle.sigma, plan, pc.n, 0.0);
    if c == 0.0 || pc.mu <= 0.0 {
        return Ok(cap);
    }
    let delta = need_delta(&pc, "SAGA")?;
    let r = rounds.max(1) as f64;
    let arg = (pc.mu * pc.mu * delta * r / (pc.beta * c)).max(E);
    Ok(cap.min(arg.ln() / (pc.mu * r)))
}

/// `(η, τ)`: `η = 1/(2μ(N/S))` when `(N/S)/κ > 3/4`, else
/// `η = (3μ(N/S)β)^{−1/2}`; in both cases `τ = (N/S)ημ/(1 + ημ)`.
pub fn ssnm_preset(problem: &FederatedProblem, plan: &RoundPlan) -> Result<(f64, f64)> {
    let beta = problem.smoothness();
    let mu = problem.strong_convexity();
    if !(mu > 0.0) {
        return Err(Error::Config("SSNM presets need mu > 0".into()));
    }
    let ratio = problem.n_clients() as f64 / plan.clients as f64;
    let kappa = beta / mu;
    let eta = if ratio / kappa > 0.75 {
        1.0 / (2.0 * mu * ratio)
    } else {
        (1.0 / (3.0 * mu * ratio * beta)).sqrt()
    };
    let tau = ratio * eta * mu / (1.0 + eta * mu);
    Ok((eta, tau))
}

/// AC-SA stage plan; `delta` and `zeta` override the measured values.
pub fn asg_stage_plan(
    problem: &FederatedProblem,
    oracle: &OracleConfig,
    plan: &RoundPlan,
    x0: &Vector,
    delta: Option<f64>,
    zeta: Option<f64>,
) -> Result<AsgStagePlan> {
    let pc = ProblemConstants::measure(problem, x0);
    if !(pc.mu > 0.0) {
        return Err(Error::Config(
            "multistage AC-SA needs mu > 0; smooth the problem first".into(),
        ));
    }
    let c = update_variance(oracle.sigma, plan, pc.n, zeta.unwrap_or(pc.zeta));
    let delta = match delta {
        Some(d) => d,
        None if c > 0.0 => need_delta(&pc, "AC-SA")?,
        None => pc.delta.unwrap_or(1.0),
    };
    if c > 0.0 && !(delta > 0.0) {
        return Err(Error::Config("AC-SA stage rule needs a positive initial gap".into()));
    }
    Ok(AsgStagePlan {
        beta: pc.beta,
        mu: pc.mu,
        c,
        delta,
    })
}

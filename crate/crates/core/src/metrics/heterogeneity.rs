use nalgebra::SVD;

use crate::error::{invalid, Error, Result};
use crate::federation::{Family, FederatedProblem};
use crate::objectives::{HardClient, HardInstance};
use crate::rng::{Purpose, RngStream, StreamId};
use crate::vector::Vector;

/// Distance-conserving constant used for the hard instance's ball when the
/// caller gives none.
pub const DEFAULT_BALL_C: f64 = 8.0;

/// Where heterogeneity is measured.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    /// Exact value from the construction (shared-Hessian synthetic family or
    /// the hard instance over its distance-conserving ball).
    ClosedForm,
    /// Uniform points in a ball around `x*` (or the origin).
    RandomPoints { count: usize, radius: f64, seed: u64 },
    /// Given points, typically the iterates of a run.
    Trajectory(Vec<Vector>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityReport {
    pub zeta_exact: Option<f64>,
    /// Largest `‖∇F_i(x) − ∇F(x)‖` over the probe.
    pub zeta_hat: f64,
    /// Largest `|F(x) − F_i(x)|` over the probe.
    pub zeta_f_hat: f64,
    /// `√((1/N)Σ‖∇F_i(x*)‖²)`, when `x*` is known.
    pub zeta_star: Option<f64>,
    pub probe: String,
}

/// Largest client gradient gap at `x`.
pub fn gradient_gap(problem: &FederatedProblem, x: &Vector) -> f64 {
    let g = problem.grad(x);
    problem
        .clients()
        .iter()
        .map(|c| (&c.grad(x) - &g).norm())
        .fold(0.0, f64::max)
}

/// Largest client value gap at `x`.
pub fn value_gap(problem: &FederatedProblem, x: &Vector) -> f64 {
    let f = problem.value(x);
    problem
        .clients()
        .iter()
        .map(|c| (f - c.value(x)).abs())
        .fold(0.0, f64::max)
}

fn zeta_star(problem: &FederatedProblem) -> Option<f64> {
    let xs = problem.x_star()?;
    let n = problem.n_clients() as f64;
    let total: f64 = problem.clients().iter().map(|c| c.grad(xs).norm_sq()).sum();
    Some((total / n).sqrt())
}

/// Radius of the ball `‖x − x*‖² ≤ (c/2)[‖x_init − x*‖² + Σ_i ‖x_init − x_i*‖²]`.
pub fn conserving_radius(problem: &FederatedProblem, x_init: &Vector, c: f64) -> Result<f64> {
    let xs = problem
        .x_star()
        .ok_or_else(|| Error::Missing("distance ball needs the global optimum".into()))?;
    let mut total = x_init.dist_sq(xs);
    for (i, opt) in problem.client_optima().into_iter().enumerate() {
        let opt = opt.ok_or_else(|| Error::Missing(format!("client {i} has no known optimum")))?;
        total += x_init.dist_sq(&opt);
    }
    Ok((0.5 * c * total).sqrt())
}

/// Supremum of the gradient gap over the ball of radius `radius` around `x*`.
///
/// Both clients deviate from the mean by `±(∇F₁ − ∇F₂)/2`, an affine map
/// `Mx − b/2`, so the supremum is bounded by the centre value plus
/// `radius·‖M‖₂`. This is attained when the centre gap aligns with the top
/// singular direction and is an upper bound otherwise.
pub fn hard_ball_zeta(problem: &FederatedProblem, instance: &HardInstance, radius: f64) -> Result<f64> {
    let xs = problem
        .x_star()
        .ok_or_else(|| Error::Missing("hard instance needs mu > 0 for a known optimum".into()))?;
    let a1 = instance.quadratic(HardClient::First);
    let a2 = instance.quadratic(HardClient::Second);
    let m = (a1.hessian() - a2.hessian()) * 0.5;
    let top = SVD::new(m, false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max);
    Ok(gradient_gap(problem, xs) + radius * top)
}

fn ball_points(center: &Vector, count: usize, radius: f64, seed: u64) -> Vec<Vector> {
    let d = center.dim();
    (0..count)
        .map(|j| {
            let stream = RngStream::new(seed, StreamId::new(Purpose::Probe).step(j));
            let dir = stream.gaussian(d);
            let u = RngStream::new(seed, StreamId::new(Purpose::Probe).step(j).client(1)).uniform(1)[0];
            let norm = dir.norm();
            let r = radius * u.powf(1.0 / d as f64);
            let mut x = center.clone();
            if norm > 0.0 {
                x.add_scaled(r / norm, &dir);
            }
            x
        })
        .collect()
}

pub fn measure_heterogeneity(problem: &FederatedProblem, probe: &Probe) -> Result<HeterogeneityReport> {
    let zeta_star = zeta_star(problem);
    let (points, zeta_exact, label) = match probe {
        Probe::ClosedForm => match problem.family() {
            Family::Synthetic { zeta_exact: Some(z) } => {
                let at = problem
                    .x_star()
                    .cloned()
                    .unwrap_or_else(|| Vector::zeros(problem.dim()));
                (vec![at], Some(*z), "closed form (gradient gap is x-free)".to_string())
            }
            Family::Hard(inst) => {
                let origin = Vector::zeros(problem.dim());
                let radius = conserving_radius(problem, &origin, DEFAULT_BALL_C)?;
                let z = hard_ball_zeta(problem, inst, radius)?;
                let xs = problem.x_star().cloned().expect("checked by hard_ball_zeta");
                (
                    vec![xs],
                    Some(z),
                    format!("closed form over the c = {DEFAULT_BALL_C} ball, radius {radius:.6e}"),
                )
            }
            other => {
                return Err(Error::Unsupported(format!(
                    "closed-form heterogeneity is not available for the {other:?} family"
                )))
            }
        },
        Probe::RandomPoints { count, radius, seed } => {
            if *count == 0 || !(*radius >= 0.0 && radius.is_finite()) {
                return Err(invalid("random probe needs count >= 1 and a finite radius >= 0"));
            }
            let center = problem
                .x_star()
                .cloned()
                .unwrap_or_else(|| Vector::zeros(problem.dim()));
            (
                ball_points(&center, *count, *radius, *seed),
                None,
                format!("{count} random points, radius {radius}"),
            )
        }
        Probe::Trajectory(points) => {
            if points.is_empty() {
                return Err(invalid("trajectory probe needs at least one point"));
            }
            (points.clone(), None, format!("{} trajectory points", points.len()))
        }
    };
    for p in &points {
        if p.dim() != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                found: p.dim(),
            });
        }
    }
    let zeta_hat = points.iter().map(|x| gradient_gap(problem, x)).fold(0.0, f64::max);
    let zeta_f_hat = points.iter().map(|x| value_gap(problem, x)).fold(0.0, f64::max);
    Ok(HeterogeneityReport {
        zeta_exact,
        zeta_hat,
        zeta_f_hat,
        zeta_star,
        probe: label,
    })
}

//! Constructors for the federated problem families.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use super::{ClientObjective, HardClient, HardInstance, LogisticClient, PlScalar, QuadraticClient, SmoothedObjective};
use crate::error::{invalid, Result};
use crate::federation::{Family, FederatedProblem};
use crate::rng::{Purpose, RngStream, StreamId};
use crate::vector::Vector;

/// PL constant of `x² + 3 sin² x`, certified on a grid over `[−10, 10]`.
pub const PL_MU: f64 = 1.0 / 32.0;

/// `F₁(x) = ½(x − 1)²`, `F₂(x) = (x + 1)²`; global optimum `−1/3`.
pub fn make_two_client_toy() -> FederatedProblem {
    let f1 = QuadraticClient::diagonal(&[1.0], Vector::new(vec![1.0]), 0.5).expect("valid");
    let f2 = QuadraticClient::diagonal(&[2.0], Vector::new(vec![-2.0]), 1.0).expect("valid");
    FederatedProblem::new(
        vec![ClientObjective::Quadratic(f1), ClientObjective::Quadratic(f2)],
        Family::Toy,
    )
    .expect("toy problem is well formed")
}

/// Parameters of the controlled-heterogeneity quadratic family.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub clients: usize,
    pub dim: usize,
    /// Eigenvalues of the common Hessian span `[1, condition]`.
    pub condition: f64,
    /// `max_i ‖∇F_i(x*) − ∇F(x*)‖`; exact everywhere when `hessian_spread = 0`.
    pub zeta: f64,
    /// Relative per-client perturbation of the Hessian eigenvalues, in `[0, 1)`.
    /// Zero gives the shared-Hessian family.
    pub hessian_spread: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(clients: usize, dim: usize, condition: f64, zeta: f64, seed: u64) -> Self {
        SyntheticSpec {
            clients,
            dim,
            condition,
            zeta,
            hessian_spread: 0.0,
            seed,
        }
    }

    pub fn with_spread(mut self, spread: f64) -> Self {
        self.hessian_spread = spread;
        self
    }
}

fn random_orthogonal(dim: usize, stream: RngStream) -> DMatrix<f64> {
    let g = stream.gaussian(dim * dim);
    let m = DMatrix::from_column_slice(dim, dim, g.as_slice());
    m.qr().q()
}

/// Quadratic clients `F_i(x) = ½xᵀA_i x − b_iᵀx` around a common Hessian `A`
/// with eigenvalues in `[1, κ]`, and `b_i = A_i x* + δ_i` with `Σδ_i = 0`.
///
/// With zero spread every `A_i = A`, so `∇F_i − ∇F = −δ_i` for all `x` and
/// `ζ = max_i ‖δ_i‖` equals the target exactly.
pub fn make_synthetic_federation(spec: &SyntheticSpec) -> Result<FederatedProblem> {
    let SyntheticSpec {
        clients: n,
        dim: d,
        condition: kappa,
        zeta,
        hessian_spread: spread,
        seed,
    } = *spec;
    if n < 2 {
        return Err(invalid("synthetic federation needs at least 2 clients"));
    }
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(invalid("condition number must be at least 1"));
    }
    if d == 1 && kappa > 1.0 {
        return Err(invalid("a 1-dimensional family cannot span [1, kappa]"));
    }
    if !(zeta >= 0.0 && zeta.is_finite()) {
        return Err(invalid("zeta must be nonnegative"));
    }
    if !(0.0..1.0).contains(&spread) {
        return Err(invalid("hessian spread must lie in [0, 1)"));
    }
    let gen = |purpose_step: usize| RngStream::new(seed, StreamId::new(Purpose::ProblemGen).step(purpose_step));

    let eig: Vec<f64> = (0..d)
        .map(|j| {
            if d == 1 {
                1.0
            } else {
                1.0 + (kappa - 1.0) * j as f64 / (d - 1) as f64
            }
        })
        .collect();
    let q = random_orthogonal(d, gen(0));
    let x_star = gen(1).gaussian(d);

    let mut deltas: Vec<Vector> = (0..n)
        .map(|i| RngStream::new(seed, StreamId::new(Purpose::ProblemGen).step(2).client(i)).gaussian(d))
        .collect();
    let mean = Vector::mean(&deltas).expect("n >= 2");
    for delta in &mut deltas {
        *delta -= &mean;
    }
    let max_norm = deltas.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for delta in &mut deltas {
        *delta = if max_norm > 0.0 {
            delta.scale(zeta / max_norm)
        } else {
            Vector::zeros(d)
        };
    }

    // Eigenvalue multipliers, centred across clients so the mean Hessian is A.
    let mut mult = vec![vec![0.0; d]; n];
    if spread > 0.0 {
        for (i, row) in mult.iter_mut().enumerate() {
            let u = RngStream::new(seed, StreamId::new(Purpose::ProblemGen).step(3).client(i)).uniform(d);
            for (m, v) in row.iter_mut().zip(u) {
                *m = 2.0 * v - 1.0;
            }
        }
        for j in 0..d {
            let avg = mult.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            for row in &mut mult {
                row[j] -= avg;
            }
        }
        let top = mult.iter().flat_map(|r| r.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        if top > 0.0 {
            for row in &mut mult {
                for m in row.iter_mut() {
                    *m *= spread / top;
                }
            }
        }
    }

    let xs = DVector::from_column_slice(x_star.as_slice());
    let clients = (0..n)
        .map(|i| {
            let diag: Vec<f64> = eig.iter().zip(&mult[i]).map(|(l, m)| l * (1.0 + m)).collect();
            let a = &q * DMatrix::from_diagonal(&DVector::from_vec(diag)) * q.transpose();
            let a = (&a + a.transpose()) * 0.5;
            let ax = &a * &xs;
            let b = &Vector::from_slice(ax.as_slice()) + &deltas[i];
            QuadraticClient::new(a, b, 0.0).map(ClientObjective::Quadratic)
        })
        .collect::<Result<Vec<_>>>()?;

    let zeta_exact = (spread == 0.0).then(|| deltas.iter().map(|v| v.norm()).fold(0.0, f64::max));
    FederatedProblem::new(clients, Family::Synthetic { zeta_exact })
}

/// Parameters of the data-shuffling logistic family.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleSpec {
    pub clients: usize,
    /// Percentage of each class shuffled into a common pool.
    pub homogeneity_pct: f64,
    pub samples_per_class: usize,
    pub classes: usize,
    pub mu: f64,
    /// Distance of each class mean from the origin.
    pub scale: f64,
    pub seed: u64,
}

impl ShuffleSpec {
    pub fn new(clients: usize, homogeneity_pct: f64, samples_per_class: usize, seed: u64) -> Self {
        ShuffleSpec {
            clients,
            homogeneity_pct,
            samples_per_class,
            classes: 10,
            mu: 0.1,
            scale: 3.0,
            seed,
        }
    }
}

/// Logistic clients over Gaussian class blobs at `scale · e_c`.
///
/// The first `X%` of every class is pooled, shuffled and dealt evenly to the
/// clients; client `i` additionally receives the rest of classes `2i` and
/// `2i + 1`. Even classes are label 0, odd classes label 1.
pub fn make_shuffle_federation(spec: &ShuffleSpec) -> Result<FederatedProblem> {
    let ShuffleSpec {
        clients: n,
        homogeneity_pct: pct,
        samples_per_class: per_class,
        classes,
        mu,
        scale,
        seed,
    } = *spec;
    if !(0.0..=100.0).contains(&pct) {
        return Err(invalid(format!("homogeneity {pct} outside [0, 100]")));
    }
    if n == 0 || 2 * n > classes {
        return Err(invalid(format!("{n} clients need {} classes, have {classes}", 2 * n)));
    }
    if per_class == 0 {
        return Err(invalid("samples_per_class must be positive"));
    }
    let dim = classes;
    let shuffled_per_class = ((pct / 100.0) * per_class as f64).round() as usize;

    let mut pool: Vec<(Vector, f64)> = Vec::new();
    let mut own: Vec<Vec<(Vector, f64)>> = vec![Vec::new(); n];
    for c in 0..classes {
        let label = (c % 2) as f64;
        for s in 0..per_class {
            let mut a = RngStream::new(seed, StreamId::new(Purpose::DataGen).client(c).step(s)).gaussian(dim);
            a[c] += scale;
            if s < shuffled_per_class {
                pool.push((a, label));
            } else if c / 2 < n {
                own[c / 2].push((a, label));
            }
        }
    }
    let mut rng = RngStream::new(seed, StreamId::new(Purpose::DataGen).step(u32::MAX as usize)).rng();
    pool.shuffle(&mut rng);
    for (k, item) in pool.into_iter().enumerate() {
        own[k % n].push(item);
    }

    let clients = own
        .into_iter()
        .map(|data| {
            let (features, labels): (Vec<Vector>, Vec<f64>) = data.into_iter().unzip();
            LogisticClient::new(features, labels, mu).map(ClientObjective::Logistic)
        })
        .collect::<Result<Vec<_>>>()?;
    FederatedProblem::new(clients, Family::Shuffle { homogeneity_pct: pct })?.solve_optimum(1e-11, 200_000)
}

/// Two-client problem over a [`HardInstance`].
pub fn make_hard_problem(instance: &HardInstance) -> Result<FederatedProblem> {
    let clients = [HardClient::First, HardClient::Second]
        .into_iter()
        .map(|which| ClientObjective::Hard {
            instance: instance.clone(),
            which,
        })
        .collect();
    FederatedProblem::new(clients, Family::Hard(instance.clone()))
}

/// The scalar PL objective `x² + 3 sin² x`.
pub fn make_pl_objective() -> ClientObjective {
    ClientObjective::Pl(PlScalar { mu: PL_MU })
}

/// Single-client problem around [`make_pl_objective`].
pub fn make_pl_problem() -> FederatedProblem {
    FederatedProblem::new(vec![make_pl_objective()], Family::Pl)
        .and_then(|p| p.with_optimum(Vector::zeros(1)))
        .expect("PL problem is well formed")
}

/// Wraps `base` as `F(x) + (μ_reg/2)‖x − anchor‖²`.
pub fn smooth(base: &ClientObjective, mu_reg: f64, anchor: &Vector) -> Result<SmoothedObjective> {
    if !(mu_reg > 0.0 && mu_reg.is_finite()) {
        return Err(invalid("smoothing weight must be positive"));
    }
    if anchor.dim() != base.dim() {
        return Err(invalid("anchor dimension differs from the objective"));
    }
    Ok(SmoothedObjective {
        base: Box::new(base.clone()),
        mu_reg,
        anchor: anchor.clone(),
    })
}

/// Applies [`smooth`] to every client of a problem.
pub fn smooth_problem(problem: &FederatedProblem, mu_reg: f64, anchor: &Vector) -> Result<FederatedProblem> {
    let clients = problem
        .clients()
        .iter()
        .map(|c| smooth(c, mu_reg, anchor).map(ClientObjective::Smoothed))
        .collect::<Result<Vec<_>>>()?;
    let p = FederatedProblem::new(clients, Family::Custom)?;
    if p.x_star().is_some() {
        Ok(p)
    } else {
        p.solve_optimum(1e-11, 200_000)
    }
}

/// A starting point with `F(x₀) − F(x*) = gap`, along a random direction.
pub fn initial_point_with_gap(problem: &FederatedProblem, gap: f64, seed: u64) -> Result<Vector> {
    let xs = problem
        .x_star()
        .ok_or_else(|| invalid("initial gap needs a known optimum"))?;
    let v = RngStream::new(seed, StreamId::new(Purpose::InitPoint)).gaussian(problem.dim());
    let probe = xs + &v;
    let unit = problem
        .excess(&probe)
        .ok_or_else(|| invalid("initial gap needs a known optimum"))?;
    if unit <= 0.0 {
        return Err(invalid("degenerate direction for the initial point"));
    }
    // Exact for quadratics: the excess scales with t².
    let t = (gap / unit).sqrt();
    let mut x0 = xs.clone();
    x0.add_scaled(t, &v);
    Ok(x0)
}

//! The two-client chained quadratic used for communication lower bounds.
//!
//! Coordinates are 0-based here; the chain couples `(x₂ᵢ, x₂ᵢ₊₁)` pairs in
//! the first client and `(x₂ᵢ₋₁, x₂ᵢ)` pairs in the second (1-based), so a
//! zero-respecting method can unlock at most one coordinate per round.

use nalgebra::DMatrix;

use super::quadratic::QuadraticClient;
use crate::error::{invalid, Error, Result};
use crate::vector::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardClient {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardInstance {
    pub l2: f64,
    pub zeta_hat: f64,
    pub mu: f64,
    /// Weight of the `x_d²` term in the first client, `1 − q`.
    pub c_weight: f64,
    pub dim: usize,
    /// Declared smoothness, `μ + 4ℓ₂`.
    pub beta: f64,
}

impl HardInstance {
    pub fn new(l2: f64, zeta_hat: f64, mu: f64, dim: usize) -> Result<Self> {
        if !dim.is_multiple_of(2) {
            return Err(invalid(format!("hard instance dimension must be even, got {dim}")));
        }
        if dim < 4 {
            return Err(invalid("hard instance dimension must be at least 4"));
        }
        if !(l2 > 0.0 && l2.is_finite()) {
            return Err(invalid("l2 must be positive"));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid("mu must be nonnegative"));
        }
        if !(zeta_hat > 0.0 && zeta_hat.is_finite()) {
            return Err(invalid("zeta_hat must be positive"));
        }
        let mut inst = HardInstance {
            l2,
            zeta_hat,
            mu,
            c_weight: 1.0,
            dim,
            beta: mu + 4.0 * l2,
        };
        if mu > 0.0 {
            inst.c_weight = 1.0 - inst.q()?;
        }
        Ok(inst)
    }

    /// Smallest even dimension satisfying the dimension condition for `rounds`.
    pub fn required_dim(l2: f64, mu: f64, rounds: usize) -> Result<usize> {
        let q = q_of(l2, mu)?;
        let need = rounds as f64 + std::f64::consts::LN_2 / (2.0 * (1.0 / q).ln());
        let d = (need.ceil() as usize).max(4);
        Ok(d + d % 2)
    }

    /// The convex-case choice `μ = ℓ₂ / (64 R²)`.
    pub fn convex_case_mu(l2: f64, rounds: usize) -> f64 {
        let r = rounds.max(1) as f64;
        l2 / (64.0 * r * r)
    }

    pub fn alpha(&self) -> Result<f64> {
        if self.mu <= 0.0 {
            return Err(invalid("alpha and q require mu > 0"));
        }
        Ok((1.0 + 2.0 * self.l2 / self.mu).sqrt())
    }

    pub fn q(&self) -> Result<f64> {
        q_of(self.l2, self.mu)
    }

    pub fn grad(&self, which: HardClient, x: &Vector) -> Vector {
        match which {
            HardClient::First => self.grad1(x),
            HardClient::Second => self.grad2(x),
        }
    }

    pub fn value(&self, which: HardClient, x: &Vector) -> f64 {
        match which {
            HardClient::First => self.value1(x),
            HardClient::Second => self.value2(x),
        }
    }

    pub fn grad1(&self, x: &Vector) -> Vector {
        assert_eq!(x.dim(), self.dim, "dimension mismatch in hard instance");
        let d = self.dim;
        let (l2, mu) = (self.l2, self.mu);
        let mut g = Vector::zeros(d);
        g[0] = -l2 * self.zeta_hat + mu * x[0];
        g[d - 1] = self.c_weight * l2 * x[d - 1] + mu * x[d - 1];
        // 1-based i in 2..=d-1; 0-based j = i - 1. 1-based odd ⇔ 0-based even.
        for j in 1..d - 1 {
            g[j] = if j % 2 == 0 {
                l2 * (x[j] - x[j - 1]) + mu * x[j]
            } else {
                -l2 * (x[j + 1] - x[j]) + mu * x[j]
            };
        }
        g
    }

    pub fn grad2(&self, x: &Vector) -> Vector {
        assert_eq!(x.dim(), self.dim, "dimension mismatch in hard instance");
        let d = self.dim;
        let (l2, mu) = (self.l2, self.mu);
        let mut g = Vector::zeros(d);
        g[0] = -l2 * (x[1] - x[0]) + mu * x[0];
        g[d - 1] = l2 * (x[d - 1] - x[d - 2]) + mu * x[d - 1];
        for j in 1..d - 1 {
            g[j] = if j % 2 == 0 {
                -l2 * (x[j + 1] - x[j]) + mu * x[j]
            } else {
                l2 * (x[j] - x[j - 1]) + mu * x[j]
            };
        }
        g
    }

    pub fn value1(&self, x: &Vector) -> f64 {
        let d = self.dim;
        let mut v = -self.l2 * self.zeta_hat * x[0] + 0.5 * self.c_weight * self.l2 * x[d - 1] * x[d - 1];
        // Pairs (x_{2i+1} - x_{2i}), 1-based i = 1..d/2-1.
        for i in 1..d / 2 {
            let diff = x[2 * i] - x[2 * i - 1];
            v += 0.5 * self.l2 * diff * diff;
        }
        v + 0.5 * self.mu * x.norm_sq()
    }

    pub fn value2(&self, x: &Vector) -> f64 {
        let mut v = 0.0;
        for i in 1..=self.dim / 2 {
            let diff = x[2 * i - 1] - x[2 * i - 2];
            v += 0.5 * self.l2 * diff * diff;
        }
        v + 0.5 * self.mu * x.norm_sq()
    }

    /// Dense quadratic form of one client, assembled independently of the
    /// gradient formulas.
    pub fn quadratic(&self, which: HardClient) -> QuadraticClient {
        let d = self.dim;
        let mut a = DMatrix::<f64>::identity(d, d) * self.mu;
        let mut b = Vector::zeros(d);
        let mut couple = |p: usize, q: usize| {
            a[(p, p)] += self.l2;
            a[(q, q)] += self.l2;
            a[(p, q)] -= self.l2;
            a[(q, p)] -= self.l2;
        };
        match which {
            HardClient::First => {
                for i in 1..d / 2 {
                    couple(2 * i - 1, 2 * i);
                }
                a[(d - 1, d - 1)] += self.c_weight * self.l2;
                b[0] = self.l2 * self.zeta_hat;
            }
            HardClient::Second => {
                for i in 1..=d / 2 {
                    couple(2 * i - 2, 2 * i - 1);
                }
            }
        }
        QuadraticClient::new(a, b, 0.0).expect("hard instance curvature is PSD")
    }

    /// `x₁* = (ℓ₂ζ̂/μ) e₁`.
    pub fn client_optimum(&self, which: HardClient) -> Option<Vector> {
        if self.mu <= 0.0 {
            return None;
        }
        Some(match which {
            HardClient::First => {
                let mut x = Vector::zeros(self.dim);
                x[0] = self.l2 * self.zeta_hat / self.mu;
                x
            }
            HardClient::Second => Vector::zeros(self.dim),
        })
    }

    /// Closed-form global minimizer `x*_j = ζ̂ q^j / (1 − q)` (1-based j).
    pub fn global_optimum(&self) -> Result<Vector> {
        let q = self.q()?;
        let scale = self.zeta_hat / (1.0 - q);
        let mut x = Vector::zeros(self.dim);
        let mut qj = q;
        for j in 0..self.dim {
            x[j] = scale * qj;
            qj *= q;
        }
        Ok(x)
    }

    /// `‖x*‖² = ζ̂² q² (1 − q^{2d}) / ((1 − q)² (1 − q²))`.
    pub fn optimum_norm_sq(&self) -> Result<f64> {
        let q = self.q()?;
        let num = self.zeta_hat.powi(2) * q * q * (1.0 - q.powi(2 * self.dim as i32));
        Ok(num / ((1.0 - q).powi(2) * (1.0 - q * q)))
    }

    /// `q ℓ₂ ζ̂² / (4 (1 − q))`, the initial gap at the origin.
    pub fn initial_gap_bound(&self) -> Result<f64> {
        let q = self.q()?;
        Ok(q * self.l2 * self.zeta_hat.powi(2) / (4.0 * (1.0 - q)))
    }

    /// Whether `ℓ₂ ≤ (β − μ)/4` holds for a declared smoothness `beta`.
    pub fn satisfies_smoothness(&self, beta: f64) -> bool {
        self.l2 <= (beta - self.mu) / 4.0 + 1e-15 * beta.abs()
    }
}

fn q_of(l2: f64, mu: f64) -> Result<f64> {
    if mu <= 0.0 {
        return Err(invalid("the strongly convex lower bound needs mu > 0"));
    }
    let alpha = (1.0 + 2.0 * l2 / mu).sqrt();
    Ok((alpha - 1.0) / (alpha + 1.0))
}

/// Suboptimality lower bound after `rounds` rounds for zero-respecting methods:
/// `ζ̂² μ q² q^{2R} / (16 (1 − q)² (1 − q²))`.
pub fn hard_instance_lower_bound(inst: &HardInstance, rounds: usize) -> Result<f64> {
    let q = inst.q()?;
    let need = rounds as f64 + std::f64::consts::LN_2 / (2.0 * (1.0 / q).ln());
    if (inst.dim as f64) < need {
        return Err(Error::DimensionTooSmall {
            dim: inst.dim,
            rounds,
            required: need.ceil() as usize,
        });
    }
    let lead = inst.zeta_hat.powi(2) * inst.mu * q * q / (16.0 * (1.0 - q).powi(2) * (1.0 - q * q));
    Ok(lead * q.powi(2 * rounds as i32))
}

/// Builds the instance, rejecting odd dimensions.
pub fn make_hard_instance(l2: f64, zeta_hat: f64, mu: f64, dim: usize) -> Result<HardInstance> {
    HardInstance::new(l2, zeta_hat, mu, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RngStream, StreamId};

    fn inst() -> HardInstance {
        HardInstance::new(1.0, 1.0, 0.1, 10).unwrap()
    }

    #[test]
    fn gradient_at_origin() {
        let h = inst();
        let g1 = h.grad1(&Vector::zeros(10));
        assert_eq!(g1[0], -1.0);
        assert!(g1.iter().skip(1).all(|v| *v == 0.0));
        assert_eq!(h.grad2(&Vector::zeros(10)), Vector::zeros(10));
        let x1 = h.client_optimum(HardClient::First).unwrap();
        assert!((x1.norm_sq() - 100.0).abs() < 1e-9);
        assert!(h.grad1(&x1).norm() < 1e-12);
    }

    #[test]
    fn rejects_odd_dimension() {
        assert!(HardInstance::new(1.0, 1.0, 0.1, 7).is_err());
    }

    #[test]
    fn formulas_match_dense_quadratic() {
        let h = inst();
        for seed in 0..5 {
            let x = RngStream::new(seed, StreamId::new(Purpose::Test)).gaussian(10);
            for which in [HardClient::First, HardClient::Second] {
                let dense = h.quadratic(which);
                assert!((dense.grad(&x) - h.grad(which, &x)).norm() < 1e-12);
                assert!((dense.value(&x) - h.value(which, &x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_optimum_is_stationary() {
        let h = inst();
        let xs = h.global_optimum().unwrap();
        let g = (&h.grad1(&xs) + &h.grad2(&xs)).scale(0.5);
        assert!(g.norm() < 1e-12, "{}", g.norm());
        assert!((xs.norm_sq() - h.optimum_norm_sq().unwrap()).abs() < 1e-9);
        let gap =
            0.5 * (h.value1(&Vector::zeros(10)) + h.value2(&Vector::zeros(10))) - 0.5 * (h.value1(&xs) + h.value2(&xs));
        assert!((gap - h.initial_gap_bound().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn bound_ratio_is_q_squared() {
        let h = HardInstance::new(1.0, 1.0, 0.1, 200).unwrap();
        let q = h.q().unwrap();
        for r in 0..20 {
            let ratio = hard_instance_lower_bound(&h, r + 1).unwrap() / hard_instance_lower_bound(&h, r).unwrap();
            assert!((ratio - q * q).abs() < 1e-12);
        }
        assert!(hard_instance_lower_bound(&h, 150).unwrap() < 1e-30);
    }

    #[test]
    fn bound_at_zero_rounds() {
        // alpha = sqrt(21), q = (sqrt(21) - 1)/(sqrt(21) + 1); evaluated with
        // mpmath at 30 digits: 0.1 q^2 / (16 (1-q)^2 (1-q^2)).
        let h = HardInstance::new(1.0, 1.0, 0.1, 10).unwrap();
        let q = h.q().unwrap();
        assert!((q - 0.641_742_430_504_416_f64).abs() < 1e-14);
        let b0 = hard_instance_lower_bound(&h, 0).unwrap();
        assert!((b0 - 0.034_096_545_349_373_81_f64).abs() < 1e-13, "{b0}");
    }

    #[test]
    fn dimension_condition_is_enforced() {
        let h = HardInstance::new(1.0, 1.0, 0.1, 4).unwrap();
        match hard_instance_lower_bound(&h, 10) {
            Err(Error::DimensionTooSmall { required, .. }) => assert!(required > 10),
            other => panic!("expected dimension error, got {other:?}"),
        }
        let d = HardInstance::required_dim(1.0, 0.1, 10).unwrap();
        let big = HardInstance::new(1.0, 1.0, 0.1, d).unwrap();
        assert!(hard_instance_lower_bound(&big, 10).is_ok());
    }

    #[test]
    fn zero_mu_has_no_strongly_convex_bound() {
        let h = HardInstance::new(1.0, 1.0, 0.0, 8).unwrap();
        assert!(hard_instance_lower_bound(&h, 1).is_err());
    }
}

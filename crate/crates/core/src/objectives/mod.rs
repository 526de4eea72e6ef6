//! Client objective families.

mod builders;
mod hard;
mod logistic;
mod quadratic;

pub use builders::{
    initial_point_with_gap, make_hard_problem, make_pl_objective, make_pl_problem, make_shuffle_federation,
    make_synthetic_federation, make_two_client_toy, smooth, smooth_problem, ShuffleSpec, SyntheticSpec, PL_MU,
};
pub use hard::{hard_instance_lower_bound, make_hard_instance, HardClient, HardInstance};
pub use logistic::LogisticClient;
pub use quadratic::QuadraticClient;

use crate::vector::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexityClass {
    StronglyConvex,
    Convex,
    Pl,
    Nonconvex,
}

/// The scalar nonconvex function `x² + 3 sin² x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlScalar {
    pub mu: f64,
}

impl PlScalar {
    pub fn value(&self, x: f64) -> f64 {
        let s = x.sin();
        x * x + 3.0 * s * s
    }

    pub fn derivative(&self, x: f64) -> f64 {
        2.0 * x + 3.0 * (2.0 * x).sin()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        2.0 + 6.0 * (2.0 * x).cos()
    }
}

/// `F(x) + (μ_reg/2)‖x − anchor‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedObjective {
    pub base: Box<ClientObjective>,
    pub mu_reg: f64,
    pub anchor: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClientObjective {
    Quadratic(QuadraticClient),
    Logistic(LogisticClient),
    Pl(PlScalar),
    Hard { instance: HardInstance, which: HardClient },
    Smoothed(SmoothedObjective),
}

impl ClientObjective {
    pub fn dim(&self) -> usize {
        match self {
            ClientObjective::Quadratic(q) => q.dim(),
            ClientObjective::Logistic(l) => l.dim(),
            ClientObjective::Pl(_) => 1,
            ClientObjective::Hard { instance, .. } => instance.dim,
            ClientObjective::Smoothed(s) => s.base.dim(),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            ClientObjective::Quadratic(q) => q.value(x),
            ClientObjective::Logistic(l) => l.value(x),
            ClientObjective::Pl(p) => p.value(x[0]),
            ClientObjective::Hard { instance, which } => instance.value(*which, x),
            ClientObjective::Smoothed(s) => s.value(x),
        }
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        match self {
            ClientObjective::Quadratic(q) => q.grad(x),
            ClientObjective::Logistic(l) => l.grad(x),
            ClientObjective::Pl(p) => Vector::new(vec![p.derivative(x[0])]),
            ClientObjective::Hard { instance, which } => instance.grad(*which, x),
            ClientObjective::Smoothed(s) => s.grad(x),
        }
    }

    /// β.
    pub fn smoothness(&self) -> f64 {
        match self {
            ClientObjective::Quadratic(q) => q.smoothness(),
            ClientObjective::Logistic(l) => l.smoothness(),
            ClientObjective::Pl(_) => 8.0,
            ClientObjective::Hard { instance, .. } => instance.beta,
            ClientObjective::Smoothed(s) => s.base.smoothness() + s.mu_reg,
        }
    }

    /// μ; zero for general convex, the PL constant for PL objectives.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            ClientObjective::Quadratic(q) => q.strong_convexity(),
            ClientObjective::Logistic(l) => l.strong_convexity(),
            ClientObjective::Pl(p) => p.mu,
            ClientObjective::Hard { instance, .. } => instance.mu,
            ClientObjective::Smoothed(s) => s.base.strong_convexity() + s.mu_reg,
        }
    }

    pub fn convexity_class(&self) -> ConvexityClass {
        match self {
            ClientObjective::Pl(_) => ConvexityClass::Pl,
            ClientObjective::Smoothed(_) => ConvexityClass::StronglyConvex,
            other if other.strong_convexity() > 0.0 => ConvexityClass::StronglyConvex,
            _ => ConvexityClass::Convex,
        }
    }

    pub fn optimum(&self) -> Option<Vector> {
        match self {
            ClientObjective::Quadratic(q) => q.optimum().cloned(),
            ClientObjective::Logistic(_) => None,
            ClientObjective::Pl(_) => Some(Vector::zeros(1)),
            ClientObjective::Hard { instance, which } => instance.client_optimum(*which),
            ClientObjective::Smoothed(s) => s.quadratic_form().and_then(|q| q.optimum().cloned()),
        }
    }

    /// Dense quadratic form, when the objective is quadratic.
    pub fn quadratic_form(&self) -> Option<QuadraticClient> {
        match self {
            ClientObjective::Quadratic(q) => Some(q.clone()),
            ClientObjective::Hard { instance, which } => Some(instance.quadratic(*which)),
            ClientObjective::Smoothed(s) => s.quadratic_form(),
            _ => None,
        }
    }
}

impl SmoothedObjective {
    pub fn value(&self, x: &Vector) -> f64 {
        self.base.value(x) + 0.5 * self.mu_reg * x.dist_sq(&self.anchor)
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        let mut g = self.base.grad(x);
        g.add_scaled(self.mu_reg, &(x - &self.anchor));
        g
    }

    pub fn quadratic_form(&self) -> Option<QuadraticClient> {
        let base = self.base.quadratic_form()?;
        let d = base.dim();
        let a = base.hessian() + nalgebra::DMatrix::<f64>::identity(d, d) * self.mu_reg;
        let b = base.linear() + &self.anchor.scale(self.mu_reg);
        let c = base.constant() + 0.5 * self.mu_reg * self.anchor.norm_sq();
        QuadraticClient::new(a, b, c).ok()
    }
}

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::vector::Vector;

/// ℓ₂-regularized binary logistic regression on one client's data.
///
/// `F(w) = (1/n) Σ [softplus(wᵀa) − y·wᵀa] + (μ/2)‖w‖²` with `y ∈ {0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticClient {
    features: Vec<Vector>,
    labels: Vec<f64>,
    mu: f64,
    beta: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticClient {
    pub fn new(features: Vec<Vector>, labels: Vec<f64>, mu: f64) -> Result<Self> {
        if features.is_empty() {
            return Err(invalid("logistic client needs at least one sample"));
        }
        if features.len() != labels.len() {
            return Err(invalid("features and labels differ in length"));
        }
        if labels.iter().any(|y| *y != 0.0 && *y != 1.0) {
            return Err(invalid("labels must be 0 or 1"));
        }
        let d = features[0].dim();
        if features.iter().any(|a| a.dim() != d) {
            return Err(invalid("features differ in dimension"));
        }
        if mu < 0.0 {
            return Err(invalid("regularizer must be nonnegative"));
        }
        // Hessian is bounded by (1/4n) AᵀA + μI.
        let mut gram = DMatrix::<f64>::zeros(d, d);
        for a in &features {
            for i in 0..d {
                for j in 0..d {
                    gram[(i, j)] += a[i] * a[j];
                }
            }
        }
        gram /= features.len() as f64;
        let top = SymmetricEigen::new(gram).eigenvalues.max();
        Ok(LogisticClient {
            features,
            labels,
            mu,
            beta: top / 4.0 + mu,
        })
    }

    pub fn dim(&self) -> usize {
        self.features[0].dim()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn value(&self, w: &Vector) -> f64 {
        let n = self.features.len() as f64;
        let loss: f64 = self
            .features
            .iter()
            .zip(&self.labels)
            .map(|(a, y)| {
                let z = a.dot(w);
                softplus(z) - y * z
            })
            .sum();
        loss / n + 0.5 * self.mu * w.norm_sq()
    }

    pub fn grad(&self, w: &Vector) -> Vector {
        let n = self.features.len() as f64;
        let mut g = Vector::zeros(w.dim());
        for (a, y) in self.features.iter().zip(&self.labels) {
            g.add_scaled(sigmoid(a.dot(w)) - y, a);
        }
        let mut g = g.scale(1.0 / n);
        g.add_scaled(self.mu, w);
        g
    }

    /// Upper bound `λ_max(AᵀA/n)/4 + μ` on the Hessian norm.
    pub fn smoothness(&self) -> f64 {
        self.beta
    }

    pub fn strong_convexity(&self) -> f64 {
        self.mu
    }
}

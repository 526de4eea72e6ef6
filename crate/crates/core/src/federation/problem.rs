use crate::error::{invalid, Error, Result};
use crate::objectives::{ClientObjective, HardInstance, QuadraticClient};
use crate::vector::Vector;

/// Which construction produced a problem; drives closed-form diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Toy,
    /// Quadratic clients around a common Hessian. `zeta_exact` is set when
    /// every client shares the Hessian exactly.
    Synthetic {
        zeta_exact: Option<f64>,
    },
    Shuffle {
        homogeneity_pct: f64,
    },
    Pl,
    Hard(HardInstance),
    Custom,
}

/// `F(x) = (1/N) Σ F_i(x)` over a fixed set of clients.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedProblem {
    clients: Vec<ClientObjective>,
    x_star: Option<Vector>,
    f_star: Option<f64>,
    global_quadratic: Option<QuadraticClient>,
    family: Family,
}

impl FederatedProblem {
    pub fn new(clients: Vec<ClientObjective>, family: Family) -> Result<Self> {
        let first = clients
            .first()
            .ok_or_else(|| invalid("a federated problem needs at least one client"))?;
        let d = first.dim();
        if let Some(bad) = clients.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        let forms: Option<Vec<QuadraticClient>> = clients.iter().map(|c| c.quadratic_form()).collect();
        let global_quadratic = match forms {
            Some(forms) => {
                let refs: Vec<&QuadraticClient> = forms.iter().collect();
                Some(QuadraticClient::average(&refs)?)
            }
            None => None,
        };
        let mut problem = FederatedProblem {
            clients,
            x_star: None,
            f_star: None,
            global_quadratic,
            family,
        };
        if let Family::Hard(inst) = &problem.family {
            if inst.mu > 0.0 {
                let xs = inst.global_optimum()?;
                problem.set_optimum(xs);
            }
        } else if let Some(xs) = problem.global_quadratic.as_ref().and_then(|q| q.optimum().cloned()) {
            problem.set_optimum(xs);
        }
        Ok(problem)
    }

    fn set_optimum(&mut self, xs: Vector) {
        self.f_star = Some(self.value(&xs));
        self.x_star = Some(xs);
    }

    /// Declares a known global minimizer.
    pub fn with_optimum(mut self, xs: Vector) -> Result<Self> {
        if xs.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: xs.dim(),
            });
        }
        self.set_optimum(xs);
        Ok(self)
    }

    /// Locates the minimizer of a strongly convex problem by gradient descent
    /// with step `1/β` until `‖∇F‖ ≤ tol`.
    pub fn solve_optimum(mut self, tol: f64, max_iters: usize) -> Result<Self> {
        if self.strong_convexity() <= 0.0 {
            return Err(invalid("numerical optimum needs a strongly convex problem"));
        }
        let eta = 1.0 / self.smoothness();
        let mut x = Vector::zeros(self.dim());
        for _ in 0..max_iters {
            let g = self.grad(&x);
            if g.norm() <= tol {
                self.set_optimum(x);
                return Ok(self);
            }
            x.add_scaled(-eta, &g);
        }
        Err(Error::Unsupported(format!(
            "optimum search did not reach gradient norm {tol} in {max_iters} iterations"
        )))
    }

    pub fn n_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn dim(&self) -> usize {
        self.clients[0].dim()
    }

    pub fn clients(&self) -> &[ClientObjective] {
        &self.clients
    }

    pub fn client(&self, i: usize) -> &ClientObjective {
        &self.clients[i]
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn hard_instance(&self) -> Option<&HardInstance> {
        match &self.family {
            Family::Hard(h) => Some(h),
            _ => None,
        }
    }

    pub fn global_quadratic(&self) -> Option<&QuadraticClient> {
        self.global_quadratic.as_ref()
    }

    pub fn x_star(&self) -> Option<&Vector> {
        self.x_star.as_ref()
    }

    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let sum: f64 = self.clients.iter().map(|c| c.value(x)).sum();
        sum / self.n_clients() as f64
    }

    /// Mean of client gradients, summed in client-index order.
    pub fn grad(&self, x: &Vector) -> Vector {
        let mut acc = Vector::zeros(self.dim());
        for c in &self.clients {
            acc += &c.grad(x);
        }
        acc.scale(1.0 / self.n_clients() as f64)
    }

    /// Largest client smoothness constant.
    pub fn smoothness(&self) -> f64 {
        self.clients.iter().map(|c| c.smoothness()).fold(0.0, f64::max)
    }

    /// Strong convexity (or PL constant) of the global objective.
    pub fn strong_convexity(&self) -> f64 {
        if let Family::Hard(h) = &self.family {
            return h.mu;
        }
        if let Some(q) = &self.global_quadratic {
            return q.strong_convexity();
        }
        self.clients
            .iter()
            .map(|c| c.strong_convexity())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn condition_number(&self) -> f64 {
        self.smoothness() / self.strong_convexity()
    }

    /// `F(x) − F(x*)`, evaluated through the quadratic form when available.
    pub fn excess(&self, x: &Vector) -> Option<f64> {
        if let (Some(q), Some(xs)) = (&self.global_quadratic, &self.x_star) {
            let e = x - xs;
            return Some(0.5 * e.dot(&q.apply(&e)));
        }
        self.f_star.map(|fs| self.value(x) - fs)
    }

    pub fn client_optima(&self) -> Vec<Option<Vector>> {
        self.clients.iter().map(|c| c.optimum()).collect()
    }

    pub fn initial_gap(&self, x0: &Vector) -> Option<f64> {
        self.excess(x0)
    }

    pub fn initial_dist_sq(&self, x0: &Vector) -> Option<f64> {
        self.x_star.as_ref().map(|xs| x0.dist_sq(xs))
    }
}

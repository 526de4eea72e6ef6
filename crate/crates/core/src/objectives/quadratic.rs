use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::vector::Vector;

/// `F(x) = ½ xᵀAx − bᵀx + c` with symmetric positive-semidefinite `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticClient {
    a: DMatrix<f64>,
    b: Vector,
    c: f64,
    eig_min: f64,
    eig_max: f64,
    optimum: Option<Vector>,
}

pub(crate) fn to_dvector(v: &Vector) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

pub(crate) fn from_dvector(v: &DVector<f64>) -> Vector {
    Vector::from_slice(v.as_slice())
}

impl QuadraticClient {
    pub fn new(a: DMatrix<f64>, b: Vector, c: f64) -> Result<Self> {
        let d = b.dim();
        if a.nrows() != d || a.ncols() != d {
            return Err(invalid(format!(
                "curvature matrix is {}x{}, linear term has dim {d}",
                a.nrows(),
                a.ncols()
            )));
        }
        let asym = (&a - a.transpose()).abs().max();
        if asym > 1e-10 * (1.0 + a.abs().max()) {
            return Err(invalid("curvature matrix is not symmetric"));
        }
        let eig = SymmetricEigen::new(a.clone());
        let eig_min = eig.eigenvalues.min();
        let eig_max = eig.eigenvalues.max();
        if eig_min < -1e-10 * (1.0 + eig_max.abs()) {
            return Err(invalid(format!("curvature matrix has negative eigenvalue {eig_min}")));
        }
        let optimum = if eig_min > 1e-12 * (1.0 + eig_max) {
            a.clone().cholesky().map(|ch| from_dvector(&ch.solve(&to_dvector(&b))))
        } else {
            None
        };
        Ok(QuadraticClient {
            a,
            b,
            c,
            eig_min: eig_min.max(0.0),
            eig_max,
            optimum,
        })
    }

    /// Diagonal curvature helper.
    pub fn diagonal(diag: &[f64], b: Vector, c: f64) -> Result<Self> {
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
        Self::new(a, b, c)
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear(&self) -> &Vector {
        &self.b
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        from_dvector(&(&self.a * to_dvector(x)))
    }

    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&self.apply(x)) - self.b.dot(x) + self.c
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        &self.apply(x) - &self.b
    }

    pub fn smoothness(&self) -> f64 {
        self.eig_max
    }

    pub fn strong_convexity(&self) -> f64 {
        self.eig_min
    }

    pub fn optimum(&self) -> Option<&Vector> {
        self.optimum.as_ref()
    }

    /// `½ (x − x*)ᵀ A (x − x*)`, which equals `F(x) − F(x*)` without the
    /// cancellation of subtracting two nearby values.
    pub fn excess(&self, x: &Vector) -> Option<f64> {
        let opt = self.optimum.as_ref()?;
        let e = x - opt;
        Some(0.5 * e.dot(&self.apply(&e)))
    }

    /// Uniform average of quadratics of equal dimension.
    pub fn average(items: &[&QuadraticClient]) -> Result<Self> {
        let first = items.first().ok_or_else(|| invalid("empty average"))?;
        let d = first.dim();
        let mut a = DMatrix::zeros(d, d);
        let mut b = Vector::zeros(d);
        let mut c = 0.0;
        for q in items {
            if q.dim() != d {
                return Err(invalid("quadratics of different dimension"));
            }
            a += &q.a;
            b += &q.b;
            c += q.c;
        }
        let n = items.len() as f64;
        a /= n;
        // Re-symmetrize against rounding.
        let a = (&a + a.transpose()) * 0.5;
        Self::new(a, b.scale(1.0 / n), c / n)
    }
}

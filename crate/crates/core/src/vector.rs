//! Dense real vectors used for every model iterate.
//!
//! Checked operations (`axpy`, `try_add`, ...) return an error on dimension
//! mismatch. The operator impls panic instead, the same contract slices have
//! for out-of-bounds indexing.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = 1.0;
        v
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Vector(coords.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    fn check_dim(&self, other: &Vector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// Returns `a * x + y`.
    pub fn axpy(a: f64, x: &Vector, y: &Vector) -> Result<Vector> {
        x.check_dim(y)?;
        Ok(Vector(x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect()))
    }

    /// In place `self += a * x`.
    pub fn add_scaled(&mut self, a: f64, x: &Vector) {
        assert_eq!(self.dim(), x.dim(), "dimension mismatch in add_scaled");
        for (s, xi) in self.0.iter_mut().zip(&x.0) {
            *s += a * xi;
        }
    }

    pub fn try_add(&self, other: &Vector) -> Result<Vector> {
        Vector::axpy(1.0, other, self)
    }

    pub fn try_sub(&self, other: &Vector) -> Result<Vector> {
        Vector::axpy(-1.0, other, self)
    }

    pub fn scale(&self, a: f64) -> Vector {
        Vector(self.0.iter().map(|v| a * v).collect())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dot");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dist_sq");
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// `t * self + (1 - t) * other`.
    pub fn lerp(&self, t: f64, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in lerp");
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect(),
        )
    }

    /// Indices of coordinates with absolute value above `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > threshold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Averages vectors in the given order; the order fixes the rounding.
    pub fn mean<'a, I>(items: I) -> Option<Vector>
    where
        I: IntoIterator<Item = &'a Vector>,
    {
        let mut iter = items.into_iter();
        let first = iter.next()?;
        let mut acc = first.clone();
        let mut count = 1usize;
        for v in iter {
            acc += v;
            count += 1;
        }
        Some(acc.scale(1.0 / count as f64))
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add<&Vector> for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        self.try_add(rhs).expect("dimension mismatch in add")
    }
}

impl Sub<&Vector> for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        self.try_sub(rhs).expect("dimension mismatch in sub")
    }
}

impl Add for Vector {
    type Output = Vector;
    fn add(mut self, rhs: Vector) -> Vector {
        self += &rhs;
        self
    }
}

impl Sub for Vector {
    type Output = Vector;
    fn sub(mut self, rhs: Vector) -> Vector {
        self -= &rhs;
        self
    }
}

impl Mul<&Vector> for f64 {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        rhs.scale(self)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scale(-1.0)
    }
}

impl AddAssign<&Vector> for Vector {
    fn add_assign(&mut self, rhs: &Vector) {
        self.add_scaled(1.0, rhs);
    }
}

impl SubAssign<&Vector> for Vector {
    fn sub_assign(&mut self, rhs: &Vector) {
        self.add_scaled(-1.0, rhs);
    }
}

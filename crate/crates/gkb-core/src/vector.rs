use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense column vector of 64-bit floats.
///
/// The thin wrapper keeps the vector kernels (dot, axpy, scaling) in one
/// place and lets call sites state intent instead of juggling raw slices.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self {
            data: (0..len).map(f).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// self += alpha * x
    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.data.iter_mut().zip(x.data.iter()) {
            *s += alpha * v;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for s in &mut self.data {
            *s *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// self = alpha * x + beta * self
    pub fn axpby(&mut self, alpha: f64, x: &Self, beta: f64) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.data.iter_mut().zip(x.data.iter()) {
            *s = alpha * v + beta * *s;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_fn(self.len(), |i| self.data[i] - other.data[i])
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_fn(self.len(), |i| self.data[i] + other.data[i])
    }

    /// Componentwise multiply, used for diagonal scalings.
    pub fn component_mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_fn(self.len(), |i| self.data[i] * other.data[i])
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_len(&self, expected: usize, context: &'static str) -> Result<()> {
        if self.len() != expected {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                actual: self.len(),
            });
        }
        Ok(())
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(data: Vec<f64>) -> Self {
        Self { data }
    }
}

/// Compensated (Kahan) running sum.
///
/// The stopping rule accumulates squared recursion coefficients over
/// potentially tens of thousands of steps; plain summation drifts enough
/// to move the termination point.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

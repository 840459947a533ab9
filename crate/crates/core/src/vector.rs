use std::ops::{Deref, DerefMut};

/// Dense real vector in `R^d`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn zeros(dim: usize) -> Self {
        WeightVector(vec![0.0; dim])
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        WeightVector(v)
    }

    /// `scale * e_i` in dimension `dim`.
    pub fn basis(dim: usize, i: usize, scale: f64) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = scale;
        WeightVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        distance(&self.0, other)
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &[f64]) {
        axpy(&mut self.0, alpha, x);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        WeightVector(self.0.iter().map(|v| alpha * v).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for WeightVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        WeightVector(v)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Euclidean projection onto the ball of radius `radius` centred at the origin.
pub(crate) fn project_ball(w: &mut [f64], radius: f64) {
    let n = norm(w);
    if n > radius {
        let s = radius / n;
        w.iter_mut().for_each(|v| *v *= s);
    }
}

use std::ops::{Deref, DerefMut};

/// Real dense vector. All norms are Euclidean.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn filled(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    /// `self - other`, panicking on length mismatch.
    pub fn sub(&self, other: &[f64]) -> DenseVector {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        DenseVector(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn scaled(&self, factor: f64) -> DenseVector {
        DenseVector(self.0.iter().map(|v| v * factor).collect())
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(&self) -> Option<DenseVector> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &[f64]) {
        axpy(alpha, x, &mut self.0);
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl From<&[f64]> for DenseVector {
    fn from(values: &[f64]) -> Self {
        Self(values.to_vec())
    }
}

impl FromIterator<f64> for DenseVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    if a.iter().any(|v| v.is_nan()) {
        return f64::NAN;
    }
    // Scaled accumulation keeps tiny and huge entries from under/overflowing.
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let sum: f64 = a.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * sum.sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

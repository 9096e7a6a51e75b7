//! Conditional covariance of a second spin estimate given a first, and
//! readout-noise subtraction.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::fid::CONDITION_LIMIT;
use crate::error::{Error, Result};

/// Spin estimates `(J_z, J_y)` at the reference time from the segments
/// before and after it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinEstimatePair {
    pub shot_id: u64,
    pub before: [f64; 2],
    pub after: [f64; 2],
}

impl SpinEstimatePair {
    pub fn is_finite(&self) -> bool {
        self.before.iter().chain(&self.after).all(|v| v.is_finite())
    }
}

pub fn to_array(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

pub fn from_array(a: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1])
}

fn symmetric_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let tr = m[(0, 0)] + m[(1, 1)];
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let r = half_diff.hypot(off);
    (0.5 * tr - r, 0.5 * tr + r)
}

/// Unbiased sample covariances `(Gamma_before, Gamma_after, Gamma_after_before)`.
pub fn sample_covariances(pairs: &[SpinEstimatePair]) -> Result<(Matrix2<f64>, Matrix2<f64>, Matrix2<f64>)> {
    if pairs.len() < 3 {
        return Err(Error::InvalidInput(format!("conditional covariance needs at least 3 shots, got {}", pairs.len())));
    }
    if let Some(p) = pairs.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(format!("shot {} has non-finite estimates", p.shot_id)));
    }
    let n = pairs.len() as f64;
    let mean = |f: fn(&SpinEstimatePair) -> [f64; 2]| {
        pairs.iter().fold(Vector2::zeros(), |acc, p| acc + Vector2::from(f(p))) / n
    };
    let (m1, m2) = (mean(|p| p.before), mean(|p| p.after));
    let mut c11 = Matrix2::zeros();
    let mut c22 = Matrix2::zeros();
    let mut c21 = Matrix2::zeros();
    for p in pairs {
        let d1 = Vector2::from(p.before) - m1;
        let d2 = Vector2::from(p.after) - m2;
        c11 += d1 * d1.transpose();
        c22 += d2 * d2.transpose();
        c21 += d2 * d1.transpose();
    }
    let norm = 1.0 / (n - 1.0);
    Ok((c11 * norm, c22 * norm, c21 * norm))
}

/// `Gamma_after - Gamma_after_before Gamma_before^{-1} Gamma_before_after`.
///
/// With `ridge = Some(eps)` the inverted block is `Gamma_before + eps tr/2 I`.
pub fn conditional_covariance(pairs: &[SpinEstimatePair], ridge: Option<f64>) -> Result<Matrix2<f64>> {
    let (c11, c22, c21) = sample_covariances(pairs)?;
    conditional_from_blocks(&c11, &c22, &c21, ridge)
}

pub fn conditional_from_blocks(
    before: &Matrix2<f64>,
    after: &Matrix2<f64>,
    cross: &Matrix2<f64>,
    ridge: Option<f64>,
) -> Result<Matrix2<f64>> {
    let mut c11 = *before;
    if let Some(eps) = ridge {
        if !(eps >= 0.0) {
            return Err(Error::InvalidInput("ridge must be non-negative".into()));
        }
        let shift = eps * 0.5 * c11.trace();
        c11 += Matrix2::identity() * shift;
    }
    let (lo, hi) = symmetric_eigenvalues(&c11);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularCovariance { condition });
    }
    let inv = c11.try_inverse().ok_or(Error::SingularCovariance { condition })?;
    let g = after - cross * inv * cross.transpose();
    Ok(0.5 * (g + g.transpose()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSubtracted {
    pub gamma: Matrix2<f64>,
    /// Set when the difference has a negative eigenvalue; no clamping is applied.
    pub negative_eigenvalue: bool,
}

/// Element-wise `gamma_cond - gamma_0`.
pub fn subtract_readout_noise(gamma_cond: &Matrix2<f64>, gamma_0: &Matrix2<f64>) -> NoiseSubtracted {
    let gamma = gamma_cond - gamma_0;
    NoiseSubtracted { gamma, negative_eigenvalue: symmetric_eigenvalues(&gamma).0 < 0.0 }
}

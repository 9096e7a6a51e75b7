//! Linear least-squares estimation of `(J_z, J_y)` at the reference time
//! from a free-induction-decay segment.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tolerated condition number of a normal matrix.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidModelParams {
    /// Rotation angle per unit of spin, rad.
    pub g: f64,
    /// Larmor frequency, rad/s.
    #[serde(rename = "omega_L")]
    pub omega_l: f64,
    /// Transverse decay time, s.
    #[serde(rename = "T2")]
    pub t2: f64,
    /// Offset angle, rad.
    pub theta_0: f64,
    /// Reference time, s.
    pub t_e: f64,
}

impl FidModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t2 > 0.0) {
            return Err(Error::InvalidInput(format!("T2 must be positive, got {}", self.t2)));
        }
        if !(self.g != 0.0 && self.g.is_finite()) {
            return Err(Error::InvalidInput("coupling g must be finite and nonzero".into()));
        }
        if !(self.omega_l.is_finite() && self.theta_0.is_finite() && self.t_e.is_finite()) {
            return Err(Error::InvalidInput("FID parameters must be finite".into()));
        }
        Ok(())
    }

    /// Coefficients of `J_z` and `J_y` in the model angle at time `t`.
    pub fn regressors(&self, t: f64) -> (f64, f64) {
        let dt = t - self.t_e;
        let amp = self.g * (-dt.abs() / self.t2).exp();
        let (s, c) = (self.omega_l * dt).sin_cos();
        (amp * c, -amp * s)
    }

    /// Noiseless model angle for the given spin components.
    pub fn model_angle(&self, t: f64, j_z: f64, j_y: f64) -> f64 {
        let (a, b) = self.regressors(t);
        a * j_z + b * j_y + self.theta_0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinEstimate {
    pub j_z: f64,
    pub j_y: f64,
    /// Estimator covariance in `(z, y)` order.
    pub covariance: [[f64; 2]; 2],
}

impl SpinEstimate {
    pub fn vector(&self) -> Vector2<f64> {
        Vector2::new(self.j_z, self.j_y)
    }
}

fn condition_number(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let (hi, lo) = (0.5 * tr + disc, 0.5 * tr - disc);
    if lo > 0.0 { hi / lo } else { f64::INFINITY }
}

/// Normal matrix `A^T A` of the segment design, with its condition number.
pub fn design_normal_matrix(times: &[f64], params: &FidModelParams) -> (Matrix2<f64>, f64) {
    let mut n = Matrix2::zeros();
    for &t in times {
        let (a, b) = params.regressors(t);
        n += Matrix2::new(a * a, a * b, a * b, b * b);
    }
    (n, condition_number(&n))
}

/// Weighted least-squares fit with independent readout noise of variance
/// `sample_variance` on every sample.
pub fn fit_fid_segment(samples: &[Sample], params: &FidModelParams, sample_variance: f64) -> Result<SpinEstimate> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty FID segment".into()));
    }
    if !(sample_variance >= 0.0) {
        return Err(Error::InvalidInput("readout variance must be non-negative".into()));
    }
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let (normal, condition) = design_normal_matrix(&times, params);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::RankDeficient { condition });
    }
    let mut rhs = Vector2::zeros();
    for s in samples {
        let (a, b) = params.regressors(s.t);
        let r = s.theta - params.theta_0;
        rhs += Vector2::new(a * r, b * r);
    }
    let inv = normal.try_inverse().ok_or(Error::RankDeficient { condition })?;
    let x = inv * rhs;
    let cov = inv * sample_variance;
    Ok(SpinEstimate {
        j_z: x[0],
        j_y: x[1],
        covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
    })
}

/// Segment used by [`calibrate_globals`]: samples and their reference time.
#[derive(Clone, Copy, Debug)]
pub struct CalibrationSegment<'a> {
    pub samples: &'a [Sample],
    pub t_e: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    #[serde(rename = "omega_L")]
    pub omega_l: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    /// Mean fitted offset over segments.
    pub theta_0: f64,
    pub residual_sum_squares: f64,
}

/// Grid search over `(omega_L, T2)`; for each candidate every segment is
/// fitted linearly in `(J_z, J_y, theta_0)` and the residuals summed.
pub fn calibrate_globals(
    segments: &[CalibrationSegment<'_>],
    g: f64,
    omega_grid: &[f64],
    t2_grid: &[f64],
) -> Result<Calibration> {
    if segments.is_empty() || omega_grid.is_empty() || t2_grid.is_empty() {
        return Err(Error::InvalidInput("calibration needs segments and non-empty grids".into()));
    }
    let mut best: Option<Calibration> = None;
    for &omega_l in omega_grid {
        for &t2 in t2_grid {
            let mut rss = 0.0;
            let mut offsets = 0.0;
            let mut ok = true;
            for seg in segments {
                let params = FidModelParams { g, omega_l, t2, theta_0: 0.0, t_e: seg.t_e };
                if params.validate().is_err() {
                    ok = false;
                    break;
                }
                let mut normal = Matrix3::zeros();
                let mut rhs = Vector3::zeros();
                for s in seg.samples {
                    let (a, b) = params.regressors(s.t);
                    let row = Vector3::new(a, b, 1.0);
                    normal += row * row.transpose();
                    rhs += row * s.theta;
                }
                let Some(x) = normal.try_inverse().map(|inv| inv * rhs) else {
                    ok = false;
                    break;
                };
                offsets += x[2];
                rss += seg
                    .samples
                    .iter()
                    .map(|s| {
                        let (a, b) = params.regressors(s.t);
                        (s.theta - a * x[0] - b * x[1] - x[2]).powi(2)
                    })
                    .sum::<f64>();
            }
            if !ok {
                continue;
            }
            if best.as_ref().is_none_or(|b| rss < b.residual_sum_squares) {
                best = Some(Calibration {
                    omega_l,
                    t2,
                    theta_0: offsets / segments.len() as f64,
                    residual_sum_squares: rss,
                });
            }
        }
    }
    best.ok_or(Error::RankDeficient { condition: f64::INFINITY })
}

//! Phase estimation with planar states rotated about the x axis.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::PlanarMoments;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimationSetup {
    pub moments: PlanarMoments,
    /// Radians in `[0, 2 pi)`.
    pub phi: f64,
}

impl PhaseEstimationSetup {
    pub fn new(moments: PlanarMoments, phi: f64) -> Self {
        Self { moments, phi: phi.rem_euclid(2.0 * PI) }
    }
}

/// Mean and variance of `J_z cos(phi) - J_y sin(phi)`.
pub fn rotated_moments(setup: &PhaseEstimationSetup) -> (f64, f64) {
    let m = &setup.moments;
    let (s, c) = setup.phi.sin_cos();
    let mean = m.mean_z * c - m.mean_y * s;
    let var = m.var_z * c * c + m.var_y * s * s - 2.0 * m.cov_yz * s * c;
    (mean, var)
}

fn slope(setup: &PhaseEstimationSetup) -> f64 {
    let m = &setup.moments;
    let (s, c) = setup.phi.sin_cos();
    -m.mean_z * s - m.mean_y * c
}

fn is_blind(value: f64, scale: f64) -> bool {
    !(value.abs() > 1e-13 * scale)
}

/// Error-propagation phase variance `var_out / (d<J_z^out>/dphi)^2`.
pub fn sensitivity(setup: &PhaseEstimationSetup) -> Result<f64> {
    let d = slope(setup);
    if is_blind(d, setup.moments.polarization()) {
        return Err(Error::BlindSpot);
    }
    Ok(rotated_moments(setup).1 / (d * d))
}

/// Reference `|<J_par>| / (<J_z>^2 cos^2 phi + <J_y>^2 sin^2 phi)`.
pub fn sql_sensitivity(moments: &PlanarMoments, phi: f64) -> Result<f64> {
    let (s, c) = phi.sin_cos();
    let denom = moments.mean_z.powi(2) * c * c + moments.mean_y.powi(2) * s * s;
    if is_blind(denom, moments.polarization().powi(2)) {
        return Err(Error::BlindSpot);
    }
    Ok(moments.polarization() / denom)
}

/// Phase variance relative to a state with the same mean spin whose
/// output variance equals `|<J_par>|`; equals `var_out / |<J_par>|` and
/// stays finite where the slope vanishes.
pub fn sensitivity_ratio(setup: &PhaseEstimationSetup) -> Result<f64> {
    let p = setup.moments.polarization();
    if !(p > 0.0) {
        return Err(Error::ZeroPolarization);
    }
    Ok(rotated_moments(setup).1 / p)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let pieces = 8;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + h * i as f64, a + h * (i + 1) as f64);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// Mean of [`sensitivity_ratio`] over `phi` in `[0, 2 pi)`; analytically
/// half the planar squeezing parameter.
pub fn phase_averaged_enhancement(moments: &PlanarMoments) -> Result<f64> {
    let p = moments.polarization();
    if !(p > 0.0) {
        return Err(Error::ZeroPolarization);
    }
    let f = |phi: f64| {
        let (s, c) = phi.sin_cos();
        (moments.var_z * c * c + moments.var_y * s * s - 2.0 * moments.cov_yz * s * c) / p
    };
    Ok(integrate(&f, 0.0, 2.0 * PI, 1e-10) / (2.0 * PI))
}

/// CSV with columns `phi,sensitivity_ratio` on `points` equally spaced phases.
pub fn write_sensitivity_csv<W: Write>(moments: &PlanarMoments, points: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phi", "sensitivity_ratio"])?;
    for i in 0..points {
        let phi = 2.0 * PI * i as f64 / points as f64;
        let r = sensitivity_ratio(&PhaseEstimationSetup::new(*moments, phi))?;
        w.write_record([format!("{phi}"), format!("{r}")])?;
    }
    w.flush()?;
    Ok(())
}

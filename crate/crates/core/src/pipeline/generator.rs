//! Synthetic QND measurement runs with a known ground truth.
//!
//! Per shot the in-plane spin starts Gaussian around the polarization
//! direction, its mean and fluctuations decay by `exp(-eta N_L)`, and the
//! part measured after the reference time carries extra white noise of
//! variance `nu N j N_L` per component. The conditional covariance of the
//! two segment estimates then shrinks by `1 / (1 + d^2 kappa N_L)` with
//! `kappa = g^2 N j / 4` for coherent input and shot-noise readout.

use nalgebra::Matrix2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::covariance::to_array;
use super::fid::{design_normal_matrix, FidModelParams, Sample};
use super::records::{GroupInfo, MeasurementRecord, RunData, RunMetadata, RUN_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::spin::SpinLabel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub atoms: f64,
    #[serde(rename = "two_j")]
    pub spin: SpinLabel,
    /// Rotation angle per unit of spin, rad.
    pub g: f64,
    #[serde(rename = "omega_L")]
    pub omega_l: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    pub theta_0: f64,
    /// Time between probe pulses, s.
    pub pulse_spacing: f64,
    pub photons_per_pulse: f64,
    /// Pulses before the reference time, one entry per group.
    pub pulse_counts: Vec<u32>,
    /// Pulses after the reference time.
    pub post_pulses: u32,
    pub shots_per_group: usize,
    pub noise_shots_per_group: usize,
    /// Polarization loss per photon.
    pub decay_rate: f64,
    /// Added variance per photon per unit of `N j`.
    pub noise_rate: f64,
    /// Initial variance per component in units of the coherent value `N j / 2`.
    pub initial_variance_scale: f64,
    /// Shot-noise readout variance in units of `1 / n`.
    pub readout_noise_scale: f64,
    /// Extra readout noise, rad.
    pub technical_noise: f64,
    /// Angle of the mean spin away from +y towards +z, rad.
    pub frame_angle: f64,
    pub seed: u64,
}

/// Exact moments of the generated estimates for one group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupTruth {
    pub pulses: u32,
    pub photon_number: f64,
    pub coherence: f64,
    pub mean_z: f64,
    pub mean_y: f64,
    /// Atomic conditional covariance, `(z, y)` order.
    pub gamma: [[f64; 2]; 2],
    /// Readout contribution measured without atoms.
    pub gamma_0: [[f64; 2]; 2],
    pub xi_sq: f64,
}

impl GeneratorConfig {
    /// Settings before calibration of `g`, `decay_rate` and `noise_rate`.
    pub fn uncalibrated() -> Self {
        Self {
            atoms: 1.75e6,
            spin: SpinLabel::integer(1),
            g: 2e-7,
            omega_l: 2.0 * PI * 26e3,
            t2: 5e-3,
            theta_0: 1e-3,
            pulse_spacing: 3e-6,
            photons_per_pulse: 4.94e6,
            pulse_counts: (1..=20).map(|i| 5 * i).collect(),
            post_pulses: 50,
            shots_per_group: 453,
            noise_shots_per_group: 453,
            decay_rate: 0.0,
            noise_rate: 0.0,
            initial_variance_scale: 1.0,
            readout_noise_scale: 1.0,
            technical_noise: 0.0,
            frame_angle: 0.0,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        if !(self.atoms > 0.0 && self.atoms.is_finite()) {
            return bad("atom number must be positive");
        }
        if self.spin.two_j() == 0 {
            return bad("particle spin must be at least 1/2");
        }
        if !(self.pulse_spacing > 0.0 && self.photons_per_pulse > 0.0) {
            return bad("pulse spacing and photons per pulse must be positive");
        }
        if self.pulse_counts.is_empty() || self.pulse_counts.iter().any(|&p| p < 2) || self.post_pulses < 2 {
            return bad("invalid schedule: every segment needs at least 2 pulses");
        }
        if self.shots_per_group < 3 || (self.noise_shots_per_group > 0 && self.noise_shots_per_group < 3) {
            return bad("groups need at least 3 shots");
        }
        let non_negative = [
            self.decay_rate,
            self.noise_rate,
            self.initial_variance_scale,
            self.readout_noise_scale,
            self.technical_noise,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("rates and noise scales must be finite and non-negative");
        }
        self.fid_params(self.pulse_counts[0]).validate()
    }

    pub fn readout_variance(&self) -> f64 {
        self.readout_noise_scale / self.photons_per_pulse + self.technical_noise.powi(2)
    }

    fn reference_time(&self, pulses: u32) -> f64 {
        (f64::from(pulses) - 0.5) * self.pulse_spacing
    }

    fn times(&self, pulses: u32) -> Vec<f64> {
        (0..pulses + self.post_pulses).map(|k| f64::from(k) * self.pulse_spacing).collect()
    }

    pub fn fid_params(&self, pulses: u32) -> FidModelParams {
        FidModelParams { g: self.g, omega_l: self.omega_l, t2: self.t2, theta_0: self.theta_0, t_e: self.reference_time(pulses) }
    }

    fn coherent_variance(&self) -> f64 {
        0.5 * self.atoms * self.spin.value()
    }

    fn segment_error(&self, pulses: u32, times: &[f64]) -> Matrix2<f64> {
        let (normal, _) = design_normal_matrix(times, &self.fid_params(pulses));
        normal.try_inverse().unwrap_or_else(|| Matrix2::from_diagonal_element(f64::INFINITY)) * self.readout_variance()
    }

    /// Closed-form moments of the conditional covariance for a group.
    pub fn truth(&self, pulses: u32) -> GroupTruth {
        let times = self.times(pulses);
        let (pre, post) = times.split_at(pulses as usize);
        let n_l = f64::from(pulses) * self.photons_per_pulse;
        let d = (-self.decay_rate * n_l).exp();
        let nj = self.atoms * self.spin.value();
        let prior = Matrix2::identity() * (d * d * self.initial_variance_scale * self.coherent_variance());
        let added = Matrix2::identity() * (self.noise_rate * nj * n_l);
        let err_before = self.segment_error(pulses, pre);
        let err_after = self.segment_error(pulses, post);
        let explained = match (prior + err_before).try_inverse() {
            Some(inv) if prior.max() > 0.0 => prior * inv * prior,
            _ => Matrix2::zeros(),
        };
        let gamma = prior - explained + added;
        let (s, c) = self.frame_angle.sin_cos();
        GroupTruth {
            pulses,
            photon_number: n_l,
            coherence: d,
            mean_z: d * nj * s,
            mean_y: d * nj * c,
            gamma: to_array(&gamma),
            gamma_0: to_array(&err_after),
            xi_sq: gamma.trace() / (d * nj),
        }
    }

    /// Small-angle approximation of [`Self::truth`]'s squeezing parameter,
    /// `a d / (1 + d^2 kappa N_L) + 2 nu N_L / d`.
    pub fn approximate_xi_sq(&self, photon_number: f64) -> f64 {
        let (a, kappa) = self.squeezing_constants();
        let d = (-self.decay_rate * photon_number).exp();
        a * d / (1.0 + d * d * kappa * photon_number) + 2.0 * self.noise_rate * photon_number / d
    }

    fn squeezing_constants(&self) -> (f64, f64) {
        let s0 = self.initial_variance_scale * self.coherent_variance();
        let a = 2.0 * s0 / (self.atoms * self.spin.value());
        let kappa = s0 * self.g * self.g / (2.0 * self.readout_variance() * self.photons_per_pulse);
        (a, kappa)
    }

    /// `nu` making the approximate squeezing parameter stationary at `photon_number`.
    fn stationary_noise_rate(&self, photon_number: f64) -> f64 {
        let (a, kappa) = self.squeezing_constants();
        let eta = self.decay_rate;
        let d = (-eta * photon_number).exp();
        let dd = -eta * d;
        let den = 1.0 + d * d * kappa * photon_number;
        let slope = a * (dd * den - d * (2.0 * d * dd * kappa * photon_number + d * d * kappa)) / (den * den);
        (-slope * d / (2.0 * (1.0 + eta * photon_number))).max(0.0)
    }

    /// Chooses `decay_rate` for the target coherence at `optimum_pulses`,
    /// then `g` and `noise_rate` so that the squeezing parameter there
    /// equals `target_xi_sq` and is stationary in `N_L`.
    pub fn calibrated(mut self, target_xi_sq: f64, target_coherence: f64, optimum_pulses: u32) -> Result<Self> {
        if !(target_coherence > 0.0 && target_coherence <= 1.0 && target_xi_sq > 0.0) {
            return Err(Error::InvalidInput("calibration targets out of range".into()));
        }
        let n_star = f64::from(optimum_pulses) * self.photons_per_pulse;
        self.decay_rate = -target_coherence.ln() / n_star;
        let at = |log_g: f64| {
            let mut c = self.clone();
            c.g = log_g.exp();
            c.noise_rate = c.stationary_noise_rate(n_star);
            let xi = c.truth(optimum_pulses).xi_sq;
            (c, xi)
        };
        let (mut lo, mut hi) = (1e-12f64.ln(), 1e-3f64.ln());
        if !(at(lo).1 > target_xi_sq && at(hi).1 < target_xi_sq) {
            return Err(Error::InvalidInput(format!("target xi^2 = {target_xi_sq} is not reachable")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid).1 > target_xi_sq {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (c, _) = at(0.5 * (lo + hi));
        c.validate()?;
        Ok(c)
    }

    pub fn metadata(&self) -> RunMetadata {
        let mut next = 0u64;
        let mut ids = |count: usize| {
            let v: Vec<u64> = (next..next + count as u64).collect();
            next += count as u64;
            v
        };
        let groups = self
            .pulse_counts
            .iter()
            .map(|&p| GroupInfo {
                pulses: p,
                photons_per_pulse: self.photons_per_pulse,
                t_e: self.reference_time(p),
                atom_shots: ids(self.shots_per_group),
                noise_shots: ids(self.noise_shots_per_group),
            })
            .collect();
        RunMetadata {
            schema_version: RUN_SCHEMA_VERSION,
            atoms: self.atoms,
            spin: self.spin,
            g: self.g,
            omega_l: self.omega_l,
            t2: self.t2,
            theta_0: self.theta_0,
            readout_variance: self.readout_variance(),
            groups,
            generator: Some(self.clone()),
        }
    }

    fn shot(&self, group: &GroupInfo, shot_id: u64, with_atoms: bool) -> MeasurementRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(shot_id);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let n_l = group.photon_number();
        let (mut before, mut after) = ([0.0; 2], [0.0; 2]);
        if with_atoms {
            let nj = self.atoms * self.spin.value();
            let d = (-self.decay_rate * n_l).exp();
            let spread = (self.initial_variance_scale * self.coherent_variance()).sqrt();
            let (s, c) = self.frame_angle.sin_cos();
            before = [d * (nj * s + spread * normal()), d * (nj * c + spread * normal())];
            let kick = (self.noise_rate * nj * n_l).sqrt();
            after = [before[0] + kick * normal(), before[1] + kick * normal()];
        }
        let params = self.fid_params(group.pulses);
        let sigma = self.readout_variance().sqrt();
        let samples = self
            .times(group.pulses)
            .into_iter()
            .enumerate()
            .map(|(k, t)| {
                let spin = if k < group.pulses as usize { before } else { after };
                let theta = params.model_angle(t, spin[0], spin[1]) + sigma * normal();
                Sample { t, theta }
            })
            .collect();
        MeasurementRecord { shot_id, photons_per_pulse: group.photons_per_pulse, pulses: group.pulses, samples }
    }
}

impl Default for GeneratorConfig {
    /// Calibrated to `xi^2 = 0.32` and coherence 0.83 at `N_L = 2.47e8`.
    fn default() -> Self {
        Self::uncalibrated().calibrated(0.32, 0.83, 50).expect("built-in calibration targets are reachable")
    }
}

/// Generates every shot of every group; identical for a given seed
/// regardless of thread count.
pub fn generate_synthetic_run(config: &GeneratorConfig) -> Result<RunData> {
    config.validate()?;
    let metadata = config.metadata();
    let jobs: Vec<(&GroupInfo, u64, bool)> = metadata
        .groups
        .iter()
        .flat_map(|g| {
            g.atom_shots.iter().map(move |&id| (g, id, true)).chain(g.noise_shots.iter().map(move |&id| (g, id, false)))
        })
        .collect();
    let records = jobs.par_iter().map(|&(g, id, atoms)| config.shot(g, id, atoms)).collect();
    Ok(RunData { metadata, records })
}

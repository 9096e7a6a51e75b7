//! Per-group estimation of planar moments and depth certification.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::{conditional_covariance, subtract_readout_noise, to_array, SpinEstimatePair};
use super::fid::fit_fid_segment;
use super::records::{GroupInfo, MeasurementRecord, RunData, RunMetadata};
use crate::criteria::{entanglement_depth, xi_parallel, CriterionConfig, CriterionData, DepthVerdict, FractionEntry};
use crate::error::{Error, Result};
use crate::spin::PlanarMoments;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub criteria: CriterionConfig,
    pub bootstrap_resamples: usize,
    pub min_shots: usize,
    /// Relative ridge added to the inverted covariance block; off by default.
    pub ridge: Option<f64>,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { criteria: CriterionConfig::default(), bootstrap_resamples: 500, min_shots: 3, ridge: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub photon_number: f64,
    pub pulses: u32,
    pub photons_per_pulse: f64,
    pub shots: usize,
    pub noise_shots: usize,
    pub xi_sq: f64,
    /// Bootstrap standard deviation of `xi_sq`.
    pub xi_sigma: f64,
    /// `|<J_par>| / N`
    pub polarization_per_atom: f64,
    pub moments: PlanarMoments,
    pub gamma: [[f64; 2]; 2],
    pub gamma_0: [[f64; 2]; 2],
    /// Trace of the readout-noise covariance.
    pub readout_noise: f64,
    pub negative_eigenvalue: bool,
    /// Absent when a variance is negative after noise subtraction.
    pub verdict: Option<DepthVerdict>,
    pub fractions: Vec<FractionEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedGroup {
    pub pulses: u32,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub criteria: CriterionConfig,
    pub bootstrap_resamples: usize,
    pub groups: Vec<GroupReport>,
    pub skipped: Vec<SkippedGroup>,
}

impl PipelineReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Columns `N_L,xi_sq,depth,f_2,...,f_{k_max+1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ks: Vec<u32> = (1..=self.criteria.k_max).collect();
        let mut header = vec!["N_L".to_string(), "xi_sq".to_string(), "depth".to_string()];
        header.extend(ks.iter().map(|k| format!("f_{}", k + 1)));
        w.write_record(&header)?;
        for g in &self.groups {
            let mut row = vec![g.photon_number.to_string(), g.xi_sq.to_string(), g.verdict.as_ref().map(|v| v.certified_depth.to_string()).unwrap_or_default()];
            for k in &ks {
                row.push(g.fractions.iter().find(|f| f.k == *k).map(|f| f.fraction.to_string()).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Group with the smallest squeezing parameter.
    pub fn best_group(&self) -> Option<&GroupReport> {
        self.groups.iter().min_by(|a, b| a.xi_sq.total_cmp(&b.xi_sq))
    }
}

/// Fits both segments of each shot; the result is ordered by shot id.
pub fn estimate_pairs(records: &[&MeasurementRecord], meta: &RunMetadata, group: &GroupInfo) -> Result<Vec<SpinEstimatePair>> {
    let params = meta.fid_params(group);
    let mut pairs = records
        .par_iter()
        .map(|r| {
            let a = fit_fid_segment(r.before(), &params, meta.readout_variance)?;
            let b = fit_fid_segment(r.after(), &params, meta.readout_variance)?;
            Ok(SpinEstimatePair { shot_id: r.shot_id, before: [a.j_z, a.j_y], after: [b.j_z, b.j_y] })
        })
        .collect::<Result<Vec<_>>>()?;
    pairs.sort_by_key(|p| p.shot_id);
    Ok(pairs)
}

struct GroupEstimate {
    moments: PlanarMoments,
    gamma: Matrix2<f64>,
    gamma_0: Matrix2<f64>,
    negative_eigenvalue: bool,
}

fn estimate(atoms: &[SpinEstimatePair], noise: &[SpinEstimatePair], meta: &RunMetadata, ridge: Option<f64>) -> Result<GroupEstimate> {
    let cond = conditional_covariance(atoms, ridge)?;
    let gamma_0 = if noise.is_empty() { Matrix2::zeros() } else { conditional_covariance(noise, ridge)? };
    let sub = subtract_readout_noise(&cond, &gamma_0);
    let mean = atoms.iter().fold(Vector2::zeros(), |acc, p| acc + Vector2::from(p.after)) / atoms.len() as f64;
    let moments = PlanarMoments {
        mean_z: mean[0],
        mean_y: mean[1],
        var_z: sub.gamma[(0, 0)],
        var_y: sub.gamma[(1, 1)],
        cov_yz: sub.gamma[(0, 1)],
        mean_n: meta.atoms,
        spin: meta.spin,
    };
    Ok(GroupEstimate { moments, gamma: sub.gamma, gamma_0, negative_eigenvalue: sub.negative_eigenvalue })
}

fn resample(rng: &mut ChaCha8Rng, from: &[SpinEstimatePair]) -> Vec<SpinEstimatePair> {
    (0..from.len()).map(|_| from[rng.random_range(0..from.len())]).collect()
}

/// Standard deviation of `xi_sq` over shot resamples; failed resamples are dropped.
pub fn bootstrap_xi_sigma(
    atoms: &[SpinEstimatePair],
    noise: &[SpinEstimatePair],
    meta: &RunMetadata,
    resamples: usize,
    seed: u64,
    ridge: Option<f64>,
) -> f64 {
    let values: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let a = resample(&mut rng, atoms);
            let n = resample(&mut rng, noise);
            let e = estimate(&a, &n, meta, ridge).ok()?;
            xi_parallel(&e.moments).ok().filter(|x| x.is_finite())
        })
        .collect();
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Fits, conditions, subtracts readout noise and certifies each group.
pub fn analyze_run(run: &RunData, config: &AnalysisConfig, data: &CriterionData) -> Result<PipelineReport> {
    config.criteria.validate()?;
    let meta = &run.metadata;
    if meta.groups.len() < 2 {
        return Err(Error::InvalidInput(format!("analysis needs at least 2 photon-number groups, got {}", meta.groups.len())));
    }
    let by_id: HashMap<u64, &MeasurementRecord> = run.records.iter().map(|r| (r.shot_id, r)).collect();
    let lookup = |ids: &[u64]| -> Result<Vec<&MeasurementRecord>> {
        ids.iter()
            .map(|id| by_id.get(id).copied().ok_or_else(|| Error::Schema(format!("shot {id} has no samples"))))
            .collect()
    };

    let mut groups = Vec::new();
    let mut skipped = Vec::new();
    for (index, group) in meta.groups.iter().enumerate() {
        let min = config.min_shots.max(3);
        if group.atom_shots.len() < min || (!group.noise_shots.is_empty() && group.noise_shots.len() < min) {
            let reason = format!("fewer than {min} shots");
            eprintln!("warning: skipping group with {} pulses: {reason}", group.pulses);
            skipped.push(SkippedGroup { pulses: group.pulses, reason });
            continue;
        }
        let atoms = estimate_pairs(&lookup(&group.atom_shots)?, meta, group)?;
        let noise = estimate_pairs(&lookup(&group.noise_shots)?, meta, group)?;
        let est = estimate(&atoms, &noise, meta, config.ridge)?;
        let sigma = bootstrap_xi_sigma(
            &atoms,
            &noise,
            meta,
            config.bootstrap_resamples,
            config.seed.wrapping_add(index as u64),
            config.ridge,
        );
        let xi_sq = xi_parallel(&est.moments)?;
        let verdict = if est.moments.var_y < 0.0 || est.moments.var_z < 0.0 {
            eprintln!("warning: group with {} pulses has negative variances after noise subtraction", group.pulses);
            None
        } else {
            Some(entanglement_depth(&est.moments, Some(sigma), &config.criteria, data)?)
        };
        groups.push(GroupReport {
            photon_number: group.photon_number(),
            pulses: group.pulses,
            photons_per_pulse: group.photons_per_pulse,
            shots: atoms.len(),
            noise_shots: noise.len(),
            xi_sq,
            xi_sigma: sigma,
            polarization_per_atom: est.moments.polarization() / meta.atoms,
            moments: est.moments,
            gamma: to_array(&est.gamma),
            gamma_0: to_array(&est.gamma_0),
            readout_noise: est.gamma_0.trace(),
            negative_eigenvalue: est.negative_eigenvalue,
            fractions: verdict.as_ref().map(|v| v.fraction_entangled.clone()).unwrap_or_default(),
            verdict,
        });
    }
    Ok(PipelineReport {
        schema_version: REPORT_SCHEMA_VERSION,
        criteria: config.criteria.clone(),
        bootstrap_resamples: config.bootstrap_resamples,
        groups,
        skipped,
    })
}

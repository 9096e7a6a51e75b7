//! Shared fixtures for the benchmarks.

use pqs_depth::criteria::{CriterionConfig, CriterionData, CriterionKind};
use pqs_depth::pipeline::GeneratorConfig;
use pqs_depth::{CurveProvider, CurveSettings, SpinLabel, ZetaTable};

/// Two photon-number groups of `shots` shots each around the calibrated optimum.
pub fn run_config(shots: usize) -> GeneratorConfig {
    GeneratorConfig { pulse_counts: vec![30, 50], shots_per_group: shots, noise_shots_per_group: shots, ..GeneratorConfig::default() }
}

/// Linear criterion data for spin-1 particles with the printed table.
pub fn linear_data(k_max: u32) -> (CriterionConfig, CriterionData) {
    let config = CriterionConfig { k_max, which: CriterionKind::LinearZeta, tolerance: 1e-9 };
    let provider = CurveProvider::new(CurveSettings::default(), None);
    let data = CriterionData::prepare(SpinLabel::integer(1), &config, Some(ZetaTable::published()), &provider)
        .expect("spin-1 curves");
    (config, data)
}

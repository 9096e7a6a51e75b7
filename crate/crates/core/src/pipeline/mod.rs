//! Synthetic QND measurement records, free-induction-decay estimation,
//! conditional covariances and depth-versus-photon-number reports.

mod analysis;
mod covariance;
mod fid;
mod generator;
mod records;

pub use analysis::{
    analyze_run, bootstrap_xi_sigma, estimate_pairs, AnalysisConfig, GroupReport, PipelineReport, SkippedGroup,
    REPORT_SCHEMA_VERSION,
};
pub use covariance::{
    conditional_covariance, conditional_from_blocks, from_array, sample_covariances, subtract_readout_noise, to_array,
    NoiseSubtracted, SpinEstimatePair,
};
pub use fid::{
    calibrate_globals, design_normal_matrix, fit_fid_segment, Calibration, CalibrationSegment, FidModelParams, Sample,
    SpinEstimate, CONDITION_LIMIT,
};
pub use generator::{generate_synthetic_run, GeneratorConfig, GroupTruth};
pub use records::{
    read_metadata, read_records_csv, read_run, sidecar_path, write_records_csv, write_run, GroupInfo, MeasurementRecord,
    RunData, RunMetadata, RUN_SCHEMA_VERSION,
};

//! Measurement records: one CSV per run plus a JSON sidecar.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fid::{FidModelParams, Sample};
use super::generator::GeneratorConfig;
use crate::error::{Error, Result};
use crate::spin::SpinLabel;

pub const RUN_SCHEMA_VERSION: u32 = 1;

/// Samples of one shot. The first `pulses` samples precede the reference
/// time; the rest follow it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub shot_id: u64,
    pub photons_per_pulse: f64,
    pub pulses: u32,
    pub samples: Vec<Sample>,
}

impl MeasurementRecord {
    /// `N_L = p n`
    pub fn photon_number(&self) -> f64 {
        f64::from(self.pulses) * self.photons_per_pulse
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.photon_number() > 0.0) {
            return Err(Error::InvalidInput(format!("shot {}: photon number must be positive", self.shot_id)));
        }
        if self.samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidInput(format!("shot {}: times must be strictly increasing", self.shot_id)));
        }
        if self.samples.len() <= self.pulses as usize {
            return Err(Error::InvalidInput(format!("shot {}: no samples after the reference time", self.shot_id)));
        }
        Ok(())
    }

    pub fn before(&self) -> &[Sample] {
        &self.samples[..(self.pulses as usize).min(self.samples.len())]
    }

    pub fn after(&self) -> &[Sample] {
        &self.samples[(self.pulses as usize).min(self.samples.len())..]
    }
}

/// Shots sharing one probe setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupInfo {
    pub pulses: u32,
    pub photons_per_pulse: f64,
    /// Reference time, s.
    pub t_e: f64,
    pub atom_shots: Vec<u64>,
    /// Shots taken without atoms, for the readout-noise covariance.
    pub noise_shots: Vec<u64>,
}

impl GroupInfo {
    pub fn photon_number(&self) -> f64 {
        f64::from(self.pulses) * self.photons_per_pulse
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub atoms: f64,
    #[serde(rename = "two_j")]
    pub spin: SpinLabel,
    pub g: f64,
    #[serde(rename = "omega_L")]
    pub omega_l: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    pub theta_0: f64,
    /// Per-sample readout variance used to weight the fits, rad^2.
    pub readout_variance: f64,
    pub groups: Vec<GroupInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
}

impl RunMetadata {
    pub fn fid_params(&self, group: &GroupInfo) -> FidModelParams {
        FidModelParams { g: self.g, omega_l: self.omega_l, t2: self.t2, theta_0: self.theta_0, t_e: group.t_e }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunData {
    pub metadata: RunMetadata,
    pub records: Vec<MeasurementRecord>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    shot_id: u64,
    t: f64,
    theta: f64,
    n: f64,
    pulse_index: u32,
}

/// Sidecar path next to a record CSV: same stem, `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_records_csv<W: Write>(records: &[MeasurementRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        for (i, s) in r.samples.iter().enumerate() {
            w.serialize(Row { shot_id: r.shot_id, t: s.t, theta: s.theta, n: r.photons_per_pulse, pulse_index: i as u32 })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses rows back into records; the split point of each shot comes from
/// its group in `metadata`.
pub fn read_records_csv<R: Read>(input: R, metadata: &RunMetadata) -> Result<Vec<MeasurementRecord>> {
    let mut pulses_of: HashMap<u64, u32> = HashMap::new();
    for g in &metadata.groups {
        for &id in g.atom_shots.iter().chain(&g.noise_shots) {
            if pulses_of.insert(id, g.pulses).is_some() {
                return Err(Error::Schema(format!("shot {id} listed in more than one group")));
            }
        }
    }
    let mut shots: BTreeMap<u64, (f64, Vec<(u32, Sample)>)> = BTreeMap::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: Row = row?;
        let entry = shots.entry(row.shot_id).or_insert((row.n, Vec::new()));
        if entry.0 != row.n {
            return Err(Error::Schema(format!("shot {}: inconsistent photon numbers", row.shot_id)));
        }
        entry.1.push((row.pulse_index, Sample { t: row.t, theta: row.theta }));
    }
    shots
        .into_iter()
        .map(|(shot_id, (n, mut rows))| {
            let pulses = *pulses_of
                .get(&shot_id)
                .ok_or_else(|| Error::Schema(format!("shot {shot_id} is not assigned to any group")))?;
            rows.sort_by_key(|r| r.0);
            if rows.iter().enumerate().any(|(i, r)| r.0 as usize != i) {
                return Err(Error::Schema(format!("shot {shot_id}: pulse indices must be 0..len without gaps")));
            }
            let rec = MeasurementRecord { shot_id, photons_per_pulse: n, pulses, samples: rows.into_iter().map(|r| r.1).collect() };
            rec.validate()?;
            Ok(rec)
        })
        .collect()
}

pub fn write_run(run: &RunData, csv_path: &Path) -> Result<()> {
    write_records_csv(&run.records, BufWriter::new(File::create(csv_path)?))?;
    let mut side = BufWriter::new(File::create(sidecar_path(csv_path))?);
    serde_json::to_writer_pretty(&mut side, &run.metadata)?;
    side.flush()?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<RunMetadata> {
    let meta: RunMetadata = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if meta.schema_version != RUN_SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "unsupported run schema version {} (expected {RUN_SCHEMA_VERSION})",
            meta.schema_version
        )));
    }
    Ok(meta)
}

pub fn read_run(csv_path: &Path) -> Result<RunData> {
    let metadata = read_metadata(&sidecar_path(csv_path))?;
    let records = read_records_csv(BufReader::new(File::open(csv_path)?), &metadata)?;
    Ok(RunData { metadata, records })
}

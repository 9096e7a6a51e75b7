//! Bound curves built from ground-state sweeps: the single-block curve,
//! the k-producibility hull, the orthogonal-variance curve and the
//! `zeta^2_J` constants.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hull::{
    double_legendre, legendre_breakpoints, legendre_value, lower_hull, min_slope_increment, mirrored_hull_on_unit,
    upper_envelope, PiecewiseLinear,
};
use crate::solver::{
    constrained_minimum, solve_block, GridConfig, LagrangianParams, Objective, PlanarBlock, SolverConfig,
    SweepResult, sweep_objective, SOLVER_VERSION,
};
use crate::spin::SpinLabel;

const CURVE_SCHEMA_VERSION: u32 = 1;

/// Vertices closer to the origin are ignored when locating the tangent.
const MIN_RATIO_X: f64 = 1e-6;

/// Environment variable naming the curve cache directory.
pub const CACHE_DIR_ENV: &str = "PQSDEPTH_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    SymmetricG,
    ProducibilityHull,
    SmF,
}

/// `k` is absent for single-block curves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CurveIdentity {
    pub k: Option<u32>,
    pub two_j: u32,
}

impl CurveIdentity {
    pub fn block(spin: SpinLabel) -> Self {
        Self { k: None, two_j: spin.two_j() }
    }

    pub fn group(k: u32, j: SpinLabel) -> Self {
        Self { k: Some(k), two_j: j.two_j() }
    }

    pub fn spin(&self) -> SpinLabel {
        SpinLabel::from_two_j(self.two_j)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CurveMode {
    /// Extreme points of the lower convex envelope from a multiplier sweep.
    Envelope,
    /// Pointwise constrained minima on a uniform grid (possibly non-convex).
    Exact { samples: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveSettings {
    pub grid: GridConfig,
    pub solver: SolverConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub mode: CurveMode,
    pub grid: GridConfig,
    pub shift_tolerance: f64,
    pub eigen_tolerance: f64,
    pub solver_version: String,
    pub unconverged_samples: usize,
    /// Largest gap between the point-union hull and the double Legendre transform.
    #[serde(default)]
    pub legendre_deviation: Option<f64>,
    /// Largest amount by which the chord hull through realized points exceeds
    /// the certified tangent envelope.
    #[serde(default)]
    pub discretization_gap: Option<f64>,
    /// Point minimizing `value / X`, where the tangent through the origin touches.
    #[serde(default)]
    pub tangent: Option<(f64, f64)>,
}

impl CurveMetadata {
    fn new(mode: CurveMode, settings: &CurveSettings) -> Self {
        Self {
            mode,
            grid: settings.grid.clone(),
            shift_tolerance: settings.solver.shift_tolerance,
            eigen_tolerance: settings.solver.eigen.tolerance,
            solver_version: SOLVER_VERSION.to_string(),
            unconverged_samples: 0,
            legendre_deviation: None,
            discretization_gap: None,
            tangent: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub schema_version: u32,
    pub kind: CurveKind,
    pub identity: CurveIdentity,
    /// `(X, value)` with strictly increasing `X` in `[0, 1]`.
    pub points: Vec<(f64, f64)>,
    pub metadata: CurveMetadata,
}

impl BoundCurve {
    pub fn eval(&self, x: f64) -> Result<f64> {
        curve_eval(self, x)
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.points.first().map_or(f64::NAN, |p| p.0), self.points.last().map_or(f64::NAN, |p| p.0))
    }

    /// `(X, value / X)` minimizing the ratio over stored points away from the origin.
    pub fn min_ratio(&self) -> Option<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.0 >= MIN_RATIO_X)
            .map(|&(x, v)| (x, v / x))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn is_convex(&self, tolerance: f64) -> bool {
        self.points.len() < 3 || min_slope_increment(&self.points) >= -tolerance
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        if c.schema_version != CURVE_SCHEMA_VERSION {
            return Err(Error::Schema(format!("unsupported curve schema version {}", c.schema_version)));
        }
        if c.points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Schema("curve abscissae must be strictly increasing".into()));
        }
        Ok(c)
    }

    /// CSV with columns `X,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["X", "value"])?;
        for &(x, v) in &self.points {
            w.write_record([format!("{x}"), format!("{v}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Points from a CSV written by [`Self::write_csv`].
    pub fn read_csv_points<R: Read>(input: R) -> Result<Vec<(f64, f64)>> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["X", "value"] {
            return Err(Error::Schema(format!("expected header X,value, found {:?}", headers)));
        }
        let mut pts = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Schema(format!("row {}: column {} is not a number", line + 2, i + 1)))
            };
            pts.push((parse(0)?, parse(1)?));
        }
        Ok(pts)
    }
}

/// Piecewise-linear evaluation; `X` outside the sampled range is an error.
pub fn curve_eval(curve: &BoundCurve, x: f64) -> Result<f64> {
    PiecewiseLinear::new(&curve.points).eval(x)
}

/// Point of a planar sweep minimizing `value / X`.
#[derive(Clone, Copy, Debug)]
struct Tangent {
    ratio: f64,
    point: (f64, f64),
    /// Multiplier whose ground state is `point`.
    lambda: f64,
}

/// Per-block sweep data shared by several curve constructions.
struct BlockData {
    sweep: SweepResult,
    tangent: Option<Tangent>,
}

impl BlockData {
    fn compute(spin: SpinLabel, objective: Objective, settings: &CurveSettings) -> Result<Self> {
        let sweep = sweep_objective(spin, objective, &settings.grid, &settings.solver)?;
        let tangent = match objective {
            Objective::Planar => Some(refine_tangent(&sweep, &settings.solver)?),
            Objective::OrthogonalOnly => None,
        };
        Ok(Self { sweep, tangent })
    }

    /// Normalized realized points with the exact coherent endpoint appended.
    fn points(&self) -> Vec<(f64, f64)> {
        let mut pts = self.sweep.points();
        if let Some(t) = self.tangent {
            pts.push(t.point);
        }
        pts.push((1.0, 0.5));
        if self.sweep.objective == Objective::OrthogonalOnly {
            // Any L_z eigenstate has zero orthogonal variance and zero polarization.
            pts.push((0.0, 0.0));
        }
        pts
    }

    /// `(lambda, L(lambda))` at every multiplier solved to a fixed point,
    /// ascending, with `L` the Legendre value over the realized points.
    fn lines(&self) -> Vec<(f64, f64)> {
        let pts = self.points();
        let mut lambdas: Vec<f64> =
            self.sweep.samples.iter().filter(|s| s.converged).map(|s| s.params.lambda).collect();
        lambdas.extend(self.tangent.map(|t| t.lambda));
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        lambdas.into_iter().map(|l| (l, legendre_value(&pts, l))).collect()
    }
}

/// Lower estimate of a concave Legendre function known at ascending
/// multipliers: chords inside the sampled range, the last value continued
/// with slope `-x_max` above it, and the first value below it.
fn concave_lower(lines: &[(f64, f64)], x_max: f64, lambda: f64) -> f64 {
    let i = lines.partition_point(|l| l.0 <= lambda);
    if i == 0 {
        return lines.first().map_or(f64::INFINITY, |l| l.1);
    }
    if i == lines.len() {
        let (l, v) = lines[i - 1];
        return v - (lambda - l) * x_max;
    }
    let (a, b) = (lines[i - 1], lines[i]);
    a.1 + (b.1 - a.1) * (lambda - a.0) / (b.0 - a.0)
}

/// Certified curve: the maximum of the tangent lines `L(lambda) + lambda X`
/// on `[0, 1]`. Every line lies below all realizable points, so the curve
/// never exceeds the true convex envelope.
fn tangent_envelope(lines: &[(f64, f64)]) -> Vec<(f64, f64)> {
    upper_envelope(lines, 0.0, 1.0)
}

/// Largest amount by which `chord` exceeds `certified` on probe abscissae.
fn discretization_gap(chord: &[(f64, f64)], certified: &[(f64, f64)]) -> Result<f64> {
    let (a, b) = (PiecewiseLinear::new(chord), PiecewiseLinear::new(certified));
    let probe = chord.iter().chain(certified).map(|p| p.0).chain((0..=400).map(|i| i as f64 / 400.0));
    let mut gap = 0.0f64;
    for x in probe {
        gap = gap.max(a.eval(x)? - b.eval(x)?);
    }
    Ok(gap)
}

/// Locates the multiplier where the Legendre value crosses zero; there the
/// ground state touches the tangent `value = zeta^2 X`.
fn refine_tangent(sweep: &SweepResult, cfg: &SolverConfig) -> Result<Tangent> {
    let spin = sweep.spin;
    let block = PlanarBlock::new(spin);
    let branch = &sweep.samples[1..];
    let legendre = |x: f64, v: f64, l: f64| v - l * x;
    let best = sweep
        .samples
        .iter()
        .filter(|s| s.converged)
        .map(|s| (s.normalized_point(), s.params.lambda))
        .filter(|(p, _)| p.0 > 0.0)
        .map(|((x, v), lambda)| Tangent { ratio: v / x, point: (x, v), lambda })
        .min_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .ok_or_else(|| Error::InvalidInput("sweep has no polarized sample".into()))?;
    let Some(i) = branch.iter().position(|s| {
        let (x, v) = s.normalized_point();
        legendre(x, v, s.params.lambda) < 0.0
    }) else {
        return Ok(best);
    };
    if i == 0 {
        return Ok(best);
    }
    let (mut lo, mut hi) = (branch[i - 1].params.lambda, branch[i].params.lambda);
    let (x, v) = branch[i - 1].normalized_point();
    let mut below = Tangent { ratio: v / x, point: (x, v), lambda: lo };
    let mut warm = branch[i].params;
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let sol = solve_block(&block, Objective::Planar, LagrangianParams { lambda: mid, ..warm }, cfg)?;
        let (x, v) = sol.normalized_point();
        if legendre(x, v, mid) >= 0.0 {
            lo = mid;
            if sol.converged && x > 0.0 {
                below = Tangent { ratio: v / x, point: (x, v), lambda: mid };
            }
        } else {
            hi = mid;
            warm = sol.params;
        }
    }
    Ok(if below.ratio <= best.ratio + 1e-12 { below } else { best })
}

/// Single-block planar curve `G^sy_J`.
pub fn symmetric_curve(spin: SpinLabel, mode: CurveMode, settings: &CurveSettings) -> Result<BoundCurve> {
    if spin.two_j() == 0 {
        return Err(Error::InvalidInput("spin must be at least 1/2".into()));
    }
    let identity = CurveIdentity::block(spin);
    let mut metadata = CurveMetadata::new(mode, settings);
    let points = match mode {
        CurveMode::Envelope => {
            let data = BlockData::compute(spin, Objective::Planar, settings)?;
            metadata.unconverged_samples = data.sweep.unconverged().len();
            let certified = tangent_envelope(&data.lines());
            metadata.discretization_gap = Some(discretization_gap(&mirrored_hull_on_unit(&data.points()), &certified)?);
            certified
        }
        CurveMode::Exact { samples } => exact_points(spin, Objective::Planar, samples, settings)?,
    };
    let mut curve = BoundCurve { schema_version: CURVE_SCHEMA_VERSION, kind: CurveKind::SymmetricG, identity, points, metadata };
    curve.metadata.tangent = curve.min_ratio();
    Ok(curve)
}

fn exact_points(spin: SpinLabel, objective: Objective, samples: usize, settings: &CurveSettings) -> Result<Vec<(f64, f64)>> {
    let n = samples.max(2);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 / (n - 1) as f64;
            constrained_minimum(spin, objective, x, &settings.solver).map(|c| (x, c.value))
        })
        .collect()
}

/// `zeta^2_J`: minimal `var_sum / (J X)` over single spin-J states.
pub fn zeta(spin: SpinLabel, settings: &CurveSettings) -> Result<f64> {
    if spin.two_j() == 0 {
        return Err(Error::InvalidInput("spin must be at least 1/2".into()));
    }
    let coarse = CurveSettings {
        grid: GridConfig { max_gap: f64::INFINITY, tail_decades: 0, ..settings.grid.clone() },
        solver: settings.solver.clone(),
    };
    let data = BlockData::compute(spin, Objective::Planar, &coarse)?;
    Ok(data.tangent.map(|t| t.ratio).unwrap_or(f64::NAN))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaSource {
    Computed,
    Published,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaTable {
    /// Keyed by `2 J`.
    pub entries: BTreeMap<u32, f64>,
    pub source: ZetaSource,
    pub solver_version: String,
}

/// The printed table, `J = 1..27`.
const PUBLISHED_ZETA: [f64; 27] = [
    0.45, 0.44906, 0.38945, 0.35321, 0.32779, 0.30852, 0.29318, 0.28054, 0.26986, 0.26067, 0.25262, 0.2455,
    0.23913, 0.23338, 0.22815, 0.22336, 0.21896, 0.21489, 0.21111, 0.20758, 0.20428, 0.20118, 0.19826, 0.19551,
    0.1929, 0.19043, 0.18809,
];

impl ZetaTable {
    pub fn empty(source: ZetaSource) -> Self {
        Self { entries: BTreeMap::new(), source, solver_version: SOLVER_VERSION.to_string() }
    }

    /// Literature values for integer `J = 1..27`.
    pub fn published() -> Self {
        let entries = PUBLISHED_ZETA.iter().enumerate().map(|(i, &z)| (2 * (i as u32 + 1), z)).collect();
        Self { entries, source: ZetaSource::Published, solver_version: String::new() }
    }

    /// Number of printed significant decimals for a published entry.
    pub fn published_decimals(spin: SpinLabel) -> Option<usize> {
        let idx = (spin.two_j() / 2).checked_sub(1)? as usize;
        if !spin.is_integer() || idx >= PUBLISHED_ZETA.len() {
            return None;
        }
        let text = format!("{}", PUBLISHED_ZETA[idx]);
        Some(text.split_once('.').map_or(0, |(_, f)| f.len()))
    }

    pub fn get(&self, spin: SpinLabel) -> Result<f64> {
        self.entries.get(&spin.two_j()).copied().ok_or_else(|| Error::MissingZeta(spin.to_string()))
    }

    pub fn insert(&mut self, spin: SpinLabel, value: f64) {
        self.entries.insert(spin.two_j(), value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True if entries never increase with `J` (up to `tolerance`).
    pub fn is_monotone(&self, tolerance: f64) -> bool {
        self.entries.values().collect::<Vec<_>>().windows(2).all(|w| *w[1] <= *w[0] + tolerance)
    }

    /// CSV with columns `J,zeta_squared`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["J", "zeta_squared"])?;
        for (&two_j, &z) in &self.entries {
            w.write_record([SpinLabel::from_two_j(two_j).to_string(), format!("{z}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, source: ZetaSource) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["J", "zeta_squared"] {
            return Err(Error::Schema(format!("expected header J,zeta_squared, found {:?}", headers)));
        }
        let mut table = Self::empty(source);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = line + 2;
            let spin: SpinLabel = rec
                .get(0)
                .ok_or_else(|| Error::Schema(format!("row {row}: missing J")))?
                .parse()
                .map_err(|_| Error::Schema(format!("row {row}: J is not a spin value")))?;
            let z: f64 = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Schema(format!("row {row}: zeta_squared is not a number")))?;
            table.insert(spin, z);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(fs::File::open(path)?, ZetaSource::Computed)
    }
}

/// Computed `zeta^2_J` for the given spins, evaluated in parallel.
pub fn zeta_table_for(spins: &[SpinLabel], settings: &CurveSettings) -> Result<ZetaTable> {
    let values: Vec<(SpinLabel, f64)> = spins
        .par_iter()
        .map(|&s| zeta(s, settings).map(|z| (s, z)))
        .collect::<Result<_>>()?;
    let mut table = ZetaTable::empty(ZetaSource::Computed);
    for (s, z) in values {
        table.insert(s, z);
    }
    Ok(table)
}

/// Integer `J = 1..=j_max`, plus half-integers when requested.
pub fn zeta_table(j_max: SpinLabel, include_half_integer: bool, settings: &CurveSettings) -> Result<ZetaTable> {
    let spins: Vec<SpinLabel> = (1..=j_max.two_j())
        .filter(|t| include_half_integer || t % 2 == 0)
        .map(SpinLabel::from_two_j)
        .collect();
    zeta_table_for(&spins, settings)
}

/// Sweep data of one realizable block, scaled to the `k j` normalization.
struct ScaledBlock {
    scale: f64,
    /// `None` for the singlet.
    data: Option<Arc<BlockData>>,
}

impl ScaledBlock {
    fn points(&self) -> Vec<(f64, f64)> {
        match &self.data {
            Some(d) => d.points().into_iter().map(|(x, v)| (x * self.scale, v * self.scale)).collect(),
            None => vec![(0.0, 0.0)],
        }
    }

    fn lines(&self) -> Vec<(f64, f64)> {
        match &self.data {
            Some(d) => d.lines().into_iter().map(|(l, v)| (l, v * self.scale)).collect(),
            None => vec![(0.0, 0.0)],
        }
    }

    fn x_max(&self) -> f64 {
        if self.data.is_some() { self.scale } else { 0.0 }
    }
}

/// Blocks of every group of `m <= k` particles. A group of `m` particles in
/// block `J` contributes with weight `J / (m j)` per particle.
fn scaled_blocks(k: u32, j: SpinLabel, settings: &CurveSettings) -> Result<(Vec<ScaledBlock>, usize)> {
    if k == 0 || j.two_j() == 0 {
        return Err(Error::InvalidInput("k and j must be positive".into()));
    }
    let mut members: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for m in 1..=k {
        for b in j.block_spins(m) {
            members.entry(b.two_j()).or_default().push(m);
        }
    }
    let spins: Vec<u32> = members.keys().copied().filter(|&t| t > 0).collect();
    let data: BTreeMap<u32, Arc<BlockData>> = spins
        .par_iter()
        .map(|&t| BlockData::compute(SpinLabel::from_two_j(t), Objective::Planar, settings).map(|d| (t, Arc::new(d))))
        .collect::<Result<_>>()?;
    let unconverged = data.values().map(|d| d.sweep.unconverged().len()).sum();
    let mut blocks = Vec::new();
    for (two_b, sizes) in members {
        let Some(d) = data.get(&two_b) else {
            blocks.push(ScaledBlock { scale: 0.0, data: None });
            continue;
        };
        for m in sizes {
            let scale = f64::from(two_b) / f64::from(m * j.two_j());
            blocks.push(ScaledBlock { scale, data: Some(Arc::clone(d)) });
        }
    }
    Ok((blocks, unconverged))
}

/// Lower convex envelope for `k`-producible states of spin-`j` particles:
/// every block of every group of at most `k` particles, scaled per particle.
///
/// The union Legendre function is bounded below at every solved multiplier
/// by the minimum over blocks of their concave interpolants; the curve is
/// the maximum of the resulting tangent lines.
pub fn producibility_hull(k: u32, j: SpinLabel, settings: &CurveSettings) -> Result<BoundCurve> {
    let (blocks, unconverged) = scaled_blocks(k, j, settings)?;
    let per_block: Vec<(Vec<(f64, f64)>, f64)> = blocks.iter().map(|b| (b.lines(), b.x_max())).collect();
    let mut lambdas: Vec<f64> = per_block.iter().flat_map(|b| b.0.iter().map(|l| l.0)).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let union: Vec<(f64, f64)> = lambdas
        .into_iter()
        .map(|l| (l, per_block.iter().map(|(lines, x_max)| concave_lower(lines, *x_max, l)).fold(f64::INFINITY, f64::min)))
        .collect();
    let certified = tangent_envelope(&union);

    let points: Vec<(f64, f64)> = blocks.iter().flat_map(ScaledBlock::points).collect();
    let chord = mirrored_hull_on_unit(&points);
    let mut mirrored = points.clone();
    mirrored.extend(points.iter().map(|&(x, v)| (-x, v)));
    let bp = legendre_breakpoints(&mirrored);
    let f = PiecewiseLinear::new(&chord);
    let mut deviation = 0.0f64;
    for x in chord.iter().map(|p| p.0).chain((0..=200).map(|i| i as f64 / 200.0)) {
        deviation = deviation.max((double_legendre(&mirrored, &bp, x) - f.eval(x)?).abs());
    }

    let mut metadata = CurveMetadata::new(CurveMode::Envelope, settings);
    metadata.unconverged_samples = unconverged;
    metadata.legendre_deviation = Some(deviation);
    metadata.discretization_gap = Some(discretization_gap(&chord, &certified)?);
    let mut curve = BoundCurve {
        schema_version: CURVE_SCHEMA_VERSION,
        kind: CurveKind::ProducibilityHull,
        identity: CurveIdentity::group(k, j),
        points: certified,
        metadata,
    };
    curve.metadata.tangent = curve.min_ratio();
    Ok(curve)
}

/// Union of scaled realized block points, and the number of unconverged
/// solver samples behind them.
pub fn producibility_points(k: u32, j: SpinLabel, settings: &CurveSettings) -> Result<(Vec<(f64, f64)>, usize)> {
    let (blocks, unconverged) = scaled_blocks(k, j, settings)?;
    Ok((blocks.iter().flat_map(ScaledBlock::points).collect(), unconverged))
}

/// Orthogonal-variance curve `F_J`.
pub fn sm_curve(spin: SpinLabel, settings: &CurveSettings) -> Result<BoundCurve> {
    if spin.two_j() == 0 {
        return Err(Error::InvalidInput("spin must be at least 1/2".into()));
    }
    let data = BlockData::compute(spin, Objective::OrthogonalOnly, settings)?;
    let mut metadata = CurveMetadata::new(CurveMode::Envelope, settings);
    metadata.unconverged_samples = data.sweep.unconverged().len();
    let certified = tangent_envelope(&data.lines());
    metadata.discretization_gap = Some(discretization_gap(&lower_hull(&data.points()), &certified)?);
    Ok(BoundCurve {
        schema_version: CURVE_SCHEMA_VERSION,
        kind: CurveKind::SmF,
        identity: CurveIdentity::block(spin),
        points: certified,
        metadata,
    })
}

/// The line `X -> zeta^2_{kj} X`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBound {
    pub block: SpinLabel,
    pub slope: f64,
}

impl LinearBound {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x
    }
}

pub fn linear_lower_bound(k: u32, j: SpinLabel, table: &ZetaTable) -> Result<LinearBound> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let block = j.times(k);
    Ok(LinearBound { block, slope: table.get(block)? })
}

/// On-disk curve cache. Files are replaced atomically, so concurrent
/// readers never observe a partial write.
#[derive(Clone, Debug)]
pub struct CurveCache {
    dir: PathBuf,
}

#[derive(Serialize)]
struct CacheKey<'a> {
    kind: CurveKind,
    identity: CurveIdentity,
    mode: CurveMode,
    settings: &'a CurveSettings,
    solver_version: &'a str,
}

impl CurveCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache rooted at `$PQSDEPTH_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(Self::new)
    }

    pub fn key(kind: CurveKind, identity: CurveIdentity, mode: CurveMode, settings: &CurveSettings) -> Result<String> {
        let material = CacheKey { kind, identity, mode, settings, solver_version: SOLVER_VERSION };
        let bytes = serde_json::to_vec(&material)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("curve-{key}.json"))
    }

    pub fn load(&self, key: &str) -> Option<BoundCurve> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        BoundCurve::from_json(&text).ok()
    }

    pub fn store(&self, key: &str, curve: &BoundCurve) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!(".curve-{key}.{}.tmp", std::process::id()));
        fs::write(&tmp, curve.to_json()?)?;
        fs::rename(&tmp, self.path(key))?;
        Ok(())
    }

    pub fn get_or_compute(
        &self,
        kind: CurveKind,
        identity: CurveIdentity,
        mode: CurveMode,
        settings: &CurveSettings,
        compute: impl FnOnce() -> Result<BoundCurve>,
    ) -> Result<BoundCurve> {
        let key = Self::key(kind, identity, mode, settings)?;
        if let Some(c) = self.load(&key) {
            return Ok(c);
        }
        let curve = compute()?;
        self.store(&key, &curve)?;
        Ok(curve)
    }
}

/// Curve lookups that go through an optional cache.
#[derive(Clone, Debug, Default)]
pub struct CurveProvider {
    pub settings: CurveSettings,
    pub cache: Option<CurveCache>,
}

impl CurveProvider {
    pub fn new(settings: CurveSettings, cache: Option<CurveCache>) -> Self {
        Self { settings, cache }
    }

    fn fetch(
        &self,
        kind: CurveKind,
        identity: CurveIdentity,
        mode: CurveMode,
        compute: impl FnOnce() -> Result<BoundCurve>,
    ) -> Result<BoundCurve> {
        match &self.cache {
            Some(c) => c.get_or_compute(kind, identity, mode, &self.settings, compute),
            None => compute(),
        }
    }

    pub fn producibility_hull(&self, k: u32, j: SpinLabel) -> Result<BoundCurve> {
        self.fetch(CurveKind::ProducibilityHull, CurveIdentity::group(k, j), CurveMode::Envelope, || {
            producibility_hull(k, j, &self.settings)
        })
    }

    pub fn sm_curve(&self, spin: SpinLabel) -> Result<BoundCurve> {
        self.fetch(CurveKind::SmF, CurveIdentity::block(spin), CurveMode::Envelope, || sm_curve(spin, &self.settings))
    }

    pub fn symmetric_curve(&self, spin: SpinLabel, mode: CurveMode) -> Result<BoundCurve> {
        self.fetch(CurveKind::SymmetricG, CurveIdentity::block(spin), mode, || {
            symmetric_curve(spin, mode, &self.settings)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn settings() -> CurveSettings {
        CurveSettings::default()
    }

    #[test]
    fn curve_ends_at_coherent_value() {
        for two_j in [1u32, 2, 3, 8] {
            let c = symmetric_curve(SpinLabel::from_two_j(two_j), CurveMode::Envelope, &settings()).unwrap();
            let end = c.eval(1.0).unwrap();
            assert!(end <= 0.5 + 1e-12 && end > 0.5 - 2e-5, "{end}");
            assert!(c.metadata.discretization_gap.unwrap() < 2e-5);
            assert!(c.is_convex(1e-9));
            assert!(c.points.iter().all(|p| p.1 >= 0.0));
        }
    }

    #[test]
    fn spin_half_zeta_is_one_half() {
        assert_abs_diff_eq!(zeta(SpinLabel::half(), &settings()).unwrap(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn sm_curve_endpoints() {
        for two_j in [1u32, 2, 4, 5] {
            let c = sm_curve(SpinLabel::from_two_j(two_j), &settings()).unwrap();
            assert_abs_diff_eq!(c.eval(0.0).unwrap(), 0.0, epsilon = 1e-12);
            let end = c.eval(1.0).unwrap();
            assert!(end <= 0.5 + 1e-12 && end > 0.5 - 2e-5, "{end}");
            assert!(c.is_convex(1e-9));
        }
    }

    #[test]
    fn singlet_pins_hull_to_origin() {
        for (k, two_j) in [(2u32, 1u32), (2, 2), (3, 2), (3, 1), (4, 1)] {
            let h = producibility_hull(k, SpinLabel::from_two_j(two_j), &settings()).unwrap();
            assert_abs_diff_eq!(h.eval(0.0).unwrap(), 0.0, epsilon = 1e-12);
            assert!(h.metadata.legendre_deviation.unwrap() < 1e-8);
        }
    }

    #[test]
    fn odd_groups_of_half_spins_keep_smaller_groups() {
        let two = producibility_hull(2, SpinLabel::half(), &settings()).unwrap();
        let three = producibility_hull(3, SpinLabel::half(), &settings()).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!(three.eval(x).unwrap() <= two.eval(x).unwrap() + 1e-12);
        }
    }

    #[test]
    fn single_spin_half_hull_is_flat() {
        let h = producibility_hull(1, SpinLabel::half(), &settings()).unwrap();
        for i in 0..=10 {
            assert_abs_diff_eq!(h.eval(i as f64 / 10.0).unwrap(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn published_table_shape() {
        let t = ZetaTable::published();
        assert_eq!(t.len(), 27);
        assert_eq!(t.get(SpinLabel::integer(1)).unwrap(), 0.45);
        assert_eq!(ZetaTable::published_decimals(SpinLabel::integer(1)), Some(2));
        assert_eq!(ZetaTable::published_decimals(SpinLabel::integer(2)), Some(5));
        assert!(t.is_monotone(0.0));
        assert!(matches!(t.get(SpinLabel::integer(28)), Err(Error::MissingZeta(_))));
    }

    #[test]
    fn zeta_csv_round_trip() {
        let mut t = ZetaTable::empty(ZetaSource::Computed);
        t.insert(SpinLabel::integer(1), 0.449_059_1);
        t.insert(SpinLabel::from_two_j(3), 0.414_836_2);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("J,zeta_squared\n"));
        assert!(text.contains("3/2,"));
        assert_eq!(ZetaTable::read_csv(&buf[..], ZetaSource::Computed).unwrap(), t);
    }

    #[test]
    fn curve_json_and_csv_round_trip() {
        let c = sm_curve(SpinLabel::integer(1), &settings()).unwrap();
        assert_eq!(BoundCurve::from_json(&c.to_json().unwrap()).unwrap(), c);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(BoundCurve::read_csv_points(&buf[..]).unwrap(), c.points);
    }

    #[test]
    fn cache_reuses_stored_curve() {
        let dir = tempfile::tempdir().unwrap();
        let provider = CurveProvider::new(settings(), Some(CurveCache::new(dir.path())));
        let a = provider.sm_curve(SpinLabel::integer(1)).unwrap();
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        let b = provider.sm_curve(SpinLabel::integer(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_bound_uses_block_spin() {
        let t = ZetaTable::published();
        let l = linear_lower_bound(2, SpinLabel::half(), &t).unwrap();
        assert_eq!(l.slope, 0.45);
        assert_eq!(l.eval(0.0), 0.0);
    }
}

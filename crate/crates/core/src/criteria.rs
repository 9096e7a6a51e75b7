//! Entanglement-depth criteria evaluated on collective-spin moments.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{curve_eval, BoundCurve, CurveIdentity, CurveKind, CurveProvider, ZetaTable};
use crate::error::{Error, Result};
use crate::spin::{rotate_to_polarization_axis, PlanarMoments, SpinLabel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    /// Tight bound from the k-producibility hull.
    Obs1Hull,
    /// `xi^2 >= zeta^2_{kj}`.
    LinearZeta,
    /// Orthogonal-variance bound.
    SorensenMolmer,
    /// Single-particle bound, i.e. the hull criterion at `k = 1`.
    HeK1,
}

impl std::str::FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidInput(format!("unknown criterion {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionConfig {
    pub k_max: u32,
    pub which: CriterionKind,
    /// Strict-inequality margin on normalized quantities.
    pub tolerance: f64,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self { k_max: 10, which: CriterionKind::LinearZeta, tolerance: 1e-9 }
    }
}

impl CriterionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(Error::InvalidInput("k_max must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidInput("tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationAssumption {
    EqualPolarizationSplit,
    WorstCasePolarization,
}

/// Outcome of one bound test. `margin` is `bound - observed`: positive when
/// the bound is violated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionCheck {
    pub violated: bool,
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionEntry {
    /// The fraction refers to groups of at least `k + 1` particles.
    pub k: u32,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthVerdict {
    pub certified_depth: u32,
    pub criterion_used: CriterionKind,
    pub xi_parallel_sq: f64,
    /// `|<J_par>| / (<N> j)`
    pub polarization: f64,
    #[serde(default)]
    pub fraction_entangled: Vec<FractionEntry>,
    #[serde(default)]
    pub depth_interval: Option<(u32, u32)>,
    pub assumptions: PolarizationAssumption,
}

impl DepthVerdict {
    pub fn fraction(&self, k: u32) -> Option<f64> {
        self.fraction_entangled.iter().find(|f| f.k == k).map(|f| f.fraction)
    }
}

/// Moments record with an optional one-sigma uncertainty on `xi^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentsInput {
    #[serde(flatten)]
    pub moments: PlanarMoments,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_xi: Option<f64>,
}

/// `(var_y + var_z) / |<J_par>|`
pub fn xi_parallel(m: &PlanarMoments) -> Result<f64> {
    let p = m.polarization();
    if !(p > 0.0) {
        return Err(Error::ZeroPolarization);
    }
    Ok(m.var_sum() / p)
}

fn check_identity(curve: &BoundCurve, kind: CurveKind, identity: CurveIdentity) -> Result<()> {
    if curve.kind != kind || curve.identity != identity {
        return Err(Error::InvalidInput(format!(
            "curve {:?} {:?} does not match the requested {:?} {:?}",
            curve.kind, curve.identity, kind, identity
        )));
    }
    Ok(())
}

/// Tests `var_y + var_z >= <N> j G_k(X)` against the k-producibility hull.
pub fn check_obs1(m: &PlanarMoments, k: u32, hull: &BoundCurve, tolerance: f64) -> Result<CriterionCheck> {
    m.validate()?;
    check_identity(hull, CurveKind::ProducibilityHull, CurveIdentity::group(k, m.spin))?;
    let scale = m.mean_n * m.spin.value();
    let x = m.normalized_polarization();
    let bound = scale * curve_eval(hull, x)?;
    let margin = bound - m.var_sum();
    Ok(CriterionCheck { violated: margin > tolerance * scale, margin })
}

/// Tests `xi^2 >= zeta^2_{kj}`. For `k = 1` the hull test is used instead,
/// which requires `k1_hull`.
pub fn check_linear(
    m: &PlanarMoments,
    k: u32,
    table: &ZetaTable,
    k1_hull: Option<&BoundCurve>,
    tolerance: f64,
) -> Result<CriterionCheck> {
    m.validate()?;
    if k == 1 {
        let hull = k1_hull.ok_or_else(|| Error::MissingCurve("k = 1 producibility hull".into()))?;
        return check_obs1(m, 1, hull, tolerance);
    }
    let zeta = table.get(m.spin.times(k))?;
    let xi = xi_parallel(m)?;
    let p = m.polarization();
    Ok(CriterionCheck { violated: xi < zeta - tolerance, margin: (zeta - xi) * p })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionResult {
    pub fraction: f64,
    /// False when `xi^2 >= zeta^2_{kj}`, in which case the fraction is 0.
    pub violated: bool,
}

/// `max(0, 1 - xi^2 / zeta^2_{kj})` under the equal-polarization assumption.
pub fn entangled_fraction(m: &PlanarMoments, k: u32, table: &ZetaTable) -> Result<FractionResult> {
    let zeta = table.get(m.spin.times(k))?;
    let xi = xi_parallel(m)?;
    let fraction = (1.0 - xi / zeta).max(0.0);
    Ok(FractionResult { fraction, violated: xi < zeta })
}

/// Upper bound `(xi^2 / zeta^2 + W - 1) / W` on the fraction of particles
/// in groups of at most `k`, with `W = <N> j / <J_y>`.
pub fn unequal_polarization_bound(m: &PlanarMoments, k: u32, table: &ZetaTable) -> Result<f64> {
    let r = rotate_to_polarization_axis(m)?;
    let w = r.mean_n * r.spin.value() / r.mean_y;
    if w < 1.0 - 1e-12 {
        return Err(Error::InvalidInput(format!("W = {w} < 1: polarization exceeds <N> j")));
    }
    let zeta = table.get(m.spin.times(k))?;
    let xi = xi_parallel(&r)?;
    Ok(((xi / zeta + w - 1.0) / w).clamp(0.0, 1.0))
}

/// Tests `var_z < <N> j F_J(<J_y> / <N> j)` for each supplied curve,
/// keyed by block `2 J`.
pub fn sm_depth(m: &PlanarMoments, sm_curves: &BTreeMap<u32, BoundCurve>, tolerance: f64) -> Result<DepthVerdict> {
    m.validate()?;
    let r = rotate_to_polarization_axis(m)?;
    let scale = r.mean_n * r.spin.value();
    let x = r.mean_y / scale;
    let mut deepest = 0;
    for (&two_block, curve) in sm_curves {
        check_identity(curve, CurveKind::SmF, CurveIdentity::block(SpinLabel::from_two_j(two_block)))?;
        if two_block % r.spin.two_j() != 0 {
            continue;
        }
        let k = two_block / r.spin.two_j();
        if r.var_z < scale * curve_eval(curve, x)? - tolerance * scale {
            deepest = deepest.max(k);
        }
    }
    Ok(DepthVerdict {
        certified_depth: deepest + 1,
        criterion_used: CriterionKind::SorensenMolmer,
        xi_parallel_sq: xi_parallel(&r)?,
        polarization: x,
        fraction_entangled: Vec::new(),
        depth_interval: None,
        assumptions: PolarizationAssumption::EqualPolarizationSplit,
    })
}

/// Curves and constants consumed by [`entanglement_depth`].
#[derive(Clone, Debug, Default)]
pub struct CriterionData {
    pub zeta: Option<ZetaTable>,
    /// Producibility hulls keyed by `k`.
    pub hulls: BTreeMap<u32, BoundCurve>,
    /// Orthogonal-variance curves keyed by block `2 J`.
    pub sm_curves: BTreeMap<u32, BoundCurve>,
}

impl CriterionData {
    /// Loads what `config.which` needs for particles of spin `j`.
    pub fn prepare(j: SpinLabel, config: &CriterionConfig, zeta: Option<ZetaTable>, provider: &CurveProvider) -> Result<Self> {
        let ks: Vec<u32> = match config.which {
            CriterionKind::Obs1Hull => (1..=config.k_max).collect(),
            CriterionKind::LinearZeta | CriterionKind::HeK1 => vec![1],
            CriterionKind::SorensenMolmer => Vec::new(),
        };
        let hulls = ks
            .par_iter()
            .map(|&k| provider.producibility_hull(k, j).map(|c| (k, c)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let sm_curves = if config.which == CriterionKind::SorensenMolmer {
            (1..=config.k_max)
                .into_par_iter()
                .map(|k| provider.sm_curve(j.times(k)).map(|c| (j.times(k).two_j(), c)))
                .collect::<Result<BTreeMap<_, _>>>()?
        } else {
            BTreeMap::new()
        };
        Ok(Self { zeta, hulls, sm_curves })
    }

    fn hull(&self, k: u32) -> Result<&BoundCurve> {
        self.hulls.get(&k).ok_or_else(|| Error::MissingCurve(format!("producibility hull for k = {k}")))
    }

    fn table(&self) -> Result<&ZetaTable> {
        self.zeta.as_ref().ok_or_else(|| Error::MissingZeta("no table supplied".into()))
    }
}

fn deepest_violation(m: &PlanarMoments, config: &CriterionConfig, data: &CriterionData) -> Result<u32> {
    let tol = config.tolerance;
    let mut deepest = 0;
    match config.which {
        CriterionKind::Obs1Hull => {
            for k in 1..=config.k_max {
                if check_obs1(m, k, data.hull(k)?, tol)?.violated {
                    deepest = k;
                }
            }
        }
        CriterionKind::LinearZeta => {
            let table = data.table()?;
            for k in 1..=config.k_max {
                if check_linear(m, k, table, data.hulls.get(&1), tol)?.violated {
                    deepest = k;
                }
            }
        }
        CriterionKind::HeK1 => {
            if check_obs1(m, 1, data.hull(1)?, tol)?.violated {
                deepest = 1;
            }
        }
        CriterionKind::SorensenMolmer => {
            deepest = sm_depth(m, &data.sm_curves, tol)?.certified_depth - 1;
        }
    }
    Ok(deepest)
}

/// Certified depth `1 + (largest violated k)`, with entangled-group
/// fractions and, when `sigma_xi` is given, the depth range over
/// `xi^2 +- sigma_xi`.
pub fn entanglement_depth(
    m: &PlanarMoments,
    sigma_xi: Option<f64>,
    config: &CriterionConfig,
    data: &CriterionData,
) -> Result<DepthVerdict> {
    config.validate()?;
    m.validate()?;
    let xi = xi_parallel(m)?;
    let depth = deepest_violation(m, config, data)? + 1;

    let mut fractions = Vec::new();
    if let Some(table) = &data.zeta {
        for k in 1..=config.k_max {
            if let Ok(f) = entangled_fraction(m, k, table) {
                fractions.push(FractionEntry { k, fraction: f.fraction });
            }
        }
    }

    let depth_interval = match sigma_xi {
        Some(s) if s > 0.0 => {
            let at = |target: f64| -> Result<u32> {
                if !(target > 0.0) {
                    return Ok(depth.max(deepest_possible(config)));
                }
                Ok(deepest_violation(&m.with_scaled_variances(target / xi), config, data)? + 1)
            };
            Some((at(xi + s)?, at(xi - s)?))
        }
        _ => None,
    };

    Ok(DepthVerdict {
        certified_depth: depth,
        criterion_used: config.which,
        xi_parallel_sq: xi,
        polarization: m.normalized_polarization(),
        fraction_entangled: fractions,
        depth_interval,
        assumptions: PolarizationAssumption::EqualPolarizationSplit,
    })
}

fn deepest_possible(config: &CriterionConfig) -> u32 {
    match config.which {
        CriterionKind::HeK1 => 2,
        _ => config.k_max + 1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Planar,
    SorensenMolmer,
    Tie,
}

impl Winner {
    pub fn as_str(self) -> &'static str {
        match self {
            Winner::Planar => "planar",
            Winner::SorensenMolmer => "sorensen_molmer",
            Winner::Tie => "tie",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub alpha: f64,
    pub beta: f64,
    /// Lower bounds on `(dJ_z)^2 / (N j)`.
    pub planar_bound: f64,
    pub sm_bound: f64,
    pub winner: Winner,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonGrid {
    pub k: u32,
    pub two_j: u32,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Row-major over `(alpha, beta)`.
    pub cells: Vec<ComparisonCell>,
}

impl ComparisonGrid {
    pub fn cell(&self, ia: usize, ib: usize) -> &ComparisonCell {
        &self.cells[ia * self.betas.len() + ib]
    }

    /// CSV with columns `alpha,beta,planar_bound,sm_bound,winner`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "beta", "planar_bound", "sm_bound", "winner"])?;
        for c in &self.cells {
            w.write_record([
                format!("{}", c.alpha),
                format!("{}", c.beta),
                format!("{}", c.planar_bound),
                format!("{}", c.sm_bound),
                c.winner.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lower bounds on `(dJ_z)^2 / (N j)` from both criteria over an
/// `(alpha, beta)` grid, where `alpha = (dJ_z)^2 / (dJ_y)^2` and
/// `beta = <J_y> / N`.
pub fn compare_criteria(
    k: u32,
    j: SpinLabel,
    alphas: &[f64],
    betas: &[f64],
    hull: &BoundCurve,
    sm_curve: &BoundCurve,
) -> Result<ComparisonGrid> {
    check_identity(hull, CurveKind::ProducibilityHull, CurveIdentity::group(k, j))?;
    check_identity(sm_curve, CurveKind::SmF, CurveIdentity::block(j.times(k)))?;
    let jv = j.value();
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {a}")));
    }
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b <= jv)) {
        return Err(Error::InvalidInput(format!("beta must lie in (0, {jv}], got {b}")));
    }
    let mut cells = Vec::with_capacity(alphas.len() * betas.len());
    for &alpha in alphas {
        for &beta in betas {
            let x = beta / jv;
            let planar_bound = curve_eval(hull, x)? * alpha / (1.0 + alpha);
            let sm_bound = curve_eval(sm_curve, x)?;
            let winner = if (planar_bound - sm_bound).abs() <= 1e-12 {
                Winner::Tie
            } else if planar_bound > sm_bound {
                Winner::Planar
            } else {
                Winner::SorensenMolmer
            };
            cells.push(ComparisonCell { alpha, beta, planar_bound, sm_bound, winner });
        }
    }
    Ok(ComparisonGrid { k, two_j: j.two_j(), alphas: alphas.to_vec(), betas: betas.to_vec(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{producibility_hull, sm_curve, CurveSettings};
    use approx::assert_abs_diff_eq;

    fn moments(xi: f64, pol: f64, n: f64) -> PlanarMoments {
        let p = pol * n;
        PlanarMoments {
            mean_y: p,
            mean_z: 0.0,
            var_y: 0.5 * xi * p,
            var_z: 0.5 * xi * p,
            cov_yz: 0.0,
            mean_n: n,
            spin: SpinLabel::integer(1),
        }
    }

    #[test]
    fn xi_examples() {
        assert_abs_diff_eq!(xi_parallel(&moments(1.0, 0.9, 100.0)).unwrap(), 1.0, epsilon = 1e-12);
        let m = moments(0.32, 0.83, 1.75e6);
        assert_abs_diff_eq!(xi_parallel(&m).unwrap(), 0.32, epsilon = 1e-12);
        assert_abs_diff_eq!(xi_parallel(&m.with_scaled_variances(2.0)).unwrap(), 0.64, epsilon = 1e-12);
        let mut z = m;
        z.mean_y = 0.0;
        assert!(matches!(xi_parallel(&z), Err(Error::ZeroPolarization)));
    }

    #[test]
    fn linear_examples_on_published_table() {
        let t = ZetaTable::published();
        let m = moments(0.32, 0.83, 1.75e6);
        assert!(check_linear(&m, 5, &t, None, 1e-9).unwrap().violated);
        assert!(!check_linear(&m, 6, &t, None, 1e-9).unwrap().violated);
        let sql = moments(1.0, 0.83, 1.75e6);
        for k in 2..=27 {
            assert!(!check_linear(&sql, k, &t, None, 1e-9).unwrap().violated);
        }
        assert!(matches!(check_linear(&m, 1, &t, None, 1e-9), Err(Error::MissingCurve(_))));
    }

    #[test]
    fn depth_examples_on_published_table() {
        let mut data = CriterionData { zeta: Some(ZetaTable::published()), ..CriterionData::default() };
        data.hulls.insert(1, producibility_hull(1, SpinLabel::integer(1), &CurveSettings::default()).unwrap());
        let cfg = CriterionConfig { k_max: 10, which: CriterionKind::LinearZeta, tolerance: 1e-9 };
        let v = entanglement_depth(&moments(0.32, 0.83, 1.75e6), Some(0.02), &cfg, &data).unwrap();
        assert_eq!(v.certified_depth, 6);
        assert_abs_diff_eq!(v.fraction(1).unwrap(), 1.0 - 0.32 / 0.45, epsilon = 1e-12);
        assert_abs_diff_eq!(v.fraction(3).unwrap(), 1.0 - 0.32 / 0.38945, epsilon = 1e-12);
        let v = entanglement_depth(&moments(0.34, 0.83, 1.75e6), None, &cfg, &data).unwrap();
        assert_eq!(v.certified_depth, 5);
        let v = entanglement_depth(&moments(1.0, 1.0, 1000.0), None, &cfg, &data).unwrap();
        assert_eq!(v.certified_depth, 1);
    }

    #[test]
    fn fraction_and_unequal_polarization() {
        let t = ZetaTable::published();
        let m = moments(0.32, 0.83, 1.75e6);
        let f = entangled_fraction(&m, 1, &t).unwrap();
        assert_abs_diff_eq!(f.fraction, 0.288_888_9, epsilon = 1e-6);
        let at_boundary = moments(0.45, 0.83, 1.75e6);
        let f = entangled_fraction(&at_boundary, 1, &t).unwrap();
        assert_eq!(f.fraction, 0.0);
        assert!(!f.violated);

        let q = unequal_polarization_bound(&m, 5, &t).unwrap();
        assert_abs_diff_eq!(q, (0.32 / 0.32779 + 1.0 / 0.83 - 1.0) * 0.83, epsilon = 1e-12);
        assert_abs_diff_eq!(q, 0.980, epsilon = 5e-4);
        let full = moments(0.32, 1.0, 1.75e6);
        assert_abs_diff_eq!(unequal_polarization_bound(&full, 5, &t).unwrap(), 0.32 / 0.32779, epsilon = 1e-12);
        let edge = moments(0.32779, 0.83, 1.75e6);
        assert_abs_diff_eq!(unequal_polarization_bound(&edge, 5, &t).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn obs1_examples() {
        let s = CurveSettings::default();
        let hull1 = producibility_hull(1, SpinLabel::integer(1), &s).unwrap();
        let coherent = PlanarMoments {
            mean_y: 10.0,
            mean_z: 0.0,
            var_y: 0.0,
            var_z: 5.0,
            cov_yz: 0.0,
            mean_n: 10.0,
            spin: SpinLabel::integer(1),
        };
        assert!(!check_obs1(&coherent, 1, &hull1, 1e-9).unwrap().violated);

        let hull2 = producibility_hull(2, SpinLabel::half(), &s).unwrap();
        let singlet = PlanarMoments {
            mean_y: 0.0,
            mean_z: 0.0,
            var_y: 0.0,
            var_z: 0.0,
            cov_yz: 0.0,
            mean_n: 2.0,
            spin: SpinLabel::half(),
        };
        assert!(!check_obs1(&singlet, 2, &hull2, 1e-9).unwrap().violated);
        assert!(check_obs1(&singlet, 1, &hull2, 1e-9).is_err());
    }

    #[test]
    fn sm_examples() {
        let s = CurveSettings::default();
        let curves: BTreeMap<u32, BoundCurve> =
            (1..=4).map(|k| (2 * k, sm_curve(SpinLabel::integer(k), &s).unwrap())).collect();
        let coherent = PlanarMoments {
            mean_y: 100.0,
            mean_z: 0.0,
            var_y: 0.0,
            var_z: 50.0,
            cov_yz: 0.0,
            mean_n: 100.0,
            spin: SpinLabel::integer(1),
        };
        assert_eq!(sm_depth(&coherent, &curves, 1e-9).unwrap().certified_depth, 1);
        let squeezed = PlanarMoments { mean_y: 90.0, var_z: 0.0, ..coherent };
        assert_eq!(sm_depth(&squeezed, &curves, 1e-9).unwrap().certified_depth, 5);
    }

    #[test]
    fn comparison_regimes() {
        let s = CurveSettings::default();
        let j = SpinLabel::integer(1);
        let hull = producibility_hull(5, j, &s).unwrap();
        let sm = sm_curve(j.times(5), &s).unwrap();
        let g = compare_criteria(5, j, &[1.0, 0.01, 1e6], &[0.5, 0.999], &hull, &sm).unwrap();
        assert_eq!(g.cell(0, 0).winner, Winner::Planar);
        assert_eq!(g.cell(1, 1).winner, Winner::SorensenMolmer);
        assert_abs_diff_eq!(g.cell(2, 0).planar_bound, hull.eval(0.5).unwrap(), epsilon = 1e-5);
        assert!(compare_criteria(5, j, &[0.0], &[0.5], &hull, &sm).is_err());
        assert!(compare_criteria(5, j, &[1.0], &[1.5], &hull, &sm).is_err());
    }

    #[test]
    fn criterion_names_parse() {
        assert_eq!("obs1_hull".parse::<CriterionKind>().unwrap(), CriterionKind::Obs1Hull);
        assert_eq!("he_k1".parse::<CriterionKind>().unwrap(), CriterionKind::HeK1);
        assert!("nope".parse::<CriterionKind>().is_err());
    }
}

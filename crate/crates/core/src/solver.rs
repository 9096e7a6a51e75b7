//! Ground states of the shifted Lagrangian Hamiltonian
//! `(L_y - s_y)^2 + (L_z - s_z)^2 - lambda L_y` within one spin-J block.
//!
//! The shifts are found self-consistently by coordinate descent, with a
//! simplex search over the shifts as fallback. Sweeps over `lambda` trace
//! the extreme points of the lower convex envelope of the variance curve.

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::{lowest_with_tiebreak, EigenOptions, SymBand};
use crate::error::{Error, Result};
use crate::spin::{ladder_half_elements, SpinLabel, SpinState};

/// Bumped whenever numerical output of the solver may change.
pub const SOLVER_VERSION: &str = "1.0";

const SWEEP_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianParams {
    pub lambda: f64,
    pub s_y: f64,
    pub s_z: f64,
}

impl LagrangianParams {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, s_y: 0.0, s_z: 0.0 }
    }
}

/// Which variance enters the minimized functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `(dL_y)^2 + (dL_z)^2`
    Planar,
    /// `(dL_z)^2` alone
    OrthogonalOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Fixed-point threshold on the shift update, scaled by `max(1, J)`.
    pub shift_tolerance: f64,
    pub max_rounds: usize,
    /// Run a simplex search over the shifts when descent stalls.
    pub simplex_fallback: bool,
    pub max_simplex_evaluations: usize,
    pub eigen: EigenOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            shift_tolerance: 1e-10,
            max_rounds: 200,
            simplex_fallback: true,
            max_simplex_evaluations: 4000,
            eigen: EigenOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Upper end of the multiplier range; `8 J + 4` when absent.
    pub lambda_max: Option<f64>,
    /// Smallest non-zero multiplier of the geometric seed grid.
    pub lambda_min_positive: f64,
    pub initial_points: usize,
    /// Refine until neighbouring samples differ by at most this in `X`.
    pub max_delta_x: f64,
    /// Refine until the chord between neighbouring samples lies at most
    /// this far above their tangent lines, in normalized variance units.
    #[serde(default = "default_max_gap")]
    pub max_gap: f64,
    /// Relative multiplier gap below which refinement stops.
    pub min_lambda_gap: f64,
    pub max_points: usize,
    /// Decades above `lambda_max` covered by extra samples, two per decade,
    /// so the tangent envelope approaches the coherent endpoint.
    #[serde(default)]
    pub tail_decades: u32,
}

fn default_max_gap() -> f64 {
    1e-5
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lambda_max: None,
            lambda_min_positive: 1e-2,
            initial_points: 60,
            max_delta_x: 0.01,
            max_gap: default_max_gap(),
            min_lambda_gap: 1e-9,
            max_points: 4000,
            tail_decades: 4,
        }
    }
}

impl GridConfig {
    pub fn lambda_max_for(&self, spin: SpinLabel) -> f64 {
        self.lambda_max.unwrap_or(8.0 * spin.value() + 4.0)
    }

    /// Geometric seed grid, ascending, without zero.
    pub fn seed_lambdas(&self, spin: SpinLabel) -> Vec<f64> {
        let lo = self.lambda_min_positive;
        let hi = self.lambda_max_for(spin).max(lo);
        let n = self.initial_points.max(2);
        let ratio = (hi / lo).ln() / (n - 1) as f64;
        let mut out: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
        out.extend((1..=2 * self.tail_decades).map(|i| hi * 10f64.powf(0.5 * f64::from(i))));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundStateSolution {
    pub spin: SpinLabel,
    pub objective: Objective,
    pub params: LagrangianParams,
    /// Lowest eigenvalue at the final shifts.
    pub energy: f64,
    pub state: SpinState,
    /// `<L_y> / J`
    pub x: f64,
    pub mean_z: f64,
    pub var_y: f64,
    pub var_z: f64,
    /// Variance entering the objective: both variances for the planar
    /// problem, `(dL_z)^2` for the orthogonal-only one.
    pub var_sum: f64,
    pub converged: bool,
    pub iterations: usize,
    pub degenerate: bool,
    /// `var_sum - lambda <L_y>` after every round.
    pub objective_history: Vec<f64>,
}

impl GroundStateSolution {
    pub fn mean_y(&self) -> f64 {
        self.x * self.spin.value()
    }

    /// `var_sum - lambda <L_y>`
    pub fn lagrangian(&self) -> f64 {
        self.var_sum - self.params.lambda * self.mean_y()
    }

    /// `(X, var_sum / J)`
    pub fn normalized_point(&self) -> (f64, f64) {
        (self.x, self.var_sum / self.spin.value())
    }
}

/// Diagonal and band data of `L_y`, `L_z` and `L_z^2` in the y-eigenbasis.
#[derive(Clone, Debug)]
pub(crate) struct PlanarBlock {
    pub spin: SpinLabel,
    pub m: Vec<f64>,
    pub c: Vec<f64>,
    pub lz2_diag: Vec<f64>,
    pub lz2_off2: Vec<f64>,
}

pub(crate) struct BlockMoments {
    pub mean_y: f64,
    pub mean_z: f64,
    pub var_y: f64,
    pub var_z: f64,
}

impl PlanarBlock {
    pub fn new(spin: SpinLabel) -> Self {
        let m: Vec<f64> = spin.magnetic_numbers().collect();
        let c = ladder_half_elements(spin);
        let d = spin.dim();
        let lz2_diag = (0..d)
            .map(|i| {
                let lo = if i > 0 { c[i - 1] * c[i - 1] } else { 0.0 };
                let hi = if i + 1 < d { c[i] * c[i] } else { 0.0 };
                lo + hi
            })
            .collect();
        let lz2_off2 = (0..d.saturating_sub(2)).map(|i| c[i] * c[i + 1]).collect();
        Self { spin, m, c, lz2_diag, lz2_off2 }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// `(L_y - s_y)^2 + (L_z - s_z)^2 - lambda L_y` (planar) or
    /// `(L_z - s_z)^2 - lambda L_y` (orthogonal-only).
    pub fn hamiltonian(&self, objective: Objective, p: &LagrangianParams) -> SymBand {
        let d = self.dim();
        let mut h = SymBand::zeros(d, 2.min(d.saturating_sub(1)));
        for i in 0..d {
            let mut v = self.lz2_diag[i] + p.s_z * p.s_z - p.lambda * self.m[i];
            if objective == Objective::Planar {
                v += (self.m[i] - p.s_y).powi(2);
            }
            h.set(i, i, v);
        }
        for (i, &ci) in self.c.iter().enumerate() {
            h.set(i + 1, i, -2.0 * p.s_z * ci);
        }
        for (i, &v) in self.lz2_off2.iter().enumerate() {
            h.set(i + 2, i, v);
        }
        h
    }

    /// `L_y^2 + L_z^2 - mu L_y` without shifts (or `L_z^2 - mu L_y`).
    pub fn unshifted(&self, objective: Objective, mu: f64) -> SymBand {
        self.hamiltonian(objective, &LagrangianParams { lambda: mu, s_y: 0.0, s_z: 0.0 })
    }

    pub fn moments(&self, v: &DVector<f64>) -> BlockMoments {
        let d = self.dim();
        let mut mean_y = 0.0;
        let mut ly2 = 0.0;
        let mut lz2 = 0.0;
        for i in 0..d {
            let p = v[i] * v[i];
            mean_y += p * self.m[i];
            ly2 += p * self.m[i] * self.m[i];
            lz2 += p * self.lz2_diag[i];
        }
        let mut mean_z = 0.0;
        for (i, &ci) in self.c.iter().enumerate() {
            mean_z += 2.0 * ci * v[i] * v[i + 1];
        }
        for (i, &o) in self.lz2_off2.iter().enumerate() {
            lz2 += 2.0 * o * v[i] * v[i + 2];
        }
        BlockMoments {
            mean_y,
            mean_z,
            var_y: (ly2 - mean_y * mean_y).max(0.0),
            var_z: (lz2 - mean_z * mean_z).max(0.0),
        }
    }
}

/// `(L_y - s_y)^2 + (L_z - s_z)^2 - lambda L_y` in the y-eigenbasis.
pub fn hamiltonian_matrix(spin: SpinLabel, params: &LagrangianParams) -> SymBand {
    PlanarBlock::new(spin).hamiltonian(Objective::Planar, params)
}

pub fn hamiltonian_matrix_for(spin: SpinLabel, objective: Objective, params: &LagrangianParams) -> SymBand {
    PlanarBlock::new(spin).hamiltonian(objective, params)
}

struct Round {
    energy: f64,
    vector: DVector<f64>,
    moments: BlockMoments,
    degenerate: bool,
}

fn eigen_round(block: &PlanarBlock, objective: Objective, p: &LagrangianParams, cfg: &SolverConfig) -> Result<Round> {
    let h = block.hamiltonian(objective, p);
    let pair = lowest_with_tiebreak(&h, Some(&block.m), &cfg.eigen)?;
    let moments = block.moments(&pair.vector);
    Ok(Round { energy: pair.value, vector: pair.vector, moments, degenerate: pair.multiplicity > 1 })
}

fn variance_of(objective: Objective, m: &BlockMoments) -> f64 {
    match objective {
        Objective::Planar => m.var_y + m.var_z,
        Objective::OrthogonalOnly => m.var_z,
    }
}

/// Minimizes `f` from `start` with a Nelder-Mead simplex; returns the best point.
fn nelder_mead(f: &mut dyn FnMut(&[f64]) -> f64, start: &[f64], step: f64, max_evals: usize, tol: f64) -> Vec<f64> {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    simplex.push((start.to_vec(), eval(start, &mut evals)));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += step;
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < tol {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (worst.0[k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(-0.5);
                let fx = eval(&x, &mut evals);
                (x, fx)
            } else {
                let x = along(0.5);
                let fx = eval(&x, &mut evals);
                (x, fx)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = entry.0.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    let fx = eval(&x, &mut evals);
                    *entry = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0).0
}

/// Ground state of the planar Lagrangian at `lambda`, starting from zero shifts.
pub fn solve_lagrangian(spin: SpinLabel, lambda: f64, config: &SolverConfig) -> Result<GroundStateSolution> {
    solve_lagrangian_from(spin, Objective::Planar, LagrangianParams::new(lambda), config)
}

/// Coordinate descent from the shifts in `start`.
pub fn solve_lagrangian_from(
    spin: SpinLabel,
    objective: Objective,
    start: LagrangianParams,
    config: &SolverConfig,
) -> Result<GroundStateSolution> {
    if !start.lambda.is_finite() || !start.s_y.is_finite() || !start.s_z.is_finite() {
        return Err(Error::InvalidInput("Lagrangian parameters must be finite".into()));
    }
    let block = PlanarBlock::new(spin);
    solve_block(&block, objective, start, config)
}

pub(crate) fn solve_block(
    block: &PlanarBlock,
    objective: Objective,
    start: LagrangianParams,
    cfg: &SolverConfig,
) -> Result<GroundStateSolution> {
    let spin = block.spin;
    let lambda = start.lambda;
    let tol = cfg.shift_tolerance * spin.value().max(1.0);
    let uses_sy = objective == Objective::Planar;
    let mut p = start;
    if !uses_sy {
        p.s_y = 0.0;
    }
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut fallback_used = false;
    let mut round = eigen_round(block, objective, &p, cfg)?;
    loop {
        iterations += 1;
        let obj = variance_of(objective, &round.moments) - lambda * round.moments.mean_y;
        history.push(obj);
        let next_sy = if uses_sy { round.moments.mean_y } else { 0.0 };
        let next_sz = round.moments.mean_z;
        let step = (next_sy - p.s_y).hypot(next_sz - p.s_z);
        if step < tol {
            converged = true;
            break;
        }
        p.s_y = next_sy;
        p.s_z = next_sz;
        if iterations >= cfg.max_rounds {
            if !cfg.simplex_fallback || fallback_used {
                round = eigen_round(block, objective, &p, cfg)?;
                let obj = variance_of(objective, &round.moments) - lambda * round.moments.mean_y;
                history.push(obj);
                break;
            }
            fallback_used = true;
            let mut failure = None;
            let mut energy_at = |s: &[f64]| -> f64 {
                let q = if uses_sy {
                    LagrangianParams { lambda, s_y: s[0], s_z: s[1] }
                } else {
                    LagrangianParams { lambda, s_y: 0.0, s_z: s[0] }
                };
                match eigen_round(block, objective, &q, cfg) {
                    Ok(r) => r.energy,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                }
            };
            let x0: Vec<f64> = if uses_sy { vec![p.s_y, p.s_z] } else { vec![p.s_z] };
            let step = 0.05 * spin.value().max(0.5);
            let best = nelder_mead(&mut energy_at, &x0, step, cfg.max_simplex_evaluations, tol);
            if let Some(e) = failure {
                return Err(e);
            }
            if uses_sy {
                p.s_y = best[0];
                p.s_z = best[1];
            } else {
                p.s_z = best[0];
            }
            iterations = 0;
        }
        round = eigen_round(block, objective, &p, cfg)?;
    }
    let m = &round.moments;
    let state = SpinState::new(round.vector.map(|x| Complex::new(x, 0.0)))?;
    Ok(GroundStateSolution {
        spin,
        objective,
        params: p,
        energy: round.energy,
        state,
        x: m.mean_y / spin.value(),
        mean_z: m.mean_z,
        var_y: m.var_y,
        var_z: m.var_z,
        var_sum: variance_of(objective, m),
        converged,
        iterations: history.len(),
        degenerate: round.degenerate,
        objective_history: history,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub spin: SpinLabel,
    pub objective: Objective,
    pub grid: GridConfig,
    /// Ordered by `lambda`; the first entry is the cold start at zero.
    pub samples: Vec<GroundStateSolution>,
    /// `(lambda, min over samples of [var_sum / J - lambda X])`
    pub legendre_values: Vec<(f64, f64)>,
}

impl SweepResult {
    /// Minimum over the samples of `var_sum / J - lambda X`.
    pub fn legendre_at(&self, lambda: f64) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                let (x, v) = s.normalized_point();
                v - lambda * x
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(GroundStateSolution::normalized_point).collect()
    }

    /// Indices of samples that did not reach a fixed point.
    pub fn unconverged(&self) -> Vec<usize> {
        self.samples.iter().enumerate().filter(|(_, s)| !s.converged).map(|(i, _)| i).collect()
    }

    pub fn to_record(&self) -> SweepRecord {
        SweepRecord {
            schema_version: SWEEP_SCHEMA_VERSION,
            solver_version: SOLVER_VERSION.to_string(),
            two_j: self.spin.two_j(),
            objective: self.objective,
            grid: self.grid.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| SweepSample { lambda: s.params.lambda, x: s.x, var_sum: s.var_sum, converged: s.converged })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub lambda: f64,
    #[serde(rename = "X")]
    pub x: f64,
    pub var_sum: f64,
    pub converged: bool,
}

/// Serialized summary of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub schema_version: u32,
    pub solver_version: String,
    pub two_j: u32,
    pub objective: Objective,
    pub grid: GridConfig,
    pub samples: Vec<SweepSample>,
}

impl SweepRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: Self = serde_json::from_str(s)?;
        if rec.schema_version != SWEEP_SCHEMA_VERSION {
            return Err(Error::Schema(format!("unsupported sweep schema version {}", rec.schema_version)));
        }
        Ok(rec)
    }
}

/// Planar sweep over `{0} U geomspace(lambda_min_positive, lambda_max)`.
pub fn sweep_lambda(spin: SpinLabel, grid: &GridConfig, config: &SolverConfig) -> Result<SweepResult> {
    sweep_objective(spin, Objective::Planar, grid, config)
}

fn midpoint(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        (a * b).sqrt()
    } else {
        0.5 * (a + b)
    }
}

/// Sweep for either objective. Samples are solved from large to small
/// multipliers, each warm-started from its larger neighbour's shifts.
pub fn sweep_objective(
    spin: SpinLabel,
    objective: Objective,
    grid: &GridConfig,
    config: &SolverConfig,
) -> Result<SweepResult> {
    let block = PlanarBlock::new(spin);
    let j = spin.value();
    let lambdas = grid.seed_lambdas(spin);

    let mut branch: Vec<GroundStateSolution> = Vec::with_capacity(lambdas.len() + 1);
    let mut warm = LagrangianParams { lambda: 0.0, s_y: j, s_z: 0.0 };
    for &lambda in lambdas.iter().rev() {
        let sol = solve_block(&block, objective, LagrangianParams { lambda, ..warm }, config)?;
        warm = sol.params;
        branch.push(sol);
    }
    branch.push(solve_block(&block, objective, LagrangianParams { lambda: 0.0, ..warm }, config)?);
    branch.reverse();

    let gap = grid.min_lambda_gap;
    let mut pass = 0;
    loop {
        pass += 1;
        let mut inserted = Vec::new();
        for w in branch.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let (la, lb) = (a.params.lambda, b.params.lambda);
            let dx = (b.x - a.x).abs();
            let sagitta = 0.25 * (lb - la) * dx;
            if (dx <= grid.max_delta_x && sagitta <= grid.max_gap) || lb - la <= gap * lb.max(1.0) {
                continue;
            }
            if branch.len() + inserted.len() >= grid.max_points {
                break;
            }
            let lm = midpoint(la, lb);
            let start = LagrangianParams { lambda: lm, ..b.params };
            inserted.push(solve_block(&block, objective, start, config)?);
        }
        if inserted.is_empty() || pass > 64 {
            break;
        }
        branch.extend(inserted);
        branch.sort_by(|a, b| a.params.lambda.total_cmp(&b.params.lambda));
    }

    let cold = solve_block(&block, objective, LagrangianParams::new(0.0), config)?;
    let mut samples = Vec::with_capacity(branch.len() + 1);
    samples.push(cold);
    samples.extend(branch);

    let mut result = SweepResult { spin, objective, grid: grid.clone(), samples, legendre_values: Vec::new() };
    result.legendre_values =
        result.samples.iter().map(|s| (s.params.lambda, result.legendre_at(s.params.lambda))).collect();
    Ok(result)
}

/// Result of the pointwise constrained minimization at fixed polarization.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedMinimum {
    pub x: f64,
    /// Minimal variance per `J` at `<L_y> = J X`, `<L_z> = 0`.
    pub value: f64,
    pub multiplier: f64,
}

/// Minimal normalized variance at fixed `X` through the dual problem
/// `max_mu [E_0(mu) + mu J X]`, where `E_0` is the lowest eigenvalue of
/// `L_y^2 + L_z^2 - mu L_y` (or `L_z^2 - mu L_y`). Exact for `d >= 3`
/// because the joint numerical range is then convex.
pub fn constrained_minimum(spin: SpinLabel, objective: Objective, x: f64, config: &SolverConfig) -> Result<ConstrainedMinimum> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange { x, lo: 0.0, hi: 1.0 });
    }
    let j = spin.value();
    if spin.two_j() == 0 {
        return Err(Error::InvalidInput("spin must be at least 1/2".into()));
    }
    if x >= 1.0 {
        return Ok(ConstrainedMinimum { x, value: 0.5, multiplier: f64::INFINITY });
    }
    if spin.two_j() == 1 {
        // Two-level system: the Bloch vector fixes both variances.
        let value = match objective {
            Objective::Planar => 1.0 - 0.5 * x * x,
            Objective::OrthogonalOnly => 0.5,
        };
        return Ok(ConstrainedMinimum { x, value, multiplier: f64::NAN });
    }
    let block = PlanarBlock::new(spin);
    let target = j * x;
    let ground = |mu: f64| -> Result<(f64, f64)> {
        let h = block.unshifted(objective, mu);
        let pair = lowest_with_tiebreak(&h, Some(&block.m), &config.eigen)?;
        Ok((pair.value, block.moments(&pair.vector).mean_y))
    };
    let mut hi = 1.0;
    while ground(hi)?.1 < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::EigenNonConvergence { iterations: 40, residual: hi });
        }
    }
    let dual = |mu: f64| -> Result<f64> { Ok(ground(mu)?.0 + mu * target) };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (dual(c)?, dual(d)?);
    while b - a > 1e-11 * hi.max(1.0) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = dual(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = dual(d)?;
        }
    }
    let mu = 0.5 * (a + b);
    let best = dual(mu)?.max(fc).max(fd).max(dual(0.0)?);
    let second = match objective {
        Objective::Planar => best - target * target,
        Objective::OrthogonalOnly => best,
    };
    Ok(ConstrainedMinimum { x, value: second / j, multiplier: mu })
}

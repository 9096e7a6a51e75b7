//! Angular-momentum operators for a single spin-J block and the planar
//! moments derived from them.
//!
//! All operators are stored in banded form. In the y-eigenbasis `L_y` is
//! diagonal, `L_z` is real tridiagonal and `L_x` is purely imaginary
//! tridiagonal, so every product that enters a planar Hamiltonian stays
//! real symmetric with bandwidth two.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// A spin quantum number stored as `2J` so half-integers stay exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpinLabel {
    two_j: u32,
}

impl SpinLabel {
    pub const fn from_two_j(two_j: u32) -> Self {
        Self { two_j }
    }

    pub const fn integer(j: u32) -> Self {
        Self { two_j: 2 * j }
    }

    pub const fn half() -> Self {
        Self { two_j: 1 }
    }

    pub const fn two_j(self) -> u32 {
        self.two_j
    }

    pub fn value(self) -> f64 {
        f64::from(self.two_j) / 2.0
    }

    pub const fn dim(self) -> usize {
        self.two_j as usize + 1
    }

    pub const fn is_integer(self) -> bool {
        self.two_j % 2 == 0
    }

    /// Block spin `k * j` for `k` particles of this spin.
    pub const fn times(self, k: u32) -> Self {
        Self { two_j: self.two_j * k }
    }

    /// Magnetic quantum numbers `J, J-1, ..., -J` in basis order.
    pub fn magnetic_numbers(self) -> impl Iterator<Item = f64> {
        let j = self.value();
        (0..self.dim()).map(move |i| j - i as f64)
    }

    /// Spins realized in the decomposition of `k` spin-`self` particles,
    /// from `k j` down to 0 or 1/2 (only `j` itself for a single particle).
    pub fn block_spins(self, k: u32) -> Vec<SpinLabel> {
        if k <= 1 {
            return if k == 1 { vec![self] } else { Vec::new() };
        }
        let top = self.two_j * k;
        (0..=top / 2).map(|i| SpinLabel::from_two_j(top - 2 * i)).collect()
    }
}

impl fmt::Display for SpinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.two_j / 2)
        } else {
            write!(f, "{}/2", self.two_j)
        }
    }
}

impl FromStr for SpinLabel {
    type Err = Error;

    /// Accepts `"3"`, `"3/2"`, `"1.5"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("not a spin quantum number: {s:?}"));
        if let Some((num, den)) = s.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| bad())?;
            match den.trim() {
                "2" => Ok(Self::from_two_j(num)),
                "1" => Ok(Self::from_two_j(2 * num)),
                _ => Err(bad()),
            }
        } else if let Ok(n) = s.parse::<u32>() {
            Ok(Self::integer(n))
        } else {
            let v: f64 = s.parse().map_err(|_| bad())?;
            let twice = 2.0 * v;
            if v < 0.0 || (twice - twice.round()).abs() > 1e-12 {
                return Err(bad());
            }
            Ok(Self::from_two_j(twice.round() as u32))
        }
    }
}

/// Which component is diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    YEigen,
    ZEigen,
}

/// Square complex band matrix; entry `(r, r + o)` for `|o| <= width`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    dim: usize,
    width: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(dim: usize, width: usize) -> Self {
        Self { dim, width, data: vec![C64::new(0.0, 0.0); dim * (2 * width + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let o = c as isize - r as isize;
        if o.unsigned_abs() > self.width || r >= self.dim || c >= self.dim {
            None
        } else {
            Some(r * (2 * self.width + 1) + (o + self.width as isize) as usize)
        }
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.slot(r, c).map_or(C64::new(0.0, 0.0), |i| self.data[i])
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        let i = self.slot(r, c).expect("entry outside band");
        self.data[i] = v;
    }

    pub fn diagonal(values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        let mut m = Self::zeros(values.len(), 0);
        for (i, v) in values.into_iter().enumerate() {
            m.set(i, i, C64::new(v, 0.0));
        }
        m
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        let w = self.width;
        (0..self.dim)
            .map(|r| {
                let lo = r.saturating_sub(w);
                let hi = (r + w).min(self.dim - 1);
                (lo..=hi).map(|c| self.get(r, c) * v[c]).sum()
            })
            .collect()
    }

    pub fn mul(&self, other: &BandMatrix) -> BandMatrix {
        assert_eq!(self.dim, other.dim);
        let w = self.width + other.width;
        let mut out = BandMatrix::zeros(self.dim, w);
        for r in 0..self.dim {
            let lo = r.saturating_sub(w);
            let hi = (r + w).min(self.dim - 1);
            for c in lo..=hi {
                let klo = r.saturating_sub(self.width).max(c.saturating_sub(other.width));
                let khi = (r + self.width).min(c + other.width).min(self.dim - 1);
                let mut acc = C64::new(0.0, 0.0);
                for k in klo..=khi {
                    acc += self.get(r, k) * other.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c))
    }

    /// Real part as a dense matrix, or `None` if any imaginary part is non-zero.
    pub fn to_real_dense(&self) -> Option<DMatrix<f64>> {
        if self.data.iter().any(|z| z.im != 0.0) {
            return None;
        }
        Some(DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c).re))
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// `<v|M|v>` for a normalized `v`.
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let mv = self.matvec(v);
        v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
    }
}

/// `L_x, L_y, L_z, L_y^2, L_z^2` for one spin block.
#[derive(Clone, Debug)]
pub struct SpinOperatorSet {
    pub spin: SpinLabel,
    pub basis: Basis,
    pub lx: BandMatrix,
    pub ly: BandMatrix,
    pub lz: BandMatrix,
    pub ly2: BandMatrix,
    pub lz2: BandMatrix,
}

impl SpinOperatorSet {
    pub fn dim(&self) -> usize {
        self.spin.dim()
    }
}

/// Half the ladder matrix element `<m-1|L_-|m>` for each adjacent pair in
/// basis order (`m = J, J-1, ...`).
pub(crate) fn ladder_half_elements(spin: SpinLabel) -> Vec<f64> {
    let j = spin.value();
    spin.magnetic_numbers()
        .take(spin.dim().saturating_sub(1))
        .map(|m| 0.5 * (j * (j + 1.0) - m * (m - 1.0)).max(0.0).sqrt())
        .collect()
}

pub fn build_operators(spin: SpinLabel, basis: Basis) -> SpinOperatorSet {
    let d = spin.dim();
    let c = ladder_half_elements(spin);
    let diag = BandMatrix::diagonal(spin.magnetic_numbers());

    // (J+ + J-)/2 and (J+ - J-)/(2i) in the ladder basis of the diagonal axis.
    let mut real_tri = BandMatrix::zeros(d, 1);
    let mut imag_tri = BandMatrix::zeros(d, 1);
    for (i, &ci) in c.iter().enumerate() {
        real_tri.set(i + 1, i, C64::new(ci, 0.0));
        real_tri.set(i, i + 1, C64::new(ci, 0.0));
        imag_tri.set(i + 1, i, C64::new(0.0, ci));
        imag_tri.set(i, i + 1, C64::new(0.0, -ci));
    }

    // Cyclic relabelings of the standard (x, y, z) triple keep [L_y, L_z] = i L_x.
    let (lx, ly, lz) = match basis {
        Basis::YEigen => (imag_tri, diag, real_tri),
        Basis::ZEigen => (real_tri, imag_tri, diag),
    };
    let ly2 = ly.mul(&ly);
    let lz2 = lz.mul(&lz);
    SpinOperatorSet { spin, basis, lx, ly, lz, ly2, lz2 }
}

/// A normalized pure state of one spin block.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinState {
    amplitudes: DVector<C64>,
}

impl SpinState {
    /// Normalizes `amplitudes`; fails on a zero vector.
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("state vector has zero or non-finite norm".into()));
        }
        Ok(Self { amplitudes: amplitudes / C64::new(norm, 0.0) })
    }

    pub fn from_real(v: &DVector<f64>) -> Result<Self> {
        Self::new(v.map(|x| C64::new(x, 0.0)))
    }

    /// `|m = J - index>` in whichever basis the operators use.
    pub fn basis_state(spin: SpinLabel, index: usize) -> Self {
        let mut v = DVector::from_element(spin.dim(), C64::new(0.0, 0.0));
        v[index] = C64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        Self { amplitudes: &self.amplitudes * C64::from_polar(1.0, phase) }
    }
}

/// First and second moments of the in-plane components of one block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockMoments {
    pub mean_y: f64,
    pub mean_z: f64,
    pub var_y: f64,
    pub var_z: f64,
}

impl BlockMoments {
    pub fn var_sum(&self) -> f64 {
        self.var_y + self.var_z
    }
}

pub fn moments_of(state: &SpinState, ops: &SpinOperatorSet) -> Result<BlockMoments> {
    if state.dim() != ops.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), actual: state.dim() });
    }
    let v = state.amplitudes.as_slice();
    let mean_y = ops.ly.expectation(v).re;
    let mean_z = ops.lz.expectation(v).re;
    let var_y = (ops.ly2.expectation(v).re - mean_y * mean_y).max(0.0);
    let var_z = (ops.lz2.expectation(v).re - mean_z * mean_z).max(0.0);
    Ok(BlockMoments { mean_y, mean_z, var_y, var_z })
}

/// Measured or derived collective-spin data of an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarMoments {
    pub mean_y: f64,
    pub mean_z: f64,
    pub var_y: f64,
    pub var_z: f64,
    /// In-plane covariance `<J_y J_z + J_z J_y>/2 - <J_y><J_z>`.
    #[serde(default)]
    pub cov_yz: f64,
    /// Average atom number.
    pub mean_n: f64,
    #[serde(rename = "two_j")]
    pub spin: SpinLabel,
}

impl PlanarMoments {
    pub fn polarization(&self) -> f64 {
        self.mean_y.hypot(self.mean_z)
    }

    pub fn var_sum(&self) -> f64 {
        self.var_y + self.var_z
    }

    /// Normalized polarization `|<J_par>| / (<N> j)`.
    pub fn normalized_polarization(&self) -> f64 {
        self.polarization() / (self.mean_n * self.spin.value())
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mean_y, self.mean_z, self.var_y, self.var_z, self.cov_yz, self.mean_n]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("moments contain non-finite values".into()));
        }
        if self.var_y < 0.0 || self.var_z < 0.0 {
            return Err(Error::InvalidInput("variances must be non-negative".into()));
        }
        if !(self.mean_n > 0.0) {
            return Err(Error::InvalidInput("mean_n must be positive".into()));
        }
        if self.spin.two_j() == 0 {
            return Err(Error::InvalidInput("single-particle spin must be at least 1/2".into()));
        }
        let cap = self.mean_n * self.spin.value();
        if self.polarization() > cap * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "polarization {} exceeds <N> j = {}",
                self.polarization(),
                cap
            )));
        }
        Ok(())
    }

    /// Scales both variances and the covariance by `factor`.
    pub fn with_scaled_variances(&self, factor: f64) -> Self {
        Self {
            var_y: self.var_y * factor,
            var_z: self.var_z * factor,
            cov_yz: self.cov_yz * factor,
            ..*self
        }
    }
}

/// Rotates the in-plane frame so that the mean spin lies along +y.
pub fn rotate_to_polarization_axis(m: &PlanarMoments) -> Result<PlanarMoments> {
    let p = m.polarization();
    if !(p > 0.0) {
        return Err(Error::ZeroPolarization);
    }
    let (c, s) = (m.mean_y / p, m.mean_z / p);
    let var_y = c * c * m.var_y + s * s * m.var_z + 2.0 * c * s * m.cov_yz;
    let var_z = s * s * m.var_y + c * c * m.var_z - 2.0 * c * s * m.cov_yz;
    let cov_yz = c * s * (m.var_z - m.var_y) + (c * c - s * s) * m.cov_yz;
    Ok(PlanarMoments { mean_y: p, mean_z: 0.0, var_y, var_z, cov_yz, ..*m })
}

/// Rotates the in-plane frame by `angle` (radians, y toward z).
pub fn rotate_frame(m: &PlanarMoments, angle: f64) -> PlanarMoments {
    let (s, c) = angle.sin_cos();
    let mean_y = c * m.mean_y - s * m.mean_z;
    let mean_z = s * m.mean_y + c * m.mean_z;
    let var_y = c * c * m.var_y + s * s * m.var_z - 2.0 * c * s * m.cov_yz;
    let var_z = s * s * m.var_y + c * c * m.var_z + 2.0 * c * s * m.cov_yz;
    let cov_yz = c * s * (m.var_y - m.var_z) + (c * c - s * s) * m.cov_yz;
    PlanarMoments { mean_y, mean_z, var_y, var_z, cov_yz, ..*m }
}

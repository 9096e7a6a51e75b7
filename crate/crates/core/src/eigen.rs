//! Lowest eigenpairs of real symmetric band matrices.
//!
//! Small problems go through a dense symmetric eigendecomposition. Larger
//! ones use restarted Lanczos with full reorthogonalization, polished by
//! shifted inverse iteration on a banded Cholesky factor.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real symmetric band matrix; `bands[k][i]` holds entry `(i + k, i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBand {
    bands: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn zeros(dim: usize, width: usize) -> Self {
        let bands = (0..=width).map(|k| vec![0.0; dim.saturating_sub(k)]).collect();
        Self { bands }
    }

    /// Builds from a dense symmetric matrix, keeping every non-zero diagonal.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let d = m.nrows();
        let width = (0..d)
            .flat_map(|r| (0..=r).map(move |c| (r, c)))
            .filter(|&(r, c)| m[(r, c)] != 0.0 || m[(c, r)] != 0.0)
            .map(|(r, c)| r - c)
            .max()
            .unwrap_or(0);
        let mut out = Self::zeros(d, width);
        for k in 0..=width {
            for i in 0..d - k {
                out.bands[k][i] = 0.5 * (m[(i + k, i)] + m[(i, i + k)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.bands[0].len()
    }

    pub fn width(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (hi, lo) = if r >= c { (r, c) } else { (c, r) };
        self.bands.get(hi - lo).map_or(0.0, |b| b[lo])
    }

    /// Sets `(r, c)` and `(c, r)`.
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let (hi, lo) = if r >= c { (r, c) } else { (c, r) };
        self.bands[hi - lo][lo] = v;
    }

    pub fn band(&self, k: usize) -> &[f64] {
        &self.bands[k]
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let d = self.dim();
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.bands[0][i] * x[i];
        }
        for k in 1..self.bands.len() {
            for i in 0..d - k {
                let a = self.bands[k][i];
                y[i + k] += a * x[i];
                y[i] += a * x[i + k];
            }
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(x.len());
        self.matvec(x.as_slice(), y.as_mut_slice());
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |r, c| self.get(r, c))
    }

    /// Max absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let d = self.dim();
        let mut rows = vec![0.0f64; d];
        for (k, band) in self.bands.iter().enumerate() {
            for (i, a) in band.iter().enumerate() {
                rows[i + k] += a.abs();
                if k > 0 {
                    rows[i] += a.abs();
                }
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// `(self - shift I) = L L^T` for a banded lower factor, or `None` if not positive definite.
    fn shifted_cholesky(&self, shift: f64) -> Option<SymBand> {
        let d = self.dim();
        let w = self.width();
        let mut l = Self::zeros(d, w);
        for i in 0..d {
            for j in i.saturating_sub(w)..=i {
                let mut s = self.get(i, j) - if i == j { shift } else { 0.0 };
                for k in i.saturating_sub(w).max(j.saturating_sub(w))..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    l.bands[0][i] = s.sqrt();
                } else {
                    l.bands[i - j][j] = s / l.bands[0][j];
                }
            }
        }
        Some(l)
    }

    /// Solves `L L^T x = b` given the factor from [`Self::shifted_cholesky`].
    fn cholesky_solve(l: &SymBand, b: &DVector<f64>) -> DVector<f64> {
        let d = l.dim();
        let w = l.width();
        let mut y = b.clone();
        for i in 0..d {
            let mut s = y[i];
            for k in i.saturating_sub(w)..i {
                s -= l.bands[i - k][k] * y[k];
            }
            y[i] = s / l.bands[0][i];
        }
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in i + 1..(i + w + 1).min(d) {
                s -= l.bands[k - i][i] * y[k];
            }
            y[i] = s / l.bands[0][i];
        }
        y
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Largest dimension handled by dense diagonalization.
    pub dense_limit: usize,
    /// Residual target relative to the norm bound.
    pub tolerance: f64,
    /// Eigenvalues closer than this (relative) to the minimum count as degenerate.
    pub degeneracy_tolerance: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub max_inverse_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_limit: 512,
            tolerance: 1e-10,
            degeneracy_tolerance: 1e-9,
            krylov_dim: 80,
            max_restarts: 60,
            max_inverse_iterations: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: DVector<f64>,
    pub residual: f64,
    /// Number of eigenvalues found within the degeneracy window (at least 1).
    pub multiplicity: usize,
}

fn residual_of(h: &SymBand, value: f64, v: &DVector<f64>) -> f64 {
    (h.apply(v) - v * value).norm()
}

/// Lowest eigenvalue and a unit eigenvector.
pub fn extremal_eigenpair(h: &SymBand, opts: &EigenOptions) -> Result<EigenPair> {
    lowest_with_tiebreak(h, None, opts)
}

/// Lowest eigenpair; inside a degenerate ground space the vector maximizing
/// the diagonal observable `observable` is returned.
pub fn lowest_with_tiebreak(
    h: &SymBand,
    observable: Option<&[f64]>,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    let d = h.dim();
    if d == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    if d <= opts.dense_limit {
        dense_lowest(h, observable, opts)
    } else {
        iterative_lowest(h, observable, opts)
    }
}

fn pick_in_subspace(basis: &[DVector<f64>], observable: Option<&[f64]>) -> DVector<f64> {
    let Some(obs) = observable.filter(|_| basis.len() > 1) else {
        return basis[0].clone();
    };
    let n = basis.len();
    let proj = DMatrix::from_fn(n, n, |a, b| {
        basis[a].iter().zip(basis[b].iter()).zip(obs).map(|((x, y), o)| x * y * o).sum::<f64>()
    });
    let eig = SymmetricEigen::new(proj);
    let top = (0..n).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    let mut v = DVector::zeros(basis[0].len());
    for (a, b) in basis.iter().enumerate() {
        v += b * eig.eigenvectors[(a, top)];
    }
    v.normalize()
}

fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
    if pivot < 0.0 {
        v.neg_mut();
    }
    v
}

fn dense_lowest(h: &SymBand, observable: Option<&[f64]>, opts: &EigenOptions) -> Result<EigenPair> {
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(h.to_dense());
    let lowest = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let window = opts.degeneracy_tolerance * norm;
    let basis: Vec<DVector<f64>> = (0..h.dim())
        .filter(|&i| eig.eigenvalues[i] <= lowest + window)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    let vector = canonical_sign(pick_in_subspace(&basis, observable));
    let value = vector.dot(&h.apply(&vector));
    let residual = residual_of(h, value, &vector);
    if residual > opts.tolerance * norm * 10.0 {
        return Err(Error::EigenNonConvergence { iterations: 1, residual });
    }
    Ok(EigenPair { value, vector, residual, multiplicity: basis.len() })
}

fn project_out(v: &mut DVector<f64>, against: &[DVector<f64>]) {
    for _ in 0..2 {
        for q in against {
            let c = q.dot(v);
            v.axpy(-c, q, 1.0);
        }
    }
}

fn default_start(d: usize) -> DVector<f64> {
    DVector::from_fn(d, |i, _| 1.0 + 0.25 * ((i as f64) * 1.618_033_988_7).sin())
}

/// Restarted Lanczos for the lowest eigenpair in the complement of `deflate`.
fn lanczos(
    h: &SymBand,
    deflate: &[DVector<f64>],
    opts: &EigenOptions,
) -> Result<(f64, DVector<f64>, f64, usize)> {
    let d = h.dim();
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let m = opts.krylov_dim.min(d - deflate.len()).max(1);
    let mut v = default_start(d);
    project_out(&mut v, deflate);
    v = v.normalize();
    let mut best = (f64::INFINITY, v.clone(), f64::INFINITY);
    let mut iterations = 0;
    for _ in 0..opts.max_restarts.max(1) {
        let mut q: Vec<DVector<f64>> = vec![v.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            iterations += 1;
            let mut w = h.apply(&q[j]);
            project_out(&mut w, deflate);
            let a = q[j].dot(&w);
            alpha.push(a);
            project_out(&mut w, &q);
            let b = w.norm();
            if j + 1 == m || b <= 1e-13 * norm {
                break;
            }
            beta.push(b);
            q.push(w / b);
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r == c + 1 {
                beta[c]
            } else if c == r + 1 {
                beta[r]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let i0 = (0..k).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let mut ritz = DVector::zeros(d);
        for (i, qi) in q.iter().take(k).enumerate() {
            ritz.axpy(eig.eigenvectors[(i, i0)], qi, 1.0);
        }
        project_out(&mut ritz, deflate);
        ritz = ritz.normalize();
        let theta = ritz.dot(&h.apply(&ritz));
        let mut r = h.apply(&ritz) - &ritz * theta;
        project_out(&mut r, deflate);
        let res = r.norm();
        if res < best.2 {
            best = (theta, ritz.clone(), res);
        }
        if res <= opts.tolerance * norm {
            break;
        }
        v = ritz;
    }
    Ok((best.0, best.1, best.2, iterations))
}

/// Shifted inverse iteration from an approximate eigenpair.
fn polish(
    h: &SymBand,
    deflate: &[DVector<f64>],
    theta: f64,
    v: DVector<f64>,
    residual: f64,
    opts: &EigenOptions,
) -> (f64, DVector<f64>, f64) {
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let mut gap = (2.0 * residual).max(1e-12 * norm);
    let factor = loop {
        match h.shifted_cholesky(theta - gap) {
            Some(l) => break Some(l),
            None if gap < norm => gap *= 4.0,
            None => break None,
        }
    };
    let Some(l) = factor else { return (theta, v, residual) };
    let mut best = (theta, v.clone(), residual);
    let mut x = v;
    for _ in 0..opts.max_inverse_iterations {
        let mut y = SymBand::cholesky_solve(&l, &x);
        project_out(&mut y, deflate);
        x = y.normalize();
        let val = x.dot(&h.apply(&x));
        let mut r = h.apply(&x) - &x * val;
        project_out(&mut r, deflate);
        let res = r.norm();
        if res < best.2 {
            best = (val, x.clone(), res);
        }
        if res <= 0.1 * opts.tolerance * norm {
            break;
        }
    }
    best
}

fn iterative_lowest(h: &SymBand, observable: Option<&[f64]>, opts: &EigenOptions) -> Result<EigenPair> {
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let (theta, v, res, iters) = lanczos(h, &[], opts)?;
    let (theta, v, res) = if res > 0.1 * opts.tolerance * norm {
        polish(h, &[], theta, v, res, opts)
    } else {
        (theta, v, res)
    };
    if res > opts.tolerance * norm {
        return Err(Error::EigenNonConvergence { iterations: iters, residual: res });
    }
    let mut basis = vec![v];
    let window = opts.degeneracy_tolerance * norm;
    // Collect further eigenvectors as long as they fall inside the degeneracy window.
    while basis.len() < h.dim() && basis.len() < 8 {
        let (t2, v2, r2, _) = lanczos(h, &basis, opts)?;
        if t2 > theta + window + r2 {
            break;
        }
        if r2 > opts.tolerance * norm {
            // Not resolved: compare with the first value only.
            if t2 - theta > window {
                break;
            }
        }
        basis.push(v2);
    }
    let vector = canonical_sign(pick_in_subspace(&basis, observable));
    let value = vector.dot(&h.apply(&vector));
    let residual = residual_of(h, value, &vector);
    Ok(EigenPair { value, vector, residual, multiplicity: basis.len() })
}

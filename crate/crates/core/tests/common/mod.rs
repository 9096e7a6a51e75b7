//! Dense reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Cx = Complex<f64>;
pub type CMat = DMatrix<Cx>;
pub type CVec = DVector<Cx>;

pub fn cx(re: f64) -> Cx {
    Cx::new(re, 0.0)
}

/// `(J_x, J_y, J_z)` for spin `two_j / 2` in the `J_z` eigenbasis, ordered `m = j, j-1, ...`.
pub fn spin_matrices(two_j: u32) -> (CMat, CMat, CMat) {
    let j = f64::from(two_j) / 2.0;
    let d = two_j as usize + 1;
    let m: Vec<f64> = (0..d).map(|i| j - i as f64).collect();
    let mut raise = CMat::zeros(d, d);
    for i in 1..d {
        raise[(i - 1, i)] = cx((j * (j + 1.0) - m[i] * (m[i] + 1.0)).sqrt());
    }
    let lower = raise.adjoint();
    let jx = (&raise + &lower) * cx(0.5);
    let jy = (&raise - &lower) * Cx::new(0.0, -0.5);
    let jz = CMat::from_diagonal(&DVector::from_iterator(d, m.iter().map(|&v| cx(v))));
    (jx, jy, jz)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Collective components `sum_i j_i` for `n` particles of spin `two_j / 2`.
pub fn collective(two_j: u32, n: usize) -> (CMat, CMat, CMat) {
    let (x, y, z) = spin_matrices(two_j);
    let d = two_j as usize + 1;
    let embed = |op: &CMat| -> CMat {
        let mut total = CMat::zeros(d.pow(n as u32), d.pow(n as u32));
        for site in 0..n {
            let mut term = CMat::identity(1, 1);
            for k in 0..n {
                term = kron(&term, &if k == site { op.clone() } else { CMat::identity(d, d) });
            }
            total += term;
        }
        total
    };
    (embed(&x), embed(&y), embed(&z))
}

pub fn expect(op: &CMat, psi: &CVec) -> f64 {
    psi.dotc(&(op * psi)).re
}

/// `(<J_y>, <J_z>, var_y, var_z)`
pub fn planar_moments(jy: &CMat, jz: &CMat, psi: &CVec) -> (f64, f64, f64, f64) {
    let my = expect(jy, psi);
    let mz = expect(jz, psi);
    let vy = expect(&(jy * jy), psi) - my * my;
    let vz = expect(&(jz * jz), psi) - mz * mz;
    (my, mz, vy, vz)
}

pub fn random_state<R: Rng>(dim: usize, rng: &mut R) -> CVec {
    let v = CVec::from_fn(dim, |_, _| {
        Cx::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng))
    });
    let n = v.norm();
    v / cx(n)
}

/// Lowest eigenvector of a Hermitian matrix.
pub fn ground_state(h: &CMat) -> CVec {
    let eig = h.clone().symmetric_eigen();
    let i = eig.eigenvalues.imin();
    eig.eigenvectors.column(i).into_owned()
}

/// A state near the optimum of `var_y + var_z - lambda <J_y>` (or `var_z`
/// alone), found as the ground state of the linearized functional with
/// random shifts, then perturbed.
pub fn probe_state<R: Rng>(jy: &CMat, jz: &CMat, planar: bool, rng: &mut R) -> CVec {
    let d = jy.nrows();
    let scale = ((d - 1) as f64 / 2.0).max(0.5);
    let lambda = rng.random_range(0.0..(8.0 * scale + 4.0));
    let s_y = rng.random_range(0.0..scale);
    let s_z = 0.05 * scale * rng.random_range(-1.0..1.0);
    let id = CMat::identity(d, d);
    let dz = jz - &id * cx(s_z);
    let mut h = &dz * &dz - jy * cx(lambda);
    if planar {
        let dy = jy - &id * cx(s_y);
        h += &dy * &dy;
    }
    let psi = ground_state(&h);
    let eps = 10f64.powf(rng.random_range(-8.0..-1.0));
    let noisy = psi + random_state(d, rng) * cx(eps);
    let n = noisy.norm();
    noisy / cx(n)
}

/// Eigenvalues (ascending) and column eigenvectors of a real symmetric
/// matrix by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum();
        if off < 1e-26 * m.norm_squared().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// `3/2 - X^2 - sqrt(1 - X^2) / 2`
pub fn g_spin_one(x: f64) -> f64 {
    1.5 - x * x - 0.5 * (1.0 - x * x).max(0.0).sqrt()
}

/// Lower convex hull of points sorted by abscissa.
pub fn convex_minorant(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

pub fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let i = points.partition_point(|p| p.0 < x).clamp(1, points.len() - 1);
    let (a, b) = (points[i - 1], points[i]);
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

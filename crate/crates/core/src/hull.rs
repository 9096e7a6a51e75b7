//! Lower convex hulls of point clouds, their Legendre-dual construction,
//! and piecewise-linear evaluation.

use crate::error::{Error, Result};

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Lower convex hull (monotone chain) with strictly increasing abscissae.
pub fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|b, a| a.0 == b.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

/// Lower hull of an even function sampled on `X >= 0`: the points are
/// mirrored to `-X`, hulled, and the result restricted to `[0, 1]`.
pub fn mirrored_hull_on_unit(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut all: Vec<(f64, f64)> = Vec::with_capacity(2 * points.len());
    for &(x, v) in points {
        all.push((x, v));
        all.push((-x, v));
    }
    restrict_to_unit(&lower_hull(&all))
}

fn restrict_to_unit(hull: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.0 < 0.0 && b.0 > 0.0 {
            out.push((0.0, a.1 + (b.1 - a.1) * (0.0 - a.0) / (b.0 - a.0)));
        }
    }
    out.extend(hull.iter().copied().filter(|p| (0.0..=1.0).contains(&p.0)));
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.dedup_by(|b, a| a.0 == b.0);
    out
}

/// Multipliers at which the minimizing point of `v - lambda x` changes,
/// ascending. Computed from the lower envelope of the dual lines.
pub fn legendre_breakpoints(points: &[(f64, f64)]) -> Vec<f64> {
    // Lines l_i(lambda) = v_i - lambda x_i; the envelope is entered in
    // order of decreasing slope, i.e. increasing x.
    let mut lines: Vec<(f64, f64)> = points.to_vec();
    lines.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    lines.dedup_by(|b, a| a.0 == b.0);
    let meet = |p: (f64, f64), q: (f64, f64)| (q.1 - p.1) / (q.0 - p.0);
    let mut env: Vec<(f64, f64)> = Vec::new();
    for l in lines {
        while let Some(&last) = env.last() {
            if env.len() >= 2 {
                let prev = env[env.len() - 2];
                if meet(prev, last) >= meet(last, l) {
                    env.pop();
                    continue;
                }
            }
            break;
        }
        env.push(l);
    }
    env.windows(2).map(|w| meet(w[0], w[1])).collect()
}

/// `min_i (v_i - lambda x_i)`
pub fn legendre_value(points: &[(f64, f64)], lambda: f64) -> f64 {
    points.iter().map(|&(x, v)| v - lambda * x).fold(f64::INFINITY, f64::min)
}

/// Convex envelope at `x` as the double Legendre transform
/// `max_lambda [L(lambda) + lambda x]`, maximized over the breakpoints.
pub fn double_legendre(points: &[(f64, f64)], breakpoints: &[f64], x: f64) -> f64 {
    if breakpoints.is_empty() {
        return points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    }
    breakpoints.iter().map(|&l| legendre_value(points, l) + l * x).fold(f64::NEG_INFINITY, f64::max)
}

/// Vertices on `[lo, hi]` of the pointwise maximum of the lines
/// `x -> intercept + slope x`, given as `(slope, intercept)`.
pub fn upper_envelope(lines: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut ls: Vec<(f64, f64)> = lines.iter().copied().filter(|l| l.0.is_finite() && l.1.is_finite()).collect();
    if ls.is_empty() || !(hi >= lo) {
        return Vec::new();
    }
    ls.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    ls.dedup_by(|b, a| a.0 == b.0);
    let meet = |p: (f64, f64), q: (f64, f64)| (p.1 - q.1) / (q.0 - p.0);
    let mut env: Vec<(f64, f64)> = Vec::with_capacity(ls.len());
    for l in ls {
        while env.len() >= 2 && meet(env[env.len() - 2], l) <= meet(env[env.len() - 2], env[env.len() - 1]) {
            env.pop();
        }
        env.push(l);
    }
    let value = |x: f64| env.iter().map(|l| l.1 + l.0 * x).fold(f64::NEG_INFINITY, f64::max);
    let mut xs = vec![lo];
    xs.extend(env.windows(2).map(|w| meet(w[0], w[1])).filter(|&x| x > lo && x < hi));
    xs.push(hi);
    xs.dedup_by(|b, a| (*b - *a).abs() <= 1e-15 * a.abs().max(1.0));
    xs.into_iter().map(|x| (x, value(x))).collect()
}

/// Piecewise-linear function through strictly increasing abscissae.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear<'a> {
    points: &'a [(f64, f64)],
}

const RANGE_SLACK: f64 = 1e-12;

impl<'a> PiecewiseLinear<'a> {
    pub fn new(points: &'a [(f64, f64)]) -> Self {
        Self { points }
    }

    /// Interpolated value; no extrapolation beyond the sampled range.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let pts = self.points;
        let (Some(first), Some(last)) = (pts.first(), pts.last()) else {
            return Err(Error::InvalidInput("empty curve".into()));
        };
        if !(x >= first.0 - RANGE_SLACK && x <= last.0 + RANGE_SLACK) {
            return Err(Error::OutOfRange { x, lo: first.0, hi: last.0 });
        }
        let x = x.clamp(first.0, last.0);
        let i = pts.partition_point(|p| p.0 < x);
        if i < pts.len() && pts[i].0 == x {
            return Ok(pts[i].1);
        }
        if i == 0 {
            return Ok(first.1);
        }
        let (a, b) = (pts[i - 1], pts[i]);
        Ok(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0))
    }
}

/// Smallest discrete second difference (slope increments) along the points.
pub fn min_slope_increment(points: &[(f64, f64)]) -> f64 {
    let slopes: Vec<f64> = points.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    slopes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

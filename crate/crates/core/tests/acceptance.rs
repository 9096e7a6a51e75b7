//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Each criterion is a list of named sub-checks. The process exits non-zero
//! when the set of failing sub-checks differs from `KNOWN_FAILURES`, so a
//! regression in a passing check and an unexpected fix of a known failure
//! are both reported.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{Matrix2, Vector2};
use pqs_depth::criteria::{check_obs1, compare_criteria, entanglement_depth, CriterionConfig, CriterionData, CriterionKind, Winner};
use pqs_depth::curves::{
    linear_lower_bound, producibility_hull, sm_curve, symmetric_curve, zeta_table, BoundCurve, CurveMode, CurveProvider,
    CurveSettings, ZetaTable,
};
use pqs_depth::metrology::phase_averaged_enhancement;
use pqs_depth::pipeline::{analyze_run, conditional_covariance, generate_synthetic_run, AnalysisConfig, GeneratorConfig, SpinEstimatePair};
use pqs_depth::spin::{PlanarMoments, SpinLabel};
use pqs_depth::xi_parallel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const TABLE_TOLERANCE: f64 = 5e-4;
const TABLE_RUNTIME: Duration = Duration::from_secs(60);
const CLOSED_FORM_TOLERANCE: f64 = 1e-6;
const CLOSED_FORM_POINTS: usize = 200;
const LINEARITY_TOLERANCE: f64 = 1e-8;
const COINCIDENCE_TOLERANCE: f64 = 1e-8;
const PRINTED_SLOPE: f64 = 0.35321;
const MONOTONE_J_MAX: u32 = 50;
const PROPERTY_RUNTIME: Duration = Duration::from_secs(300);
const SOUNDNESS_TOLERANCE: f64 = 1e-9;
const PRODUCT_TRIALS: usize = 100_000;
const PAIR_TRIALS: usize = 10_000;
const ENHANCEMENT_TOLERANCE: f64 = 1e-9;
const ENHANCEMENT_TRIALS: usize = 1_000;
const TARGET_XI: f64 = 0.32;
const TARGET_POLARIZATION: f64 = 0.83;
const ATOMS: f64 = 1.75e6;
const XI_UNCERTAINTY: f64 = 0.02;
const F2_EXPECTED: f64 = 0.289;
const F4_EXPECTED: f64 = 0.178;
const FRACTION_TOLERANCE: f64 = 0.01;
const PIPELINE_RUNTIME: Duration = Duration::from_secs(120);
const OPTIMUM_PULSES: u32 = 50;
const GRID_SIZE: usize = 50;
const SHOTS: usize = 453;
const BOOTSTRAP: usize = 500;
const BOOTSTRAP_SIGMAS: f64 = 3.0;

/// Sub-checks expected to fail, with the reason recorded in the README.
const KNOWN_FAILURES: &[(u32, &str)] = &[
    (1, "J=2..27 within 5e-4"),
    (3, "printed-slope line below hull"),
    (7, "interval [5,6] under +-0.02"),
    (7, "pipeline fractions within 0.01"),
];

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

struct Criterion {
    id: u32,
    title: &'static str,
    checks: Vec<Check>,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Self { id, title, checks: Vec::new() }
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), pass, detail });
    }
}

fn settings() -> CurveSettings {
    CurveSettings::default()
}

fn table_reproduction() -> Criterion {
    let mut c = Criterion::new(1, "zeta table J=1..27");
    let start = Instant::now();
    let table = zeta_table(SpinLabel::integer(27), false, &settings()).expect("zeta table");
    let elapsed = start.elapsed();
    let printed = ZetaTable::published();
    let computed = |j: u32| table.get(SpinLabel::integer(j)).unwrap();
    let published = |j: u32| printed.get(SpinLabel::integer(j)).unwrap();

    let decimals = ZetaTable::published_decimals(SpinLabel::integer(1)).unwrap() as i32;
    let rounded = (computed(1) * 10f64.powi(decimals)).round() / 10f64.powi(decimals);
    c.check(
        "J=1 at printed precision",
        rounded == published(1) && (computed(1) - 0.44906).abs() < 5e-6,
        format!("computed {:.6}, printed {} and 0.44906", computed(1), published(1)),
    );
    let mut worst = (0, 0.0);
    for j in 2..=27 {
        let err = (computed(j) - published(j)).abs();
        if err > worst.1 {
            worst = (j, err);
        }
    }
    c.check(
        "J=2..27 within 5e-4",
        worst.1 <= TABLE_TOLERANCE,
        format!("worst J={} off by {:.2e}", worst.0, worst.1),
    );
    let shifted = (1..27).map(|j| (computed(j) - published(j + 1)).abs()).fold(0.0, f64::max);
    c.check("runtime < 60 s", elapsed < TABLE_RUNTIME, format!("{:.1} s; printed J+1 vs computed J within {shifted:.1e}", elapsed.as_secs_f64()));
    c
}

fn closed_form() -> Criterion {
    let mut c = Criterion::new(2, "closed form for J=1");
    let curve = symmetric_curve(SpinLabel::integer(1), CurveMode::Exact { samples: CLOSED_FORM_POINTS }, &settings()).unwrap();
    let worst = curve.points.iter().map(|&(x, v)| (v - g_spin_one(x)).abs()).fold(0.0, f64::max);
    c.check(
        "curve vs closed form",
        curve.points.len() >= CLOSED_FORM_POINTS && worst < CLOSED_FORM_TOLERANCE,
        format!("{} points, worst {worst:.1e}", curve.points.len()),
    );
    // Golden-section search on the ratio, unimodal on (0, 1).
    let ratio = |x: f64| g_spin_one(x) / x;
    let (mut a, mut b) = (0.5, 1.0);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (x1, x2) = (b - phi * (b - a), a + phi * (b - a));
        if ratio(x1) < ratio(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let analytic = ratio(0.5 * (a + b));
    let z = pqs_depth::zeta(SpinLabel::integer(1), &settings()).unwrap();
    c.check("zeta(1) vs analytic minimum", (z - analytic).abs() < CLOSED_FORM_TOLERANCE, format!("{z:.9} vs {analytic:.9}"));
    c
}

fn hull_structure() -> Criterion {
    let mut c = Criterion::new(3, "hull structure k=4, j=1");
    let j = SpinLabel::integer(1);
    let hull = producibility_hull(4, j, &settings()).unwrap();
    let block = symmetric_curve(SpinLabel::integer(4), CurveMode::Envelope, &settings()).unwrap();
    let (x_t, _) = hull.metadata.tangent.expect("hull tangent");

    let steps = 2000;
    let below: Vec<f64> = (0..=steps).map(|i| x_t * i as f64 / steps as f64).collect();
    let values: Vec<f64> = below.iter().map(|&x| hull.eval(x).unwrap()).collect();
    let second = values.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).abs()).fold(0.0, f64::max);
    c.check("linear below tangency", second < LINEARITY_TOLERANCE, format!("X_t = {x_t:.4}, max second difference {second:.1e}"));

    let above = (0..=steps).map(|i| x_t + (1.0 - x_t) * i as f64 / steps as f64);
    let gap = above.map(|x| (hull.eval(x).unwrap() - block.eval(x).unwrap()).abs()).fold(0.0, f64::max);
    c.check("coincides with J=4 curve above", gap < COINCIDENCE_TOLERANCE, format!("max gap {gap:.1e}"));

    let grid: Vec<f64> = (0..=10 * steps).map(|i| i as f64 / (10 * steps) as f64).collect();
    let excess = |table: &ZetaTable| {
        let line = linear_lower_bound(4, j, table).unwrap();
        let worst = grid.iter().map(|&x| line.eval(x) - hull.eval(x).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        (line.slope, worst)
    };
    let computed = zeta_table(SpinLabel::integer(4), false, &settings()).unwrap();
    let (own_slope, own) = excess(&computed);
    c.check("computed-slope line below hull", own <= SOUNDNESS_TOLERANCE, format!("slope {own_slope:.6}, max excess {own:.1e}"));
    let (slope, printed) = excess(&ZetaTable::published());
    c.check(
        "printed-slope line below hull",
        slope == PRINTED_SLOPE && printed <= SOUNDNESS_TOLERANCE,
        format!("slope {slope}, max excess {printed:.2e}"),
    );
    c
}

fn monotonicity() -> Criterion {
    let mut c = Criterion::new(4, "monotone zeta and nested hulls");
    let start = Instant::now();
    let table = zeta_table(SpinLabel::integer(MONOTONE_J_MAX), false, &settings()).unwrap();
    let values: Vec<f64> = (1..=MONOTONE_J_MAX).map(|j| table.get(SpinLabel::integer(j)).unwrap()).collect();
    let rise = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    c.check("zeta non-increasing J<=50", rise <= 0.0, format!("largest step {rise:.2e}"));

    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let mut worst = f64::NEG_INFINITY;
    for j in [SpinLabel::half(), SpinLabel::integer(1)] {
        let hulls: Vec<BoundCurve> = (1..=6).map(|k| producibility_hull(k, j, &settings()).unwrap()).collect();
        for pair in hulls.windows(2) {
            for &x in &grid {
                worst = worst.max(pair[1].eval(x).unwrap() - pair[0].eval(x).unwrap());
            }
        }
    }
    c.check("hulls non-increasing in k", worst <= SOUNDNESS_TOLERANCE, format!("largest increase {worst:.1e}"));
    let elapsed = start.elapsed();
    c.check("runtime < 5 min", elapsed < PROPERTY_RUNTIME, format!("{:.1} s", elapsed.as_secs_f64()));
    c
}

/// Moments of a product of independent groups, each given by its collective
/// operators and state.
fn product_moments(groups: &[(&CMat, &CMat, CVec)]) -> (f64, f64, f64) {
    let mut mean = Vector2::zeros();
    let mut var = 0.0;
    for (jy, jz, psi) in groups {
        let (my, mz, vy, vz) = planar_moments(jy, jz, psi);
        mean += Vector2::new(my, mz);
        var += vy + vz;
    }
    (mean[0], mean[1], var)
}

fn moments_record(mean_y: f64, mean_z: f64, var_sum: f64, n: usize, spin: SpinLabel) -> PlanarMoments {
    PlanarMoments { mean_y, mean_z, var_y: 0.5 * var_sum, var_z: 0.5 * var_sum, cov_yz: 0.0, mean_n: n as f64, spin }
}

fn brute_force() -> Criterion {
    let mut c = Criterion::new(5, "brute-force soundness");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_product = f64::NEG_INFINITY;
    let mut worst_pair = f64::NEG_INFINITY;
    let mut violations = (0, 0);
    for (two_j, spin) in [(1u32, SpinLabel::half()), (2, SpinLabel::integer(1))] {
        let j = spin.value();
        let hull1 = producibility_hull(1, spin, &settings()).unwrap();
        let hull2 = producibility_hull(2, spin, &settings()).unwrap();
        let (_, sy, sz) = spin_matrices(two_j);
        let (_, py, pz) = collective(two_j, 2);
        let d = two_j as usize + 1;

        for trial in 0..PRODUCT_TRIALS / 2 {
            let n = rng.random_range(1..=4);
            let shared = trial % 3 == 0;
            let first = if trial % 2 == 0 { probe_state(&sy, &sz, true, &mut rng) } else { random_state(d, &mut rng) };
            let groups: Vec<(&CMat, &CMat, CVec)> = (0..n)
                .map(|i| {
                    let psi = if i == 0 || shared { first.clone() } else { random_state(d, &mut rng) };
                    (&sy, &sz, psi)
                })
                .collect();
            let (my, mz, var) = product_moments(&groups);
            let cap = n as f64 * j;
            let m = moments_record(my, mz, var, n, spin);
            let slack = var / cap - hull1.eval((m.normalized_polarization()).min(1.0)).unwrap();
            worst_product = worst_product.max(-slack);
            if check_obs1(&m, 1, &hull1, SOUNDNESS_TOLERANCE).unwrap().violated {
                violations.0 += 1;
            }
        }

        for trial in 0..PAIR_TRIALS / 2 {
            let n = rng.random_range(1..=4);
            let mut groups: Vec<(&CMat, &CMat, CVec)> = Vec::new();
            let mut left = n;
            while left > 0 {
                let size = if left >= 2 && rng.random_bool(0.75) { 2 } else { 1 };
                let (gy, gz) = if size == 2 { (&py, &pz) } else { (&sy, &sz) };
                let psi = if trial % 2 == 0 { probe_state(gy, gz, true, &mut rng) } else { random_state(gy.nrows(), &mut rng) };
                groups.push((gy, gz, psi));
                left -= size;
            }
            let (my, mz, var) = product_moments(&groups);
            let cap = n as f64 * j;
            let m = moments_record(my, mz, var, n, spin);
            let slack = var / cap - hull2.eval((m.normalized_polarization()).min(1.0)).unwrap();
            worst_pair = worst_pair.max(-slack);
            if check_obs1(&m, 2, &hull2, SOUNDNESS_TOLERANCE).unwrap().violated {
                violations.1 += 1;
            }
        }
    }
    c.check(
        "product states",
        violations.0 == 0 && worst_product <= SOUNDNESS_TOLERANCE,
        format!("{PRODUCT_TRIALS} trials, {} violations, closest approach {:.1e}", violations.0, -worst_product),
    );
    c.check(
        "2-producible states",
        violations.1 == 0 && worst_pair <= SOUNDNESS_TOLERANCE,
        format!("{PAIR_TRIALS} trials, {} violations, closest approach {:.1e}", violations.1, -worst_pair),
    );
    c
}

fn random_moments(rng: &mut ChaCha8Rng) -> PlanarMoments {
    let n = 10f64.powf(rng.random_range(0.0..7.0));
    let spin = SpinLabel::from_two_j(rng.random_range(1..=6));
    let cap = n * spin.value();
    let pol = cap * rng.random_range(0.01..1.0);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let var_y = cap * 10f64.powf(rng.random_range(-3.0..0.5));
    let var_z = cap * 10f64.powf(rng.random_range(-3.0..0.5));
    let cov_yz = (var_y * var_z).sqrt() * rng.random_range(-0.99..0.99);
    PlanarMoments { mean_y: pol * angle.cos(), mean_z: pol * angle.sin(), var_y, var_z, cov_yz, mean_n: n, spin }
}

fn enhancement_identity() -> Criterion {
    let mut c = Criterion::new(6, "phase-averaged enhancement");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..ENHANCEMENT_TRIALS {
        let m = random_moments(&mut rng);
        let xi = xi_parallel(&m).unwrap();
        let avg = phase_averaged_enhancement(&m).unwrap();
        worst = worst.max((avg - 0.5 * xi).abs());
    }
    c.check("average equals xi^2 / 2", worst < ENHANCEMENT_TOLERANCE, format!("{ENHANCEMENT_TRIALS} sets, worst {worst:.1e}"));
    c
}

fn experiment_regression() -> Criterion {
    let mut c = Criterion::new(7, "experiment scenario");
    let provider = CurveProvider::new(settings(), None);
    let config = AnalysisConfig::default();
    let criteria = CriterionConfig { which: CriterionKind::LinearZeta, ..config.criteria.clone() };
    let data = CriterionData::prepare(SpinLabel::integer(1), &criteria, Some(ZetaTable::published()), &provider).unwrap();

    let generator = GeneratorConfig::default();
    let truth = generator.truth(OPTIMUM_PULSES);
    let tuned = PlanarMoments {
        mean_y: truth.mean_y,
        mean_z: truth.mean_z,
        var_y: truth.gamma[1][1],
        var_z: truth.gamma[0][0],
        cov_yz: truth.gamma[0][1],
        mean_n: generator.atoms,
        spin: generator.spin,
    };
    let tuned_ok = (truth.xi_sq - TARGET_XI).abs() < 1e-6
        && (truth.coherence - TARGET_POLARIZATION).abs() < 1e-9
        && generator.atoms == ATOMS;
    let verdict = entanglement_depth(&tuned, Some(XI_UNCERTAINTY), &criteria, &data).unwrap();
    let (f2, f4) = (verdict.fraction(1).unwrap(), verdict.fraction(3).unwrap());
    c.check(
        "tuned scenario depth and fractions",
        tuned_ok
            && verdict.certified_depth == 6
            && (f2 - F2_EXPECTED).abs() <= FRACTION_TOLERANCE
            && (f4 - F4_EXPECTED).abs() <= FRACTION_TOLERANCE,
        format!("xi^2 {:.4}, depth {}, f_2 {f2:.4}, f_4 {f4:.4}", truth.xi_sq, verdict.certified_depth),
    );
    c.check(
        "interval [5,6] under +-0.02",
        verdict.depth_interval == Some((5, 6)),
        format!("interval {:?}", verdict.depth_interval),
    );

    let start = Instant::now();
    let run = generate_synthetic_run(&generator).unwrap();
    let report = analyze_run(&run, &AnalysisConfig { criteria: criteria.clone(), ..config }, &data).unwrap();
    let elapsed = start.elapsed();
    let group = report.groups.iter().find(|g| g.pulses == OPTIMUM_PULSES).expect("optimum group");
    let measured = group.verdict.as_ref().expect("non-negative variances");
    let within = (group.xi_sq - TARGET_XI).abs() <= 2.0 * group.xi_sigma;
    c.check(
        "pipeline depth 6",
        measured.certified_depth == 6 && within,
        format!(
            "{} shots: xi^2 {:.4} +- {:.4}, polarization {:.4}, depth {}",
            group.shots, group.xi_sq, group.xi_sigma, group.polarization_per_atom, measured.certified_depth
        ),
    );
    let (m2, m4) = (measured.fraction(1).unwrap(), measured.fraction(3).unwrap());
    c.check(
        "pipeline fractions within 0.01",
        (m2 - F2_EXPECTED).abs() <= FRACTION_TOLERANCE && (m4 - F4_EXPECTED).abs() <= FRACTION_TOLERANCE,
        format!("f_2 {m2:.4}, f_4 {m4:.4}"),
    );
    c.check("pipeline < 2 min", elapsed < PIPELINE_RUNTIME, format!("{:.2} s", elapsed.as_secs_f64()));
    c
}

fn comparison() -> Criterion {
    let mut c = Criterion::new(8, "planar vs orthogonal-variance criterion");
    let j = SpinLabel::integer(1);
    let hull = producibility_hull(5, j, &settings()).unwrap();
    let sm = sm_curve(j.times(5), &settings()).unwrap();
    let alphas: Vec<f64> = (0..GRID_SIZE).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / (GRID_SIZE - 1) as f64)).collect();
    let betas: Vec<f64> = (1..=GRID_SIZE).map(|i| i as f64 / GRID_SIZE as f64).collect();
    let grid = compare_criteria(5, j, &alphas, &betas, &hull, &sm).unwrap();

    let unit = (0..GRID_SIZE).min_by(|&a, &b| alphas[a].ln().abs().total_cmp(&alphas[b].ln().abs())).unwrap();
    let near_one: Vec<usize> = (0..GRID_SIZE).filter(|&i| (alphas[i].ln() - alphas[unit].ln()).abs() < 0.2).collect();
    let mid: Vec<usize> = (0..GRID_SIZE).filter(|&i| betas[i] >= 0.25 && betas[i] <= 0.75).collect();
    let planar_wins = near_one.iter().flat_map(|&a| mid.iter().map(move |&b| (a, b))).all(|(a, b)| grid.cell(a, b).winner == Winner::Planar);
    c.check(
        "planar wins near alpha=1",
        planar_wins,
        format!("alpha in [{:.2}, {:.2}], beta in [0.25, 0.75]", alphas[near_one[0]], alphas[*near_one.last().unwrap()]),
    );
    let small: Vec<usize> = (0..GRID_SIZE).filter(|&i| alphas[i] <= 0.05).collect();
    let polarized: Vec<usize> = (0..GRID_SIZE).filter(|&i| betas[i] >= 0.96).collect();
    let sm_wins = small.iter().flat_map(|&a| polarized.iter().map(move |&b| (a, b))).all(|(a, b)| grid.cell(a, b).winner == Winner::SorensenMolmer);
    let share = grid.cells.iter().filter(|c| c.winner == Winner::Planar).count() as f64 / grid.cells.len() as f64;
    c.check(
        "orthogonal criterion wins for small alpha, beta near j",
        sm_wins,
        format!("alpha <= 0.05, beta >= 0.96; planar wins {:.0}% of the grid", 100.0 * share),
    );
    c
}

fn gaussian_pairs(rng: &mut ChaCha8Rng, link: &Matrix2<f64>, noise: &Matrix2<f64>) -> Vec<SpinEstimatePair> {
    let prior = Matrix2::new(3.0, 0.4, 0.0, 1.5);
    (0..SHOTS as u64)
        .map(|shot_id| {
            let mut n = || -> f64 { StandardNormal.sample(rng) };
            let before = prior * Vector2::new(n(), n());
            let after = link * before + noise * Vector2::new(n(), n());
            SpinEstimatePair { shot_id, before: [before[0], before[1]], after: [after[0], after[1]] }
        })
        .collect()
}

/// Entry-wise bootstrap standard deviations of the conditional covariance.
fn bootstrap_sigma(pairs: &[SpinEstimatePair], seed: u64) -> Matrix2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Matrix2<f64>> = (0..BOOTSTRAP)
        .map(|_| {
            let resample: Vec<SpinEstimatePair> = (0..pairs.len()).map(|_| pairs[rng.random_range(0..pairs.len())]).collect();
            conditional_covariance(&resample, None).unwrap()
        })
        .collect();
    let mean = draws.iter().sum::<Matrix2<f64>>() / BOOTSTRAP as f64;
    let var = draws.iter().map(|d| (d - mean).component_mul(&(d - mean))).sum::<Matrix2<f64>>() / (BOOTSTRAP - 1) as f64;
    var.map(f64::sqrt)
}

fn conditional_recovery() -> Criterion {
    let mut c = Criterion::new(9, "conditional covariance");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut within = |name: &str, link: Matrix2<f64>, noise: Matrix2<f64>, c: &mut Criterion, seed: u64| {
        let truth = noise * noise.transpose();
        let pairs = gaussian_pairs(&mut rng, &link, &noise);
        let est = conditional_covariance(&pairs, None).unwrap();
        let sigma = bootstrap_sigma(&pairs, seed);
        let z = (est - truth).component_div(&sigma).abs().max();
        c.check(name, z <= BOOTSTRAP_SIGMAS, format!("{SHOTS} shots, worst |error| / sigma = {z:.2}"));
    };
    within("known conditional covariance", Matrix2::new(0.8, -0.3, 0.2, 1.1), Matrix2::new(0.5, 0.0, 0.3, 0.4), &mut c, 1);
    within("independent segments", Matrix2::zeros(), Matrix2::new(1.2, 0.0, -0.5, 0.7), &mut c, 2);
    let pairs = gaussian_pairs(&mut rng, &Matrix2::new(0.8, -0.3, 0.2, 1.1), &Matrix2::zeros());
    let exact = conditional_covariance(&pairs, None).unwrap().abs().max();
    c.check("perfect correlation", exact < 1e-10, format!("max |entry| {exact:.1e}"));
    c
}

fn main() {
    let known: BTreeSet<(u32, &str)> = KNOWN_FAILURES.iter().copied().collect();
    let suite: [fn() -> Criterion; 9] = [
        table_reproduction,
        closed_form,
        hull_structure,
        monotonicity,
        brute_force,
        enhancement_identity,
        experiment_regression,
        comparison,
        conditional_recovery,
    ];
    let mut surprises = Vec::new();
    let mut summary = BTreeMap::new();
    for run in suite {
        let start = Instant::now();
        let crit = run();
        let pass = crit.checks.iter().all(|c| c.pass);
        let details: Vec<String> = crit
            .checks
            .iter()
            .map(|c| format!("{}{}: {}", if c.pass { "" } else { "FAILED " }, c.name, c.detail))
            .collect();
        println!(
            "{} criterion {} ({}) [{:.1} s] {}",
            if pass { "PASS" } else { "FAIL" },
            crit.id,
            crit.title,
            start.elapsed().as_secs_f64(),
            details.join("; ")
        );
        for check in &crit.checks {
            if check.pass == known.contains(&(crit.id, check.name.as_str())) {
                surprises.push(format!("criterion {} / {}", crit.id, check.name));
            }
        }
        summary.insert(crit.id, pass);
    }
    let passed = summary.values().filter(|p| **p).count();
    println!("{passed}/{} criteria pass", summary.len());
    if !surprises.is_empty() {
        eprintln!("sub-checks deviating from the recorded outcome: {}", surprises.join(", "));
        std::process::exit(1);
    }
}

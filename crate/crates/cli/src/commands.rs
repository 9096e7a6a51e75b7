use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pqs_depth::criteria::{compare_criteria, MomentsInput};
use pqs_depth::curves::{zeta_table_for, CurveCache, ZetaSource};
use pqs_depth::pipeline::{analyze_run, generate_synthetic_run, read_run, sidecar_path, write_run, AnalysisConfig, GeneratorConfig};
use pqs_depth::{
    entanglement_depth, zeta_table, BoundCurve, CriterionConfig, CriterionData, CurveProvider, CurveSettings, DepthVerdict,
    SpinLabel, ZetaTable,
};
use serde_json::{json, Value};

use crate::output::{linspace, logspace, parse_grid, print_json, refuse_overwrite, say, write_to, UsageError};
use crate::{Cli, Command, CriterionOpts, GlobalOpts, ZetaChoice, ZetaOpts};

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::ZetaTable { j_max, half_integer, zeta_source, out } => {
            zeta_table_cmd(g, *j_max, *half_integer, *zeta_source, out.as_deref())
        }
        Command::BoundCurve { k, j, samples, out } => {
            if *k == 0 {
                return Err(UsageError("--k must be at least 1".into()).into());
            }
            let curve = provider(g).producibility_hull(*k, *j)?;
            emit_curve(g, &curve, *samples, out.as_deref())
        }
        Command::SmCurve { spin, samples, out } => {
            let curve = provider(g).sm_curve(*spin)?;
            emit_curve(g, &curve, *samples, out.as_deref())
        }
        Command::Depth { moments, criteria } => depth_cmd(g, moments, criteria),
        Command::Compare { k, j, alpha_grid, beta_grid, out } => {
            compare_cmd(g, *k, *j, alpha_grid, beta_grid.as_deref(), out.as_deref())
        }
        Command::Simulate { config, seed, shots, out } => simulate_cmd(g, config.as_deref(), *seed, *shots, out),
        Command::Analyze { records, criteria, bootstrap, min_shots, seed, out, csv_out } => {
            let config = AnalysisConfig {
                criteria: criterion_config(criteria),
                bootstrap_resamples: *bootstrap,
                min_shots: *min_shots,
                ridge: None,
                seed: *seed,
            };
            analyze_cmd(g, records, criteria, &config, out.as_deref(), csv_out.as_deref())
        }
    }
}

fn provider(g: &GlobalOpts) -> CurveProvider {
    let cache = g.cache_dir.clone().map(CurveCache::new).or_else(CurveCache::from_env);
    CurveProvider::new(CurveSettings::default(), cache)
}

fn zeta_table_cmd(g: &GlobalOpts, j_max: SpinLabel, half: bool, source: ZetaChoice, out: Option<&Path>) -> Result<()> {
    let table = match source {
        ZetaChoice::Computed => zeta_table(j_max, half, &CurveSettings::default())?,
        ZetaChoice::Published => {
            let mut t = ZetaTable::published();
            t.entries.retain(|&two_j, _| two_j <= j_max.two_j());
            t
        }
    };
    emit(g, out, |w| Ok(table.write_csv(w)?), || serde_json::to_value(&table).map_err(Into::into))
}

/// Writes CSV to `out` (or stdout), and JSON on stdout with `--json`.
fn emit(
    g: &GlobalOpts,
    out: Option<&Path>,
    csv: impl FnOnce(&mut dyn std::io::Write) -> Result<()>,
    json: impl FnOnce() -> Result<Value>,
) -> Result<()> {
    match (out, g.json) {
        (Some(p), json_flag) => {
            write_to(Some(p), g.force, csv)?;
            if json_flag {
                print_json(&json!({ "written": p, "data": json()? }))?;
            }
        }
        (None, true) => print_json(&json()?)?,
        (None, false) => write_to(None, false, csv)?,
    }
    Ok(())
}

fn emit_curve(g: &GlobalOpts, curve: &BoundCurve, samples: Option<usize>, out: Option<&Path>) -> Result<()> {
    if curve.metadata.unconverged_samples > 0 {
        eprintln!("warning: {} solver samples did not reach a fixed point", curve.metadata.unconverged_samples);
    }
    if out.is_some_and(|p| p.extension().is_some_and(|e| e == "json")) {
        write_to(out, g.force, |w| {
            w.write_all(curve.to_json()?.as_bytes())?;
            Ok(())
        })?;
        if g.json {
            print_json(curve)?;
        }
        return Ok(());
    }
    let shown = match samples {
        Some(0) | Some(1) => return Err(UsageError("--samples must be at least 2".into()).into()),
        Some(n) => {
            let points = linspace(0.0, 1.0, n).into_iter().map(|x| Ok((x, curve.eval(x)?))).collect::<Result<Vec<_>>>()?;
            BoundCurve { points, ..curve.clone() }
        }
        None => curve.clone(),
    };
    emit(g, out, |w| Ok(shown.write_csv(w)?), || serde_json::to_value(curve).map_err(Into::into))
}

fn criterion_config(c: &CriterionOpts) -> CriterionConfig {
    CriterionConfig { k_max: c.k_max, which: c.criterion.into(), tolerance: c.tolerance }
}

fn load_zeta(opts: &ZetaOpts, j: SpinLabel, k_max: u32) -> Result<ZetaTable> {
    if let Some(path) = &opts.zeta_table {
        return ZetaTable::load(path).with_context(|| format!("reading {}", path.display()));
    }
    Ok(match opts.zeta_source {
        ZetaChoice::Published => ZetaTable::published(),
        ZetaChoice::Computed => {
            let spins: Vec<SpinLabel> = (1..=k_max).map(|k| j.times(k)).collect();
            zeta_table_for(&spins, &CurveSettings::default())?
        }
    })
}

fn criterion_data(g: &GlobalOpts, opts: &CriterionOpts, j: SpinLabel) -> Result<CriterionData> {
    let config = criterion_config(opts);
    config.validate()?;
    let table = load_zeta(&opts.zeta, j, opts.k_max)?;
    if table.source == ZetaSource::Published {
        eprintln!("warning: published zeta values sit one row above the computed minima and can over-certify depth");
    }
    Ok(CriterionData::prepare(j, &config, Some(table), &provider(g))?)
}

fn read_moments(path: &Path) -> Result<(Vec<MomentsInput>, bool)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(pqs_depth::Error::from)
        .with_context(|| format!("{}: not valid JSON", path.display()))?;
    let list = value.is_array();
    let items = if list { value.as_array().cloned().unwrap_or_default() } else { vec![value] };
    let parsed = items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value::<MomentsInput>(v)
                .map_err(pqs_depth::Error::from)
                .with_context(|| format!("{}: entry {i}", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((parsed, list))
}

fn describe(v: &DepthVerdict) -> String {
    let mut s = format!("depth {} ({:?}), xi^2 {:.5}, polarization {:.4}", v.certified_depth, v.criterion_used, v.xi_parallel_sq, v.polarization);
    if let Some((lo, hi)) = v.depth_interval {
        s.push_str(&format!(", interval [{lo}, {hi}]"));
    }
    for f in &v.fraction_entangled {
        s.push_str(&format!(", f_{} {:.4}", f.k + 1, f.fraction));
    }
    s
}

fn depth_cmd(g: &GlobalOpts, path: &Path, opts: &CriterionOpts) -> Result<()> {
    let (inputs, list) = read_moments(path)?;
    let config = criterion_config(opts);
    let mut data: BTreeMap<u32, CriterionData> = BTreeMap::new();
    let mut verdicts = Vec::new();
    for input in &inputs {
        let spin = input.moments.spin;
        if !data.contains_key(&spin.two_j()) {
            data.insert(spin.two_j(), criterion_data(g, opts, spin)?);
        }
        verdicts.push(entanglement_depth(&input.moments, input.sigma_xi, &config, &data[&spin.two_j()])?);
    }
    if g.json {
        return if list { print_json(&verdicts) } else { print_json(&verdicts[0]) };
    }
    for v in &verdicts {
        say(&describe(v))?;
    }
    Ok(())
}

fn compare_cmd(g: &GlobalOpts, k: u32, j: SpinLabel, alpha: &str, beta: Option<&str>, out: Option<&Path>) -> Result<()> {
    if k == 0 {
        return Err(UsageError("--k must be at least 1".into()).into());
    }
    let (a0, a1, na) = parse_grid(alpha)?;
    let alphas = logspace(a0, a1, na)?;
    let betas = match beta {
        Some(spec) => {
            let (b0, b1, nb) = parse_grid(spec)?;
            linspace(b0, b1, nb)
        }
        None => (1..=50).map(|i| j.value() * f64::from(i) / 50.0).collect(),
    };
    let p = provider(g);
    let hull = p.producibility_hull(k, j)?;
    let sm = p.sm_curve(j.times(k))?;
    let grid = compare_criteria(k, j, &alphas, &betas, &hull, &sm)?;
    emit(g, out, |w| Ok(grid.write_csv(w)?), || serde_json::to_value(&grid).map_err(Into::into))
}

/// Overlays the keys of a JSON object on the calibrated defaults.
fn generator_config(path: Option<&Path>) -> Result<GeneratorConfig> {
    let base = GeneratorConfig::default();
    let Some(path) = path else {
        return Ok(base);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let overlay: Value = serde_json::from_str(&text).map_err(pqs_depth::Error::from).with_context(|| path.display().to_string())?;
    let Value::Object(fields) = overlay else {
        return Err(pqs_depth::Error::Schema(format!("{}: expected a JSON object", path.display())).into());
    };
    let mut merged = serde_json::to_value(&base)?;
    for (key, value) in fields {
        if merged.get(&key).is_none() {
            return Err(pqs_depth::Error::Schema(format!("{}: unknown field {key:?}", path.display())).into());
        }
        merged[&key] = value;
    }
    let config: GeneratorConfig = serde_json::from_value(merged)
        .map_err(pqs_depth::Error::from)
        .with_context(|| path.display().to_string())?;
    Ok(config)
}

fn simulate_cmd(g: &GlobalOpts, config: Option<&Path>, seed: Option<u64>, shots: Option<usize>, out: &Path) -> Result<()> {
    let mut cfg = generator_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = shots {
        cfg.shots_per_group = n;
        cfg.noise_shots_per_group = n;
    }
    refuse_overwrite(out, g.force)?;
    refuse_overwrite(&sidecar_path(out), g.force)?;
    let run = generate_synthetic_run(&cfg)?;
    write_run(&run, out).with_context(|| format!("writing {}", out.display()))?;
    let summary = json!({
        "records": out,
        "metadata": sidecar_path(out),
        "groups": run.metadata.groups.len(),
        "shots": run.records.len(),
        "seed": cfg.seed,
    });
    if g.json {
        print_json(&summary)?;
    } else {
        say(&format!("wrote {} shots in {} groups to {}", run.records.len(), run.metadata.groups.len(), out.display()))?;
    }
    Ok(())
}

fn records_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("run.csv")
    } else {
        p.to_path_buf()
    }
}

fn analyze_cmd(
    g: &GlobalOpts,
    records: &Path,
    opts: &CriterionOpts,
    config: &AnalysisConfig,
    out: Option<&Path>,
    csv_out: Option<&Path>,
) -> Result<()> {
    let path = records_path(records);
    let run = read_run(&path).with_context(|| format!("reading {}", path.display()))?;
    let data = criterion_data(g, opts, run.metadata.spin)?;
    let report = analyze_run(&run, config, &data)?;
    if let Some(p) = out {
        write_to(Some(p), g.force, |w| {
            w.write_all(report.to_json()?.as_bytes())?;
            Ok(())
        })?;
    }
    if let Some(p) = csv_out {
        write_to(Some(p), g.force, |w| Ok(report.write_csv(w)?))?;
    }
    if g.json {
        print_json(&report)?;
    } else if out.is_none() && csv_out.is_none() {
        write_to(None, false, |w| Ok(report.write_csv(w)?))?;
    } else if let Some(best) = report.best_group() {
        let depth = best.verdict.as_ref().map_or("n/a".to_string(), |v| v.certified_depth.to_string());
        say(&format!("best group N_L = {:.4e}: xi^2 {:.4} +- {:.4}, depth {depth}", best.photon_number, best.xi_sq, best.xi_sigma))?;
    }
    Ok(())
}

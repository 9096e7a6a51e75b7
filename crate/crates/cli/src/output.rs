use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// Bad invocation detected after argument parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Writes to `path`, or stdout when absent. Existing files need `force`.
pub fn write_to(path: Option<&Path>, force: bool, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            refuse_overwrite(p, force)?;
            let file = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

pub fn refuse_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(UsageError(format!("{} exists; pass --force to overwrite", path.display())).into());
    }
    Ok(())
}

pub fn print_json<T: serde::Serialize + ?Sized>(value: &T) -> Result<()> {
    say(&serde_json::to_string_pretty(value)?)
}

pub fn say(line: &str) -> Result<()> {
    writeln!(io::stdout().lock(), "{line}")?;
    Ok(())
}

/// Parses `start:stop:count`.
pub fn parse_grid(spec: &str) -> Result<(f64, f64, usize)> {
    let bad = || UsageError(format!("grid {spec:?} must look like start:stop:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad().into());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad().into());
    }
    Ok((a, b, n))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn logspace(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > 0.0) {
        return Err(UsageError("log-spaced grid needs positive bounds".into()).into());
    }
    Ok(linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect())
}

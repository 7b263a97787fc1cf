use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliResult;

/// Values of one swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep(pub Vec<f64>);

/// `0.01,0.02,0.05` or `start:stop:count` (inclusive, evenly spaced).
pub fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let values = match parts.as_slice() {
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|e| format!("{n:?}: {e}"))?;
            match n {
                0 => return Err("sweep count must be positive".into()),
                1 => vec![a],
                _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
            }
        }
        [_] => s.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(format!("expected a comma list or start:stop:count, got {s:?}")),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err("sweep values must be finite".into());
    }
    Ok(Sweep(values))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRanges {
    pub eps: Option<Vec<f64>>,
    pub l: Option<Vec<f64>>,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Command-line arguments without the program name and `--out`.
    pub args: Vec<String>,
    pub config: Option<PathBuf>,
    pub sweep: SweepRanges,
    pub output: PathBuf,
    pub seed: Option<u64>,
    pub version: String,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, config: Option<PathBuf>, sweep: SweepRanges, out: &Path) -> Self {
        Self {
            command: command.into(),
            args: strip_out(args),
            config,
            sweep,
            output: out.to_path_buf(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").into(),
            files: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn write(&self) -> CliResult<()> {
        write_json(&self.output, "manifest.json", self)
    }
}

fn strip_out(args: Vec<String>) -> Vec<String> {
    let mut kept = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
        } else if !a.starts_with("--out=") {
            kept.push(a);
        }
    }
    kept
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(name))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

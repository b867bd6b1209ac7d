use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use geophase::geometry::LoopShape;
use serde::{Deserialize, Serialize};

use crate::config::Method;

/// One line of a sweep store. Carries enough of the loop to be decomposed
/// without the original config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub method: Method,
    pub t_p: f64,
    pub phi_total: f64,
    pub d_total: f64,
    pub stderr_phi: Option<f64>,
    pub stderr_d: Option<f64>,
    pub solid_angle: f64,
    pub b_lab: [f64; 3],
    pub shape: LoopShape,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Appends records to a JSONL file, one write per line.
pub fn append(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).with_context(|| format!("opening {}", path.display()))?;
    for r in records {
        let mut line = serde_json::to_string(r)?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Vec<RunRecord>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

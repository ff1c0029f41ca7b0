//! Sweep result files.
//!
//! ```text
//! param,rmse_deg,trials,fill_count
//! # fingerprint=3f9a0c1d2b4e5f60 seed=7
//! -10,0.8312,1000,12
//! ```
//!
//! Floats use the shortest decimal form that reads back to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{SweepPoint, SweepResult};

pub const RESULTS_HEADER: &str = "param,rmse_deg,trials,fill_count";

pub fn format_results(result: &SweepResult) -> String {
    let mut out = format!(
        "{RESULTS_HEADER}\n# fingerprint={} seed={}\n",
        result.fingerprint, result.seed
    );
    for p in &result.points {
        writeln!(
            out,
            "{},{},{},{}",
            p.param, p.rmse_deg, p.trials, p.fill_count
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn parse_results(text: &str) -> Result<SweepResult> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, msg: String| Error::Results(format!("line {}: {msg}", line + 1));
    match lines.next() {
        Some((_, h)) if h.trim() == RESULTS_HEADER => {}
        _ => return Err(bad(0, format!("expected header `{RESULTS_HEADER}`"))),
    }
    let mut fingerprint = None;
    let mut seed = None;
    let mut points = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for field in comment.split_whitespace() {
                if let Some(v) = field.strip_prefix("fingerprint=") {
                    fingerprint = Some(v.to_string());
                } else if let Some(v) = field.strip_prefix("seed=") {
                    seed = Some(v.parse().map_err(|_| bad(i, format!("bad seed `{v}`")))?);
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad(i, format!("expected 4 columns, got {}", cols.len())));
        }
        let float = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(i, format!("bad number `{s}`")))
        };
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| bad(i, format!("bad count `{s}`")))
        };
        points.push(SweepPoint {
            param: float(cols[0])?,
            rmse_deg: float(cols[1])?,
            trials: int(cols[2])?,
            fill_count: int(cols[3])?,
        });
    }
    Ok(SweepResult {
        fingerprint: fingerprint.ok_or_else(|| bad(1, "missing fingerprint comment".into()))?,
        seed: seed.ok_or_else(|| bad(1, "missing seed in comment".into()))?,
        points,
    })
}

pub fn write_results(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, format_results(result)).map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results(&text)
}

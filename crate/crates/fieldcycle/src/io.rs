//! Output formatting and parameter scans.
//!
//! JSON documents are written with every floating-point number in
//! [`fmt_num`] form (17 significant digits), so re-parsing reproduces the
//! in-memory values bit for bit. Non-finite numbers become `null`.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::params::{fmt_num, ModelParams, KEYS};
use crate::phase::{self, Phase, PhaseSolution};

/// Serializes `value` as pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_num(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(item, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Range of one parameter: `n` evenly spaced values from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub key: String,
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl GridSpec {
    /// Parses `key=start:stop:n`, or `key=value` for a single point.
    pub fn parse(text: &str) -> Result<Self> {
        let (key, range) = text
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("grid {text:?}: expected key=start:stop:n")))?;
        let key = key.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse(format!("unknown parameter key {key:?}")));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("grid {text:?}: bad number {s:?}")))
        };
        let parts: Vec<&str> = range.split(':').collect();
        let spec = match parts.as_slice() {
            [v] => Self {
                key,
                start: num(v)?,
                stop: num(v)?,
                n: 1,
            },
            [a, b, n] => Self {
                key,
                start: num(a)?,
                stop: num(b)?,
                n: n.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("grid {text:?}: bad count {n:?}")))?,
            },
            _ => {
                return Err(Error::Parse(format!(
                    "grid {text:?}: expected key=start:stop:n"
                )))
            }
        };
        if spec.n == 0 {
            return Err(Error::Parse("grid needs at least one point".into()));
        }
        Ok(spec)
    }

    /// Grid values in declared order.
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.start + step * i as f64).collect()
    }
}

/// One row of a phase scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub params: ModelParams,
    /// `None` when the phase could not be solved at this grid point.
    pub solution: Option<PhaseSolution>,
    pub error: Option<String>,
}

impl ScanRow {
    pub fn feasible(&self) -> bool {
        self.solution.as_ref().is_some_and(|s| s.feasible)
    }
}

/// Solves `phase` at every grid point. Parameter combinations that fail
/// validation or have no solution produce infeasible rows.
pub fn phase_scan(base: &ModelParams, grid: &GridSpec, phase: Phase) -> Result<Vec<ScanRow>> {
    use rayon::prelude::*;
    let mut points = Vec::with_capacity(grid.n);
    for v in grid.values() {
        let mut p = *base;
        p.set(&grid.key, &fmt_num(v))?;
        points.push(p);
    }
    Ok(points
        .into_par_iter()
        .map(|p| {
            let result = p.validate().and_then(|_| phase::solve(&p, phase));
            match result {
                Ok(s) => ScanRow {
                    params: p,
                    solution: Some(s),
                    error: None,
                },
                Err(e) => ScanRow {
                    params: p,
                    solution: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Column names of the phase-scan CSV.
pub fn scan_header() -> Vec<String> {
    let tail = [
        "gamma_eta",
        "Gamma1",
        "Gamma2",
        "Gamma3",
        "C1",
        "K1p",
        "A1",
        "m",
        "avgA",
        "avgC",
        "avgK",
        "avgY",
        "feasible",
        "stable",
    ];
    KEYS.iter()
        .copied()
        .chain(tail)
        .map(str::to_string)
        .collect()
}

/// CSV fields of one scan row.
pub fn scan_record(row: &ScanRow) -> Result<Vec<String>> {
    let mut rec = Vec::with_capacity(KEYS.len() + 14);
    for key in KEYS {
        rec.push(row.params.get_text(key)?);
    }
    match &row.solution {
        Some(s) => {
            for v in [
                s.gamma_eta,
                s.Gamma[0],
                s.Gamma[1],
                s.Gamma[2],
                s.shifts.C1,
                s.shifts.K1p,
                s.shifts.A1,
                s.mass,
                s.averages.A,
                s.averages.C,
                s.averages.K,
                s.averages.Y,
            ] {
                rec.push(fmt_num(v));
            }
            rec.push(s.feasible.to_string());
            rec.push(s.stable.to_string());
        }
        None => {
            rec.extend(std::iter::repeat_n("NaN".to_string(), 12));
            rec.push("false".into());
            rec.push("false".into());
        }
    }
    Ok(rec)
}

/// Writes a scan as CSV in grid order.
pub fn write_scan_csv<W: std::io::Write>(rows: &[ScanRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(scan_header())?;
    for row in rows {
        w.write_record(scan_record(row)?)?;
    }
    w.flush()?;
    Ok(())
}

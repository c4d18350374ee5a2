//! CSV output with a `#` provenance header, and segment CSV input.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use twodelay::{AgeDistribution, HistorySegment, Trajectory};

use crate::config::InputError;

/// 17 significant digits, which round-trips every `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Table {
    out: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(command: &str, resolved: &impl Serialize, columns: &[&str]) -> anyhow::Result<Self> {
        let json = serde_json::to_string(resolved)?;
        let preamble = format!(
            "# twodelay {} {command}\n# config: {json}\n",
            env!("CARGO_PKG_VERSION")
        );
        let mut out = csv::Writer::from_writer(preamble.into_bytes());
        out.write_record(columns)?;
        Ok(Self { out })
    }

    pub fn row(&mut self, fields: &[String]) -> anyhow::Result<()> {
        Ok(self.out.write_record(fields)?)
    }

    /// Write to a sibling temporary file, then rename over `path`.
    pub fn save(self, path: &Path) -> anyhow::Result<()> {
        let bytes = self
            .out
            .into_inner()
            .map_err(|e| anyhow::anyhow!("{}", e.error()))?;
        let name = path
            .file_name()
            .with_context(|| format!("{} is not a file path", path.display()))?;
        let mut tmp_name = std::ffi::OsString::from(".");
        tmp_name.push(name);
        tmp_name.push(format!(".tmp{}", std::process::id()));
        let tmp = path.with_file_name(tmp_name);
        let result = (|| -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result.with_context(|| format!("writing {}", path.display()))
    }
}

pub fn trajectory_table(
    command: &str,
    resolved: &impl Serialize,
    tr: &Trajectory,
) -> anyhow::Result<Table> {
    let mut t = Table::new(command, resolved, &["t", "u", "H", "F"])?;
    for s in &tr.samples {
        t.row(&[num(s.t), num(s.u), opt(s.h), opt(s.first_integral)])?;
    }
    Ok(t)
}

pub fn segment_table(
    command: &str,
    resolved: &impl Serialize,
    seg: &HistorySegment,
) -> anyhow::Result<Table> {
    let (left, right) = seg.node_slopes();
    let mut t = Table::new(command, resolved, &["t", "u", "du_left", "du_right"])?;
    for (k, &v) in seg.values.iter().enumerate() {
        t.row(&[num(seg.time(k)), num(v), num(left[k]), num(right[k])])?;
    }
    Ok(t)
}

/// Numeric rows of a CSV with `#` comments and a header starting with `first`.
fn read_rows(path: &Path, first: &str) -> Result<Vec<Vec<f64>>, InputError> {
    let at = |e: csv::Error| {
        let line = e.position().map(|p| p.line() as usize);
        InputError::new(path, line, e.to_string())
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(at)?;
    if rdr.headers().map_err(at)?.get(0) != Some(first) {
        return Err(InputError::new(
            path,
            None,
            format!("expected a header starting with `{first}`"),
        ));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(at)?;
        let line = record.position().map(|p| p.line() as usize);
        let row = record
            .iter()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| InputError::new(path, line, e.to_string()))?;
        rows.push(row);
    }
    if rows.len() < 5 {
        return Err(InputError::new(path, None, "need at least 5 data rows"));
    }
    Ok(rows)
}

fn uniform_step(path: &Path, xs: &[f64]) -> Result<f64, InputError> {
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    for (i, w) in xs.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1e-300) {
            return Err(InputError::new(
                path,
                None,
                format!("row {} breaks the uniform step {h}", i + 2),
            ));
        }
    }
    Ok(h)
}

/// Segment CSV: `t,u` and optionally `du_left,du_right`, with `t` ending at 0.
pub fn read_segment(path: &Path) -> Result<HistorySegment, InputError> {
    let rows = read_rows(path, "t")?;
    if rows[0].len() != 2 && rows[0].len() != 4 {
        return Err(InputError::new(
            path,
            None,
            "expected columns t,u[,du_left,du_right]",
        ));
    }
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let t = col(0);
    let h = uniform_step(path, &t)?;
    if t[t.len() - 1].abs() > 1e-9 * h {
        return Err(InputError::new(path, None, "last sample must be at t = 0"));
    }
    let seg =
        HistorySegment::new(h, col(1)).map_err(|e| InputError::new(path, None, e.to_string()))?;
    if rows[0].len() == 4 {
        seg.with_slopes(col(2), col(3))
            .map_err(|e| InputError::new(path, None, e.to_string()))
    } else {
        Ok(seg)
    }
}

/// Age-profile CSV: `a,g` with `a` running from 0 to `tau`.
pub fn read_age(path: &Path) -> Result<AgeDistribution, InputError> {
    let rows = read_rows(path, "a")?;
    if rows[0].len() != 2 {
        return Err(InputError::new(path, None, "expected columns a,g"));
    }
    let a: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    if a[0].abs() > 1e-12 {
        return Err(InputError::new(path, None, "first age must be 0"));
    }
    let h = uniform_step(path, &a)?;
    AgeDistribution::new(h, rows.iter().map(|r| r[1]).collect())
        .map_err(|e| InputError::new(path, None, e.to_string()))
}

/// Render `rows` of `(label, value)` as aligned text.
pub fn aligned(rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}

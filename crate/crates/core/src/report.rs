//! Writing and reading study reports.
//!
//! A report directory holds `rows.csv` (one line per replication and point),
//! `summary.json` (summaries and run metadata) and, for coverage studies,
//! `plot.csv` with `t, theta_hat, lo, hi, truth` for the first replication.
//! The layout of `summary.json` is documented in `docs/report_schema.md`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimator::Sample;
use crate::study::{Metadata, PlotRow, Row, StudyKind, StudyReport, Summary};

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "plot.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub kind: StudyKind,
    pub summary: Summary,
    pub metadata: Metadata,
}

pub fn write_rows<W: Write>(rows: &[Row], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(["rep", "n", "h", "t", "theta_hat", "truth", "covered", "halfwidth"])?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<Row>> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<Row>, _>>()?;
    Ok(rows)
}

pub fn write_plot<W: Write>(plot: &[PlotRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in plot {
        out.serialize(p)?;
    }
    out.flush()?;
    Ok(())
}

pub fn summary_document(r: &StudyReport) -> SummaryDocument {
    SummaryDocument { kind: r.kind, summary: r.summary.clone(), metadata: r.metadata.clone() }
}

/// Writes the report files into `dir`, creating it if needed, and returns their paths.
pub fn emit_report(r: &StudyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let rows = dir.join(ROWS_FILE);
    write_rows(&r.rows, fs::File::create(&rows)?)?;
    paths.push(rows);
    let summary = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary_document(r))?;
    fs::write(&summary, text + "\n")?;
    paths.push(summary);
    if !r.plot.is_empty() {
        let plot = dir.join(PLOT_FILE);
        write_plot(&r.plot, fs::File::create(&plot)?)?;
        paths.push(plot);
    }
    Ok(paths)
}

pub fn load_report(dir: &Path) -> Result<(Vec<Row>, SummaryDocument)> {
    let rows = read_rows(fs::File::open(dir.join(ROWS_FILE))?)?;
    let text = fs::read_to_string(dir.join(SUMMARY_FILE))?;
    let value: Value = serde_json::from_str(&text)?;
    check_summary_schema(&value)?;
    Ok((rows, serde_json::from_value(value)?))
}

/// Reads a one-column sample: one value per line, blank lines and `#` comments
/// ignored, an optional non-numeric header on the first line.
pub fn read_sample<R: Read>(mut r: R) -> Result<Sample> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut y = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split('#').next().unwrap_or("").trim();
        let field = field.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => y.push(v),
            Err(_) if y.is_empty() && i == 0 => {}
            Err(_) => return Err(Error::InvalidSample(format!("line {}: cannot parse {field:?}", i + 1))),
        }
    }
    Sample::new(y)
}

pub fn write_sample<W: Write>(s: &Sample, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["y"])?;
    for v in s.y() {
        out.write_record([v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

fn require<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::InvalidConfig(format!("summary is missing {path}.{key}")))
}

fn expect(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("summary field {what} has the wrong type")))
    }
}

fn number_or_null(v: &Value) -> bool {
    v.is_number() || v.is_null()
}

/// Structural check of a `summary.json` value against the documented schema.
pub fn check_summary_schema(v: &Value) -> Result<()> {
    let kind = require(v, "kind", "$")?;
    expect(
        matches!(kind.as_str(), Some("coverage" | "rate" | "efficiency" | "bias")),
        "kind",
    )?;
    let s = require(v, "summary", "$")?;
    let groups = require(s, "groups", "summary")?;
    expect(groups.is_array(), "summary.groups")?;
    for g in groups.as_array().into_iter().flatten() {
        for key in ["n", "reps"] {
            expect(require(g, key, "group")?.is_u64(), key)?;
        }
        for key in ["h", "t", "truth", "mean_bias", "rmse", "scaled_variance", "scaled_sd"] {
            expect(number_or_null(require(g, key, "group")?), key)?;
        }
    }
    for key in ["coverage", "coverage_se", "slope", "bound", "efficiency_ratio"] {
        expect(number_or_null(require(s, key, "summary")?), key)?;
    }
    let m = require(v, "metadata", "$")?;
    expect(require(m, "config", "metadata")?.is_object(), "metadata.config")?;
    expect(require(m, "version", "metadata")?.is_string(), "metadata.version")?;
    expect(require(m, "threads", "metadata")?.is_u64(), "metadata.threads")?;
    expect(require(m, "elapsed_secs", "metadata")?.is_number(), "metadata.elapsed_secs")?;
    expect(require(m, "notes", "metadata")?.is_array(), "metadata.notes")?;
    Ok(())
}

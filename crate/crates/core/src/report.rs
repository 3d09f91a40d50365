//! Run reports: a results CSV, a JSON summary and long-format plot data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 9] = ["experiment", "row", "series", "replica", "param", "x", "value", "std_error", "status"];
pub const PLOT_HEADER: [&str; 5] = ["experiment", "series", "x", "y", "y_err"];

/// Seventeen significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub row: usize,
    pub series: String,
    pub replica: Option<u64>,
    pub param: String,
    pub x: Option<f64>,
    pub value: f64,
    pub std_error: Option<f64>,
    pub status: String,
}

impl ResultRow {
    fn record(&self) -> [String; 9] {
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        [
            self.experiment.clone(),
            self.row.to_string(),
            self.series.clone(),
            self.replica.map(|r| r.to_string()).unwrap_or_default(),
            self.param.clone(),
            opt(self.x),
            format_float(self.value),
            opt(self.std_error),
            self.status.clone(),
        ]
    }
}

/// Accumulates rows of one experiment, numbering them in insertion order.
#[derive(Debug, Clone)]
pub struct RowSink {
    experiment: String,
    rows: Vec<ResultRow>,
}

impl RowSink {
    pub fn new(experiment: &str) -> Self {
        Self { experiment: experiment.to_string(), rows: Vec::new() }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        series: &str,
        replica: Option<u64>,
        param: &str,
        x: Option<f64>,
        value: f64,
        std_error: Option<f64>,
        status: &str,
    ) {
        let row = self.rows.len();
        self.rows.push(ResultRow {
            experiment: self.experiment.clone(),
            row,
            series: series.to_string(),
            replica,
            param: param.to_string(),
            x,
            value,
            std_error,
            status: status.to_string(),
        });
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<ResultRow> {
        self.rows
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_file(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_results(BufWriter::new(File::create(path)?), rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub wall_clock_seconds: f64,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

pub fn write_summary_file(path: &Path, summary: &Summary) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, summary)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Converts a results CSV into tidy `(experiment, series, x, y, y_err)` rows.
/// The series label joins `series` and `param`; rows without `x` use the
/// row number.
pub fn emit_plotdata(results: &Path, out: &Path) -> Result<usize> {
    if !results.exists() {
        return Err(Error::Config(format!("report {} does not exist", results.display())));
    }
    let mut rd = csv::ReaderBuilder::new().from_path(results)?;
    let header = rd.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::Config(format!("{} is not a results report", results.display())));
    }
    let mut w = writer(BufWriter::new(File::create(out)?));
    w.write_record(PLOT_HEADER)?;
    let mut n = 0;
    for rec in rd.records() {
        let rec = rec?;
        let (experiment, row, series, param, x, value, se) = (&rec[0], &rec[1], &rec[2], &rec[4], &rec[5], &rec[6], &rec[7]);
        let label = if param.is_empty() { series.to_string() } else { format!("{series}[{param}]") };
        let x = if x.is_empty() { row } else { x };
        w.write_record([experiment, label.as_str(), x, value, se])?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(format_float(1.0 / 6.0), "1.6666666666666666e-1");
        assert_eq!(format_float(0.0), "0.0000000000000000e0");
        let s = format_float(std::f64::consts::PI);
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn csv_layout() {
        let mut sink = RowSink::new("z-series");
        sink.push("z", None, "kappa=0.5", None, 1.0 / 6.0, Some(1e-12), "finite");
        sink.push("z", Some(3), "", Some(2.0), -1.5, None, "ok");
        let mut buf = Vec::new();
        write_results(&mut buf, sink.rows()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines[0], RESULTS_HEADER.join(","));
        assert_eq!(lines[1], "z-series,0,z,,kappa=0.5,,1.6666666666666666e-1,9.9999999999999998e-13,finite");
        assert_eq!(lines[2], "z-series,1,z,3,,2.0000000000000000e0,-1.5000000000000000e0,,ok");
        assert!(!text.contains('\r'));
    }

    #[test]
    fn plotdata() {
        let dir = tempfile::tempdir().unwrap();
        let res = dir.path().join("r.csv");
        let out = dir.path().join("p.csv");
        write_results_file(&res, &[]).unwrap();
        assert_eq!(emit_plotdata(&res, &out).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&out).unwrap(), "experiment,series,x,y,y_err\n");
        let mut sink = RowSink::new("conv-bound");
        sink.push("max_slack", None, "delta=0.1", Some(10.0), 0.5, None, "ok");
        sink.push("max_slack", None, "delta=0.1", Some(100.0), 0.4, None, "ok");
        write_results_file(&res, sink.rows()).unwrap();
        assert_eq!(emit_plotdata(&res, &out).unwrap(), 2);
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.contains("conv-bound,max_slack[delta=0.1],1.0000000000000000e1,5.0000000000000000e-1,\n"));
        assert!(emit_plotdata(&dir.path().join("missing.csv"), &out).is_err());
    }
}

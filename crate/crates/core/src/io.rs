//! CSV ingestion and report/trace emission.
//!
//! Returns files: header `date,<asset>,...`, one row per period with an
//! ISO-8601 date and decimal simple returns (0.01 = 1%). Factor files:
//! `date,MKT,SMB,HML,RMW,CMA,RF` with strictly increasing dates. Matrices are
//! headerless square CSVs.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::backtest::{AccumulationMode, ReturnsPanel, StrategyReturns};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{BacktestReport, FactorPanel, ReportRow};
use crate::solver::SolverTrace;

pub const REPORT_HEADER: [&str; 7] = ["strategy", "MR", "SR", "IR", "alpha", "pvalue", "MDD"];
pub const TRACE_HEADER: [&str; 4] = ["iter", "objective", "gap", "log10_obj_decrease"];
const FACTOR_COLUMNS: [&str; 6] = ["MKT", "SMB", "HML", "RMW", "CMA", "RF"];

fn invalid(path: &Path, message: impl Into<String>) -> Error {
    Error::Validation {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => io_err(path, source),
            _ => unreachable!(),
        }
    } else {
        invalid(path, e.to_string())
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| io_err(path, e))
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(open(path)?))
}

fn parse_number(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| {
        invalid(
            path,
            format!("line {line}, column {column}: {cell:?} is not a number"),
        )
    })?;
    if !v.is_finite() {
        return Err(invalid(
            path,
            format!("line {line}, column {column}: {cell:?} is not finite"),
        ));
    }
    Ok(v)
}

fn parse_date(path: &Path, line: u64, cell: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(cell, "%Y-%m-%d").map_err(|_| {
        invalid(
            path,
            format!("line {line}: {cell:?} is not an ISO-8601 date (YYYY-MM-DD)"),
        )
    })
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

pub fn load_returns_csv(path: impl AsRef<Path>) -> Result<ReturnsPanel> {
    let path = path.as_ref();
    let mut rdr = reader(path, true)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.get(0) != Some("date") {
        return Err(invalid(path, "first header must be \"date\""));
    }
    let assets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if assets.is_empty() {
        return Err(invalid(path, "no asset columns"));
    }

    let mut dates = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = line_of(&record);
        let date = parse_date(path, line, &record[0])?;
        if !seen.insert(date) {
            return Err(invalid(path, format!("line {line}: duplicate date {date}")));
        }
        let mut row = Vec::with_capacity(assets.len());
        for (cell, asset) in record.iter().skip(1).zip(&assets) {
            let v = parse_number(path, line, asset, cell)?;
            if v <= -1.0 {
                return Err(invalid(
                    path,
                    format!("line {line}, column {asset}: return {v} is not above -1"),
                ));
            }
            row.push(v);
        }
        dates.push(record[0].to_string());
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(invalid(path, "no data rows"));
    }
    ReturnsPanel::new(dates, assets, rows).map_err(|e| invalid(path, e.to_string()))
}

/// Contents of a factor file, before alignment with a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorData {
    pub dates: Vec<String>,
    /// `MKT, SMB, HML, RMW, CMA, RF` per row.
    pub rows: Vec<[f64; 6]>,
}

impl FactorData {
    /// Block-merges the factor rows the same way returns are accumulated.
    pub fn accumulate(&self, k: usize, mode: AccumulationMode) -> Result<FactorData> {
        if k == 0 {
            return Err(Error::config("accumulation block size must be at least 1"));
        }
        let blocks = self.rows.len() / k;
        let mut dates = Vec::with_capacity(blocks);
        let mut rows = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let block = &self.rows[b * k..(b + 1) * k];
            let mut out = [0.0; 6];
            for (c, slot) in out.iter_mut().enumerate() {
                *slot = match mode {
                    AccumulationMode::Compound => {
                        block.iter().map(|r| 1.0 + r[c]).product::<f64>() - 1.0
                    }
                    AccumulationMode::Sum => block.iter().map(|r| r[c]).sum(),
                };
            }
            rows.push(out);
            dates.push(self.dates[(b + 1) * k - 1].clone());
        }
        Ok(FactorData { dates, rows })
    }

    /// Joins on date with a strategy's return dates and attaches the
    /// simple-factor returns `r_sf` (same dates).
    pub fn align(&self, dates: &[String], r_sf: &[f64]) -> Result<FactorPanel> {
        if dates.len() != r_sf.len() {
            return Err(Error::dim(format!(
                "{} dates vs {} simple-factor returns",
                dates.len(),
                r_sf.len()
            )));
        }
        let index: HashMap<&str, usize> = self
            .dates
            .iter()
            .enumerate()
            .map(|(i, d)| (d.as_str(), i))
            .collect();
        let mut panel = FactorPanel {
            dates: dates.to_vec(),
            r_sf: r_sf.to_vec(),
            mkt: Vec::new(),
            smb: Vec::new(),
            hml: Vec::new(),
            rmw: Vec::new(),
            cma: Vec::new(),
            rf: Vec::new(),
        };
        for d in dates {
            let i = *index.get(d.as_str()).ok_or_else(|| {
                Error::dim(format!("factor data has no row for trading date {d}"))
            })?;
            let r = &self.rows[i];
            panel.mkt.push(r[0]);
            panel.smb.push(r[1]);
            panel.hml.push(r[2]);
            panel.rmw.push(r[3]);
            panel.cma.push(r[4]);
            panel.rf.push(r[5]);
        }
        Ok(panel)
    }
}

pub fn load_factors_csv(path: impl AsRef<Path>) -> Result<FactorData> {
    let path = path.as_ref();
    let mut rdr = reader(path, true)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.get(0) != Some("date") {
        return Err(invalid(path, "first header must be \"date\""));
    }
    let mut positions = [0usize; 6];
    for (slot, name) in positions.iter_mut().zip(FACTOR_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| invalid(path, format!("missing required column {name}")))?;
    }

    let mut dates = Vec::new();
    let mut rows = Vec::new();
    let mut last: Option<NaiveDate> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = line_of(&record);
        let date = parse_date(path, line, &record[0])?;
        if let Some(prev) = last {
            if date <= prev {
                return Err(invalid(
                    path,
                    format!("line {line}: dates must be strictly increasing ({date} after {prev})"),
                ));
            }
        }
        last = Some(date);
        let mut row = [0.0; 6];
        for ((slot, &pos), name) in row.iter_mut().zip(&positions).zip(FACTOR_COLUMNS) {
            *slot = parse_number(path, line, name, &record[pos])?;
        }
        dates.push(record[0].to_string());
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(invalid(path, "no data rows"));
    }
    Ok(FactorData { dates, rows })
}

/// Headerless square matrix.
pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let mut rdr = reader(path, false)?;
    let mut values = Vec::new();
    let mut n_rows = 0;
    let mut n_cols = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = line_of(&record);
        n_cols = record.len();
        for (j, cell) in record.iter().enumerate() {
            values.push(parse_number(path, line, &(j + 1).to_string(), cell)?);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(invalid(path, "empty matrix"));
    }
    if n_rows != n_cols {
        return Err(invalid(
            path,
            format!("matrix must be square, got {n_rows}x{n_cols}"),
        ));
    }
    Ok(Matrix::from_row_slice(n_rows, n_cols, &values))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file))
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> Result<()> {
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes rows of already-formatted cells.
pub fn write_table<S: AsRef<str>>(
    path: impl AsRef<Path>,
    header: &[&str],
    rows: &[Vec<S>],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|c| c.as_ref()))
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_exact(x: f64) -> String {
    format!("{x}")
}

pub fn format_metric(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_exact(m[(i, j)])).collect();
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// `date,return` for one strategy; `date,<label>,...` for several that share
/// the same dates.
pub fn write_returns_csv(path: impl AsRef<Path>, series: &[StrategyReturns]) -> Result<()> {
    let path = path.as_ref();
    let first = series
        .first()
        .ok_or_else(|| Error::config("no strategy returns to write"))?;
    if series.iter().any(|s| s.dates != first.dates) {
        return Err(Error::dim("strategy return series have different dates"));
    }
    let mut header = vec!["date".to_string()];
    if series.len() == 1 {
        header.push("return".into());
    } else {
        header.extend(series.iter().map(|s| s.strategy.clone()));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = first
        .dates
        .iter()
        .enumerate()
        .map(|(t, d)| {
            std::iter::once(d.clone())
                .chain(series.iter().map(|s| format_exact(s.values[t])))
                .collect()
        })
        .collect();
    write_table(path, &header, &rows)
}

fn opt_metric(x: Option<f64>) -> String {
    x.map(format_metric).unwrap_or_default()
}

pub fn write_report(path: impl AsRef<Path>, report: &BacktestReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.strategy.clone(),
                format_metric(r.mean_return),
                opt_metric(r.sharpe),
                opt_metric(r.information_ratio),
                opt_metric(r.alpha),
                opt_metric(r.pvalue),
                format_metric(r.max_drawdown),
            ]
        })
        .collect();
    write_table(path, &REPORT_HEADER, &rows)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<BacktestReport> {
    let path = path.as_ref();
    let mut rdr = reader(path, true)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().ne(REPORT_HEADER) {
        return Err(invalid(
            path,
            format!("unexpected report header {headers:?}"),
        ));
    }
    let mut out = BacktestReport::default();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = line_of(&record);
        let num = |i: usize| parse_number(path, line, REPORT_HEADER[i], &record[i]);
        let opt = |i: usize| -> Result<Option<f64>> {
            if record[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        out.rows.push(ReportRow {
            strategy: record[0].to_string(),
            mean_return: num(1)?,
            sharpe: opt(2)?,
            information_ratio: opt(3)?,
            alpha: opt(4)?,
            pvalue: opt(5)?,
            max_drawdown: num(6)?,
        });
    }
    Ok(out)
}

/// One row per iteration: `iter, objective, gap, log10_obj_decrease`. The
/// last column is empty where the next objective is not strictly lower.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &SolverTrace) -> Result<()> {
    let rows: Vec<Vec<String>> = trace
        .records
        .iter()
        .zip(trace.log10_decreases())
        .map(|(r, d)| {
            vec![
                r.k.to_string(),
                format_exact(r.objective),
                format_exact(r.gap),
                d.map(format_exact).unwrap_or_default(),
            ]
        })
        .collect();
    write_table(path, &TRACE_HEADER, &rows)
}

pub fn ensure_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))?;
    Ok(path.to_path_buf())
}

//! Panel CSV ingestion and plain-text output.
//!
//! Panels are wide: a header `unit,t1,...,tT` and one row per unit. The
//! treated unit is the first data row unless named explicitly. Covariate files
//! use the header `unit,<name>,...` and may list units in any order.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel::{Covariates, Panel};

fn parse_err(path: &str, line: u64, column: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: message.into(),
    }
}

struct Table {
    header: Vec<String>,
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

fn read_table(source: &str, path: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(source.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_err(path, e))?,
        None => return Err(parse_err(path, 1, 1, "file is empty")),
    };
    let header: Vec<String> = header.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("unit") {
        return Err(parse_err(path, 1, 1, "first header column must be `unit`"));
    }
    if header.len() < 2 {
        return Err(parse_err(path, 1, 2, "header has no value columns"));
    }
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                record.len().min(header.len()) as u64 + 1,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let label = record[0].to_string();
        if label.is_empty() {
            return Err(parse_err(path, line, 1, "empty unit id"));
        }
        if labels.contains(&label) {
            return Err(parse_err(path, line, 1, format!("duplicate unit id `{label}`")));
        }
        let mut row = Vec::with_capacity(header.len() - 1);
        for (c, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, c as u64 + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, c as u64 + 1, format!("`{field}` is not finite")));
            }
            row.push(v);
        }
        labels.push(label);
        values.push(row);
    }
    Ok(Table { header, labels, values })
}

fn csv_err(path: &str, e: csv::Error) -> Error {
    let (line, column) = match e.position() {
        Some(p) => (p.line(), 1),
        None => (0, 0),
    };
    parse_err(path, line, column, e.to_string())
}

/// Period label from a header cell such as `t12` or `12`.
fn period_label(cell: &str) -> Option<i64> {
    cell.strip_prefix('t').unwrap_or(cell).parse().ok()
}

/// Parses a wide panel. `treated` moves the unit with that id to the front.
pub fn parse_panel_csv(source: &str, path: &str, t0: usize, treated: Option<&str>) -> Result<Panel> {
    let table = read_table(source, path)?;
    let periods: Vec<i64> = table.header[1..]
        .iter()
        .enumerate()
        .map(|(c, h)| {
            period_label(h).ok_or_else(|| parse_err(path, 1, c as u64 + 2, format!("bad period header `{h}`")))
        })
        .collect::<Result<_>>()?;
    if table.labels.len() < 2 {
        return Err(parse_err(path, 2, 1, "panel needs a treated unit and at least one donor"));
    }
    let mut order: Vec<usize> = (0..table.labels.len()).collect();
    if let Some(id) = treated {
        let pos = table
            .labels
            .iter()
            .position(|l| l == id)
            .ok_or_else(|| Error::invalid(format!("treated unit `{id}` not found in {path}")))?;
        order.remove(pos);
        order.insert(0, pos);
    }
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| table.values[i].clone()).collect();
    let labels: Vec<String> = order.iter().map(|&i| table.labels[i].clone()).collect();
    Panel::new(rows, t0)?
        .with_unit_labels(labels)?
        .with_period_labels(periods)
}

pub fn read_panel_csv(path: &Path, t0: usize, treated: Option<&str>) -> Result<Panel> {
    let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_panel_csv(&source, &path.display().to_string(), t0, treated)
}

/// Parses covariates and aligns their rows with `panel`'s unit order.
pub fn parse_covariates_csv(source: &str, path: &str, panel: &Panel) -> Result<Covariates> {
    let table = read_table(source, path)?;
    let m = table.header.len() - 1;
    let mut values = DMatrix::zeros(panel.n_units(), m);
    for (r, label) in panel.unit_labels().iter().enumerate() {
        let i = table
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::invalid(format!("{path}: no covariates for unit `{label}`")))?;
        for c in 0..m {
            values[(r, c)] = table.values[i][c];
        }
    }
    Ok(Covariates::new(values).with_labels(table.header[1..].to_vec()))
}

pub fn read_covariates_csv(path: &Path, panel: &Panel) -> Result<Covariates> {
    let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_covariates_csv(&source, &path.display().to_string(), panel)
}

/// Writes a header and rows as LF-terminated CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

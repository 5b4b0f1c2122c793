//! CSV tables.
//!
//! * datasets: `dataset_id,obs_id,x0,..,x{D-1}`, one row per observation,
//!   rows of a dataset contiguous, every dataset with the same `K`
//! * parameters: `dataset_id,theta0,..,theta{P-1}`
//! * plain matrices (summaries): `{prefix}0,..,{prefix}{S-1}`
//!
//! Numbers are written in Rust's shortest round-trip form, so a table read
//! back reproduces the exact `f64` values.

use std::fmt::Write as _;
use std::path::Path;

use mspec_core::data::DatasetBatch;
use mspec_core::ndcompute::Array;

use crate::error::{CliError, CliResult};

fn header(prefix: &str, n: usize) -> String {
    (0..n).map(|j| format!("{}{}", prefix, j)).collect::<Vec<_>>().join(",")
}

fn push_row(out: &mut String, lead: &[usize], values: &[f64]) {
    let mut first = true;
    for id in lead {
        if !first {
            out.push(',');
        }
        write!(out, "{}", id).unwrap();
        first = false;
    }
    for v in values {
        if !first {
            out.push(',');
        }
        write!(out, "{}", v).unwrap();
        first = false;
    }
    out.push('\n');
}

pub fn batch_to_csv(batch: &DatasetBatch) -> String {
    let mut out = format!("dataset_id,obs_id,{}\n", header("x", batch.d()));
    for i in 0..batch.n() {
        for (j, obs) in batch.dataset(i).chunks(batch.d()).enumerate() {
            push_row(&mut out, &[i, j], obs);
        }
    }
    out
}

pub fn params_to_csv(params: &Array) -> String {
    let mut out = format!("dataset_id,{}\n", header("theta", params.cols()));
    for i in 0..params.rows() {
        push_row(&mut out, &[i], params.row(i));
    }
    out
}

pub fn matrix_to_csv(a: &Array, prefix: &str) -> String {
    let mut out = header(prefix, a.cols()) + "\n";
    for i in 0..a.rows() {
        push_row(&mut out, &[], a.row(i));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

struct Table {
    columns: Vec<String>,
    rows: Vec<(u64, Vec<f64>)>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    let parse_err = |line: u64, detail: String| CliError::Parse { path: path.into(), line, detail };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => parse_err(1, format!("{:?}", other)),
        })?;
    let columns: Vec<String> = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let values = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("column {:?}: {:?} is not a finite number", columns[j], field)))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(Table { columns, rows })
}

fn check_columns(path: &Path, columns: &[String], lead: &[&str], prefix: &str) -> CliResult<usize> {
    let expected_lead = columns.iter().take(lead.len()).map(String::as_str).eq(lead.iter().copied());
    let width = columns.len().saturating_sub(lead.len());
    if !expected_lead || width == 0 || columns[lead.len()..] != *header(prefix, width).split(',').collect::<Vec<_>>() {
        return Err(CliError::Parse {
            path: path.into(),
            line: 1,
            detail: format!(
                "header must be {}{}0,..; found {}",
                lead.iter().map(|c| format!("{},", c)).collect::<String>(),
                prefix,
                columns.join(",")
            ),
        });
    }
    Ok(width)
}

fn as_index(path: &Path, line: u64, v: f64, what: &str) -> CliResult<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(CliError::Parse { path: path.into(), line, detail: format!("{} must be a non-negative integer, got {}", what, v) })
    }
}

/// Read a dataset table; `obs_id` must count 0, 1, .. within each dataset.
pub fn read_batch(path: &Path) -> CliResult<DatasetBatch> {
    let table = read_table(path)?;
    let d = check_columns(path, &table.columns, &["dataset_id", "obs_id"], "x")?;
    let mut datasets: Vec<Vec<f64>> = Vec::new();
    let mut current: Option<usize> = None;
    let mut k: Option<usize> = None;
    let mut count = 0;
    let mut seen = std::collections::HashSet::new();
    let close = |count: usize, line: u64, k: &mut Option<usize>| -> CliResult<()> {
        match *k {
            None => *k = Some(count),
            Some(k) if k != count => {
                return Err(CliError::Parse {
                    path: path.into(),
                    line,
                    detail: format!("dataset has {} observations, earlier datasets have {}", count, k),
                })
            }
            _ => {}
        }
        Ok(())
    };
    for (line, values) in &table.rows {
        let id = as_index(path, *line, values[0], "dataset_id")?;
        let obs = as_index(path, *line, values[1], "obs_id")?;
        if current != Some(id) {
            if current.is_some() {
                close(count, *line, &mut k)?;
            }
            if !seen.insert(id) {
                return Err(CliError::Parse { path: path.into(), line: *line, detail: format!("rows of dataset {} are not contiguous", id) });
            }
            current = Some(id);
            datasets.push(Vec::new());
            count = 0;
        }
        if obs != count {
            return Err(CliError::Parse { path: path.into(), line: *line, detail: format!("expected obs_id {}, found {}", count, obs) });
        }
        datasets.last_mut().unwrap().extend_from_slice(&values[2..]);
        count += 1;
    }
    if datasets.is_empty() {
        return Err(CliError::Parse { path: path.into(), line: 1, detail: "no data rows".into() });
    }
    close(count, table.rows.last().unwrap().0, &mut k)?;
    Ok(DatasetBatch::from_datasets(&datasets, k.unwrap(), d)?)
}

pub fn read_matrix(path: &Path, prefix: &str) -> CliResult<Array> {
    let table = read_table(path)?;
    let cols = check_columns(path, &table.columns, &[], prefix)?;
    let rows: Vec<Vec<f64>> = table.rows.into_iter().map(|(_, v)| v).collect();
    if rows.is_empty() {
        return Err(CliError::Parse { path: path.into(), line: 1, detail: "no data rows".into() });
    }
    Ok(Array::matrix(rows.len(), cols, rows.concat())?)
}

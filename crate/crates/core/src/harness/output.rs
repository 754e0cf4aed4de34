use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::run::RunLog;
use crate::error::{Error, Result};

/// Fixed CSV schema; logs with more than two obstacles append `h3`, `h4`, ...
pub const CSV_HEADER: [&str; 17] = [
    "t", "x", "y", "vx", "vy", "ax", "ay", "dx_true", "dy_true", "dx_hat", "dy_hat", "delta", "h1", "h2", "qp_active",
    "qp_iters", "slack",
];

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes every `log.decimation`-th row; floats use the shortest exact representation.
pub fn emit_csv(log: &RunLog, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let extra = log.rows.first().map_or(0, |r| r.h.len().saturating_sub(2));
    let mut header: Vec<String> = CSV_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend((0..extra).map(|i| format!("h{}", i + 3)));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let h_at = |h: &[f64], i: usize| h.get(i).map_or(String::new(), |v| v.to_string());
    for r in log.rows.iter().step_by(log.decimation.max(1)) {
        let mut rec: Vec<String> = [
            r.t, r.z[0], r.z[1], r.z[2], r.z[3], r.u[0], r.u[1], r.d_true[2], r.d_true[3], r.d_hat[2], r.d_hat[3],
            r.delta,
        ]
        .iter()
        .map(|v| v.to_string())
        .collect();
        rec.push(h_at(&r.h, 0));
        rec.push(h_at(&r.h, 1));
        rec.push(r.qp_active.to_string());
        rec.push(r.qp_iters.to_string());
        rec.push(r.slack.to_string());
        rec.extend(r.h.iter().skip(2).map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parsed CSV log, one column vector per header entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvLog {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl CsvLog {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn read_csv(path: &Path) -> Result<CsvLog> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    if header.len() < CSV_HEADER.len() || header.iter().zip(CSV_HEADER).any(|(a, b)| a != b) {
        return Err(csv_err(path, format!("unexpected header {header:?}")));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for (i, field) in rec.iter().enumerate() {
            let v = if field.is_empty() {
                f64::NAN
            } else {
                field
                    .parse::<f64>()
                    .map_err(|e| csv_err(path, format!("row {}: column {}: {e}", line + 2, header[i])))?
            };
            columns[i].push(v);
        }
    }
    Ok(CsvLog { header, columns })
}

pub fn emit_summary(log: &RunLog, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&log.summary)?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

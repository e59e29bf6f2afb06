//! CSV artifacts exchanged between pipeline stages.
//!
//! Signals are one column per channel and one row per sample, written with
//! 17 significant digits so every `f64` survives a round trip bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::SeparationReport;
use crate::matrix_est::EstimatedMatrix;
use crate::signal::SignalMatrix;

/// Lossless decimal rendering of one sample.
pub fn format_sample(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes a signal matrix with header `{prefix}1,{prefix}2,…`.
pub fn write_signal(path: &Path, prefix: &str, signal: &SignalMatrix) -> Result<()> {
    let header: Vec<String> = (1..=signal.cols()).map(|k| format!("{prefix}{k}")).collect();
    write_rows(
        path,
        &header,
        signal
            .iter_rows()
            .map(|r| r.iter().copied().map(format_sample).collect()),
    )
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Numeric records of a headed CSV file, with their 1-based line numbers.
fn read_numeric(path: &Path) -> Result<(Vec<String>, Vec<(usize, Vec<f64>)>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let values = record
            .iter()
            .enumerate()
            .map(|(i, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, line, format!("column {}: bad number `{field}`", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok((header, rows))
}

pub fn read_signal(path: &Path) -> Result<SignalMatrix> {
    let (header, rows) = read_numeric(path)?;
    if rows.is_empty() {
        return Err(parse_err(path, 2, "no samples"));
    }
    let cols = header.len();
    let mut data = Vec::with_capacity(rows.len() * cols);
    for (_, values) in &rows {
        data.extend_from_slice(values);
    }
    SignalMatrix::from_row_major(rows.len(), cols, data)
}

/// Writes A′ as a two-row matrix: ones over the estimated ratios.
pub fn write_estimated_matrix(path: &Path, est: &EstimatedMatrix) -> Result<()> {
    let header: Vec<String> = (1..=est.n_sources()).map(|k| format!("a{k}")).collect();
    let ones = vec![format_sample(1.0); est.n_sources()];
    let ratios = est.ratios().iter().copied().map(format_sample).collect();
    write_rows(path, &header, [ones, ratios].into_iter())
}

pub fn read_estimated_matrix(path: &Path) -> Result<EstimatedMatrix> {
    let (_, rows) = read_numeric(path)?;
    let [(l1, ones), (_, ratios)] = rows.as_slice() else {
        return Err(parse_err(path, 2, "estimated matrix needs exactly two rows"));
    };
    if ones.iter().any(|&v| v != 1.0) {
        return Err(parse_err(path, *l1, "first row of the estimated matrix must be all ones"));
    }
    EstimatedMatrix::new(ratios.clone())
}

/// `estimate_idx,true_idx,correlation` with 1-based indices.
pub fn write_report(path: &Path, report: &SeparationReport) -> Result<()> {
    let header = ["estimate_idx", "true_idx", "correlation"].map(String::from);
    write_rows(
        path,
        &header,
        report.matches.iter().map(|m| {
            vec![
                (m.estimate + 1).to_string(),
                (m.truth + 1).to_string(),
                format_sample(m.correlation),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "x1,x2\n1.0,2.0\n3.0,oops\n").unwrap();
        let err = read_signal(&p).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":3:"), "{msg}");
        assert!(msg.contains("oops"), "{msg}");

        std::fs::write(&p, "x1,x2\n1.0,2.0\n3.0\n").unwrap();
        assert!(read_signal(&p).unwrap_err().to_string().contains(":3:"));
    }

    #[test]
    fn estimated_matrix_round_trip_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let est = EstimatedMatrix::new(vec![1.8, 0.5, 2.0]).unwrap();
        write_estimated_matrix(&p, &est).unwrap();
        assert_eq!(read_estimated_matrix(&p).unwrap(), est);

        std::fs::write(&p, "a1,a2,a3\n1,1,1\n0.5,2.0,0.5\n").unwrap();
        assert!(matches!(read_estimated_matrix(&p), Err(Error::DegeneratePair { .. })));

        std::fs::write(&p, "a1,a2\n1,2\n0.5,2.0\n").unwrap();
        assert!(read_estimated_matrix(&p).is_err());
    }

    proptest! {
        #[test]
        fn signal_csv_is_lossless(values in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.csv");
            let n = values.len();
            let cols = vec![values.clone(), values.iter().map(|v| v / 3.0).collect()];
            let m = SignalMatrix::from_columns(&cols).unwrap();
            write_signal(&p, "s", &m).unwrap();
            let back = read_signal(&p).unwrap();
            prop_assert_eq!(back.rows(), n);
            for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

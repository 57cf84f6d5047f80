//! CSV ingestion and emission.
//!
//! Floats are written with 17 significant digits so they round-trip exactly.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::extremes::{DataMatrix, DiscreteAngularMeasure};

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Reads observations: comma separated, one row per observation, optional
/// header (a first line with no numeric field).
pub fn read_data_csv(reader: impl Read) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut d = None;
    let mut data = Vec::new();
    let mut n = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = line + 1;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if line == 0 && parsed.iter().all(|v| v.is_err()) {
            d = Some(record.len());
            continue;
        }
        let width = *d.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::Parse {
                row,
                col: record.len().min(width) + 1,
                msg: format!("expected {width} columns, found {}", record.len()),
            });
        }
        for (col, (v, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            match v {
                Ok(x) if x.is_finite() => data.push(x),
                _ => {
                    return Err(Error::Parse {
                        row,
                        col: col + 1,
                        msg: format!("'{raw}' is not a finite number"),
                    })
                }
            }
        }
        n += 1;
    }
    let d = d.unwrap_or(0);
    match DataMatrix::new(n, d, data) {
        Err(Error::NonFinite { row, col }) => Err(Error::Parse {
            row: row + 1,
            col: col + 1,
            msg: "non-finite value".into(),
        }),
        other => other,
    }
}

pub fn data_header(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// Writes `rows` (row-major, `d` columns) under an `x1,…,xd` header.
pub fn write_data_csv(writer: impl Write, d: usize, rows: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data_header(d))?;
    if d > 0 {
        for row in rows.chunks_exact(d) {
            w.write_record(row.iter().map(|x| fmt_f64(*x)))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One atom per row: `x1,…,xd,weight`.
pub fn write_measure_csv(writer: impl Write, h: &DiscreteAngularMeasure) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = data_header(h.d());
    header.push("weight".into());
    w.write_record(&header)?;
    for (atom, weight) in h.iter() {
        let mut rec: Vec<String> = atom.iter().map(|x| fmt_f64(*x)).collect();
        rec.push(fmt_f64(weight));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measure_csv(reader: impl Read) -> Result<DiscreteAngularMeasure> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let cols = rdr.headers()?.len();
    if cols < 2 {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            msg: "expected coordinate columns and a weight column".into(),
        });
    }
    let d = cols - 1;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, raw) in record.iter().enumerate() {
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row: i + 2,
                col: col + 1,
                msg: format!("'{raw}' is not a number"),
            })?;
            if col < d {
                atoms.push(v);
            } else {
                weights.push(v);
            }
        }
    }
    DiscreteAngularMeasure::new(d, atoms, weights, 0.0)
}

/// Generic table writer.
pub fn write_table<S: AsRef<str>>(
    writer: impl Write,
    header: &[S],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header.iter().map(AsRef::as_ref))?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

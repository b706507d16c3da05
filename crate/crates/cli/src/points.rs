//! CSV point sets and tables. Numbers are written with 17 significant digits,
//! so a write followed by a read reproduces every value exactly.

use std::io::{Read, Write};
use std::path::Path;

use pim_core::{ObserverPointSet, SourcePointSet, Vec3, C64};

use crate::CliError;

pub const SOURCE_HEADER: [&str; 5] = ["x", "y", "z", "q_re", "q_im"];
pub const OBSERVER_HEADER: [&str; 3] = ["x", "y", "z"];
pub const FIELD_HEADER: [&str; 5] = ["x", "y", "z", "u_re", "u_im"];

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> CliError {
    if e.is_io_error() {
        CliError::Io(e.to_string())
    } else {
        CliError::Validation(e.to_string())
    }
}

fn open(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_rows<R: Read>(reader: R, header: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if found != header {
        return Err(CliError::Validation(format!(
            "expected header `{}`, found `{}`",
            header.join(","),
            found.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|_| CliError::Validation(format!("row {}: non-numeric field", i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_sources<R: Read>(reader: R) -> Result<SourcePointSet, CliError> {
    let rows = read_rows(reader, &SOURCE_HEADER)?;
    let positions = rows.iter().map(|r| [r[0], r[1], r[2]]).collect();
    let amplitudes = rows.iter().map(|r| C64::new(r[3], r[4])).collect();
    Ok(SourcePointSet::new(positions, amplitudes)?)
}

pub fn read_observers<R: Read>(reader: R) -> Result<ObserverPointSet, CliError> {
    let rows = read_rows(reader, &OBSERVER_HEADER)?;
    Ok(ObserverPointSet::new(rows.iter().map(|r| [r[0], r[1], r[2]]).collect()))
}

pub fn read_sources_file(path: &Path) -> Result<SourcePointSet, CliError> {
    read_sources(open(path)?).map_err(|e| e.context(path))
}

pub fn read_observers_file(path: &Path) -> Result<ObserverPointSet, CliError> {
    read_observers(open(path)?).map_err(|e| e.context(path))
}

/// Writes a header and rows of preformatted fields with LF line endings.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(header).map_err(csv_error)?;
    for row in rows {
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn point_row(p: &Vec3, z: C64) -> Vec<String> {
    vec![fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(z.re), fmt(z.im)]
}

pub fn write_sources<W: Write>(w: W, src: &SourcePointSet) -> Result<(), CliError> {
    let rows = src.positions().iter().zip(src.amplitudes()).map(|(p, q)| point_row(p, *q));
    write_table(w, &SOURCE_HEADER, rows)
}

pub fn write_observers<W: Write>(w: W, obs: &ObserverPointSet) -> Result<(), CliError> {
    let rows = obs.positions().iter().map(|p| p.iter().map(|v| fmt(*v)).collect());
    write_table(w, &OBSERVER_HEADER, rows)
}

pub fn write_field<W: Write>(w: W, obs: &ObserverPointSet, u: &[C64]) -> Result<(), CliError> {
    let rows = obs.positions().iter().zip(u).map(|(p, v)| point_row(p, *v));
    write_table(w, &FIELD_HEADER, rows)
}

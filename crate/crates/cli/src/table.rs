//! CSV output: header row, LF line endings, floats with 17 significant digits.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Text(String),
    Int(u64),
    Float(f64),
    Empty,
}

impl Field {
    pub fn render(&self) -> String {
        match self {
            Field::Text(s) => s.clone(),
            Field::Int(n) => n.to_string(),
            Field::Float(x) => format_float(*x),
            Field::Empty => String::new(),
        }
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.to_string())
    }
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Float(x)
    }
}

impl From<usize> for Field {
    fn from(n: usize) -> Self {
        Field::Int(n as u64)
    }
}

impl From<u64> for Field {
    fn from(n: u64) -> Self {
        Field::Int(n)
    }
}

impl From<Option<f64>> for Field {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Field::Empty, Field::Float)
    }
}

/// Scientific notation with 16 digits after the point, so `1.0` becomes
/// `1.0000000000000000e0`. Non-finite values are `NaN`, `inf`, `-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Writes `rows` under `header`. Every row must have one field per column.
pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<Field>]) -> io::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(header)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!(
                    "row {i} has {} fields, header has {}",
                    row.len(),
                    header.len()
                ),
            ));
        }
        writer.write_record(row.iter().map(Field::render))?;
    }
    writer.flush()
}

pub fn write_csv_file(path: &Path, header: &[&str], rows: &[Vec<Field>]) -> io::Result<()> {
    let file = File::create(path)?;
    write_csv(io::BufWriter::new(file), header, rows)
}

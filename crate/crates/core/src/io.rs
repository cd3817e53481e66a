//! CSV files: dense matrices without a header, and long-format tables with one.
//!
//! Floats are written with 17 significant digits so every `f64` survives a
//! write/read cycle unchanged. Rows end with `\n`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::DataMatrix;
use crate::linalg::{Matrix, Vector};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        // `{:e}` would print "0e0"/"NaN"; keep the common cases readable.
        return if x.is_nan() {
            "NaN".into()
        } else {
            format!("{x}")
        };
    }
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path)?)))
}

/// Writes `rows` under a header line.
pub fn write_table<I, R>(path: impl AsRef<Path>, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path.as_ref())?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Header and string cells of a table written by [`write_table`].
pub fn read_table(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    for row in m.iter_rows() {
        w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("invalid number {tok:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "empty matrix file"));
    }
    Matrix::from_rows(&rows)
}

pub fn write_data_csv(path: impl AsRef<Path>, x: &DataMatrix) -> Result<()> {
    write_matrix_csv(path, &x.to_matrix())
}

pub fn read_data_csv(path: impl AsRef<Path>) -> Result<DataMatrix> {
    DataMatrix::try_from(read_matrix_csv(path)?)
}

/// One value per line.
pub fn write_vector_csv(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &x in v {
        writeln!(w, "{}", fmt_f64(x))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<Vector> {
    let m = read_matrix_csv(path)?;
    if m.cols() != 1 {
        return Err(Error::Dimension(format!(
            "expected one value per line, found {} columns",
            m.cols()
        )));
    }
    Ok(Vector::new(m.as_slice().to_vec()))
}

//! Matrix Market count matrices (genes × cells) and plain-text label sidecars.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::kernel::DataMatrix;

/// Sparse genes × cells matrix, stored per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CountMatrix {
    genes: usize,
    /// `cells[c]` holds `(gene, value)` pairs sorted by gene, without duplicates.
    cells: Vec<Vec<(usize, f64)>>,
}

impl CountMatrix {
    pub fn new(genes: usize, n_cells: usize) -> Self {
        CountMatrix {
            genes,
            cells: vec![Vec::new(); n_cells],
        }
    }

    /// Builds from `(gene, cell, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        genes: usize,
        n_cells: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut out = Self::new(genes, n_cells);
        for (g, c, v) in triplets {
            if g >= genes || c >= n_cells {
                return Err(Error::Dimension(format!(
                    "entry ({g}, {c}) outside a {genes} x {n_cells} matrix"
                )));
            }
            out.cells[c].push((g, v));
        }
        for col in &mut out.cells {
            col.sort_by_key(|&(g, _)| g);
            col.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
        }
        Ok(out)
    }

    pub fn genes(&self) -> usize {
        self.genes
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn nnz(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn cell(&self, c: usize) -> &[(usize, f64)] {
        &self.cells[c]
    }

    pub fn select_cells(&self, idx: &[usize]) -> Result<Self> {
        let cells = idx
            .iter()
            .map(|&c| {
                self.cells.get(c).cloned().ok_or_else(|| {
                    Error::Dimension(format!("cell {c} out of range for {}", self.n_cells()))
                })
            })
            .collect::<Result<_>>()?;
        Ok(CountMatrix {
            genes: self.genes,
            cells,
        })
    }

    /// Dense cells × genes data; with `normalize_columns` every cell sums to one.
    pub fn to_data(&self, normalize_columns: bool) -> Result<DataMatrix> {
        let mut points = vec![0.0; self.n_cells() * self.genes];
        for (c, col) in self.cells.iter().enumerate() {
            let row = &mut points[c * self.genes..(c + 1) * self.genes];
            for &(g, v) in col {
                row[g] = v;
            }
            if normalize_columns {
                let total: f64 = col.iter().map(|&(_, v)| v).sum();
                if !(total > 0.0) {
                    return Err(Error::Input(format!(
                        "cell {c} has total count {total}; cannot normalize"
                    )));
                }
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
        DataMatrix::new(self.n_cells(), self.genes, points)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_banner(path: &Path, line: &str) -> Result<(Layout, Symmetry)> {
    let lower = line.to_ascii_lowercase();
    let tokens: Vec<&str> = lower.split_whitespace().collect();
    if tokens.first() != Some(&"%%matrixmarket") {
        return Err(Error::parse(path, 1, "missing %%MatrixMarket banner"));
    }
    if tokens.len() != 5 || tokens[1] != "matrix" {
        return Err(Error::parse(
            path,
            1,
            "banner must read: %%MatrixMarket matrix <layout> <field> <symmetry>",
        ));
    }
    let layout = match tokens[2] {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => {
            return Err(Error::parse(
                path,
                1,
                format!("unsupported layout {other:?}"),
            ))
        }
    };
    match tokens[3] {
        "real" | "integer" | "double" => {}
        other => {
            return Err(Error::parse(
                path,
                1,
                format!("unsupported field {other:?}"),
            ))
        }
    }
    let symmetry = match tokens[4] {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(Error::parse(
                path,
                1,
                format!("unsupported symmetry {other:?}"),
            ))
        }
    };
    Ok((layout, symmetry))
}

fn parse_num<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    tok: Option<&str>,
    what: &str,
) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, line, format!("expected {what}")))
}

/// Reads a Matrix Market file in coordinate or array layout with real or integer values.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CountMatrix> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let banner = match lines.next() {
        Some((_, l)) => l?,
        None => return Err(Error::parse(path, 1, "empty file")),
    };
    let (layout, symmetry) = parse_banner(path, &banner)?;

    // Skip comments and blank lines; the rest are data lines.
    let mut data = lines.filter_map(|(no, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('%') => None,
        other => Some((no, other)),
    });

    let (size_no, size_line) = match data.next() {
        Some((no, l)) => (no, l?),
        None => return Err(Error::parse(path, 2, "missing size line")),
    };
    let mut size = size_line.split_whitespace();
    let genes: usize = parse_num(path, size_no, size.next(), "row count")?;
    let cells: usize = parse_num(path, size_no, size.next(), "column count")?;
    if symmetry == Symmetry::Symmetric && genes != cells {
        return Err(Error::parse(
            path,
            size_no,
            "symmetric matrix must be square",
        ));
    }

    let mut triplets = Vec::new();
    match layout {
        Layout::Coordinate => {
            let nnz: usize = parse_num(path, size_no, size.next(), "entry count")?;
            for k in 0..nnz {
                let (no, line) = match data.next() {
                    Some((no, l)) => (no, l?),
                    None => {
                        return Err(Error::parse(
                            path,
                            size_no + k + 1,
                            format!("file truncated: {k} of {nnz} entries present"),
                        ))
                    }
                };
                let mut tok = line.split_whitespace();
                let i: usize = parse_num(path, no, tok.next(), "row index")?;
                let j: usize = parse_num(path, no, tok.next(), "column index")?;
                let v: f64 = parse_num(path, no, tok.next(), "value")?;
                if i == 0 || j == 0 || i > genes || j > cells {
                    return Err(Error::parse(
                        path,
                        no,
                        format!("index ({i}, {j}) out of range"),
                    ));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
        Layout::Array => {
            // Column-major; symmetric arrays store the lower triangle only.
            let positions: Vec<(usize, usize)> = (0..cells)
                .flat_map(|j| {
                    let start = if symmetry == Symmetry::Symmetric {
                        j
                    } else {
                        0
                    };
                    (start..genes).map(move |i| (i, j))
                })
                .collect();
            let total = positions.len();
            for (k, (i, j)) in positions.into_iter().enumerate() {
                let (no, line) = match data.next() {
                    Some((no, l)) => (no, l?),
                    None => {
                        return Err(Error::parse(
                            path,
                            size_no + k + 1,
                            format!("file truncated: {k} of {total} values present"),
                        ))
                    }
                };
                let v: f64 = parse_num(path, no, line.split_whitespace().next(), "value")?;
                if v != 0.0 {
                    triplets.push((i, j, v));
                    if symmetry == Symmetry::Symmetric && i != j {
                        triplets.push((j, i, v));
                    }
                }
            }
        }
    }
    if let Some((no, _)) = data.next() {
        return Err(Error::parse(
            path,
            no,
            "unexpected data after the declared entries",
        ));
    }
    if triplets.iter().any(|t| !t.2.is_finite()) {
        return Err(Error::parse(path, size_no, "non-finite value"));
    }
    CountMatrix::from_triplets(genes, cells, triplets)
}

/// Writes coordinate/real/general with 17 significant digits.
pub fn write_matrix_market(path: impl AsRef<Path>, counts: &CountMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", counts.genes, counts.n_cells(), counts.nnz())?;
    for (c, col) in counts.cells.iter().enumerate() {
        for &(g, v) in col {
            writeln!(w, "{} {} {:.16e}", g + 1, c + 1, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Cells of a Matrix Market file as points, optionally normalized to unit sum.
pub fn load_matrix_market(path: impl AsRef<Path>, normalize_columns: bool) -> Result<DataMatrix> {
    read_matrix_market(path)?.to_data(normalize_columns)
}

/// One integer label per line, blank lines ignored.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(
            t.parse()
                .map_err(|_| Error::parse(path, i + 1, format!("invalid label {t:?}")))?,
        );
    }
    Ok(labels)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[i64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_labeled(
    mtx: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    normalize_columns: bool,
) -> Result<LabeledDataset> {
    let data = load_matrix_market(mtx, normalize_columns)?;
    LabeledDataset::new(data, read_labels(labels)?)
}

//! Pairwise squared distances and the zero-diagonal Gaussian kernel.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};

/// `n` points in `R^m`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    n: usize,
    m: usize,
    points: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, m: usize, points: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Input(format!("empty data matrix ({n} x {m})")));
        }
        if points.len() != n * m {
            return Err(Error::Dimension(format!(
                "{n} points in R^{m} need {} coordinates, got {}",
                n * m,
                points.len()
            )));
        }
        if let Some(bad) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite coordinate {} at point {}",
                points[bad],
                bad / m
            )));
        }
        Ok(DataMatrix { n, m, points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        Self::try_from(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.m..(i + 1) * self.m]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.points[i * self.m..(i + 1) * self.m]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.m)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn sq_norm(&self, i: usize) -> f64 {
        self.point(i).iter().map(|x| x * x).sum()
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut points = Vec::with_capacity(idx.len() * self.m);
        for &i in idx {
            if i >= self.n {
                return Err(Error::Dimension(format!(
                    "row {i} out of range for {} points",
                    self.n
                )));
            }
            points.extend_from_slice(self.point(i));
        }
        Self::new(idx.len(), self.m, points)
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_row_major(self.n, self.m, self.points.clone()).expect("shape is consistent")
    }
}

impl TryFrom<Matrix> for DataMatrix {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        DataMatrix::new(m.rows(), m.cols(), m.as_slice().to_vec())
    }
}

/// Symmetric Gaussian kernel with a zero main diagonal, and the width that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    gram: SymMatrix,
    epsilon: f64,
}

impl KernelMatrix {
    /// Wraps an existing Gram matrix, e.g. one read back from disk.
    ///
    /// Off-diagonal entries must lie in `[0, 1]`: zeros from `exp` underflow are
    /// accepted here and rejected later by [`crate::normalize::check_scalable`].
    pub fn from_gram(gram: SymMatrix, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let n = gram.n();
        for i in 0..n {
            if gram.get(i, i) != 0.0 {
                return Err(Error::Input(format!(
                    "kernel diagonal must be zero, found {} at ({i}, {i})",
                    gram.get(i, i)
                )));
            }
            for j in i + 1..n {
                let v = gram.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Input(format!(
                        "kernel entry ({i}, {j}) = {v} is outside [0, 1]"
                    )));
                }
            }
        }
        Ok(KernelMatrix { gram, epsilon })
    }

    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.gram.n()
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "kernel width must be positive and finite, got {epsilon}"
        )))
    }
}

/// `D[i][j] = Σ_c (X[i][c] − X[j][c])²`, by explicit differences.
pub fn pairwise_sq_dists(x: &DataMatrix) -> SymMatrix {
    let n = x.n();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.point(i);
            (i + 1..n)
                .map(|j| {
                    xi.iter()
                        .zip(x.point(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut d = SymMatrix::zeros(n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            d.set(i, i + 1 + off, v);
        }
    }
    d
}

/// Gaussian kernel `exp(−‖x_i − x_j‖²/ε)` off the diagonal, zero on it.
pub fn gaussian_kernel(x: &DataMatrix, epsilon: f64) -> Result<KernelMatrix> {
    check_epsilon(epsilon)?;
    Ok(kernel_from_sq_dists(&pairwise_sq_dists(x), epsilon))
}

pub(crate) fn kernel_from_sq_dists(d: &SymMatrix, epsilon: f64) -> KernelMatrix {
    let gram = SymMatrix::from_upper_fn(d.n(), |i, j| {
        if i == j {
            0.0
        } else {
            (-d.get(i, j) / epsilon).exp()
        }
    });
    KernelMatrix { gram, epsilon }
}

//! Dense real matrices and the symmetric eigensolver shared by every other module.
//!
//! Storage is row-major `Vec<f64>`. [`SymMatrix`] only exposes writes that set
//! both `(i, j)` and `(j, i)`, so symmetry is exact rather than approximate.

use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative residual every returned eigenpair must satisfy, as a fraction of `‖A‖_F`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

const EIGEN_MAX_SWEEPS: usize = 10_000;

/// A dense real vector.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Self {
        Vector(entries)
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Read access to a square matrix, implemented by every dense matrix type in the crate.
pub trait SquareView {
    fn dim(&self) -> usize;
    fn row(&self, i: usize) -> &[f64];

    fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)[j]
    }
}

/// General dense matrix with `rows × cols` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl SquareView for Matrix {
    fn dim(&self) -> usize {
        debug_assert_eq!(self.rows, self.cols);
        self.rows
    }

    fn row(&self, i: usize) -> &[f64] {
        Matrix::row(self, i)
    }
}

/// Dense symmetric `n × n` matrix. Every write sets both triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = Self::zeros(n);
        for i in 0..n {
            a.set(i, i, 1.0);
        }
        a
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut a = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            a.set(i, i, v);
        }
        a
    }

    /// Builds the matrix from `f(i, j)` evaluated on the upper triangle `i <= j` only.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut a = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                a.set(i, j, f(i, j));
            }
        }
        a
    }

    /// Takes the upper triangle of a square matrix and mirrors it.
    pub fn from_upper(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(Self::from_upper_fn(m.rows(), |i, j| m.get(i, j)))
    }

    /// Accepts a square matrix only if it is exactly symmetric.
    pub fn try_from_matrix(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        for i in 0..n {
            for j in i + 1..n {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::Input(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        m.get(i, j),
                        m.get(j, i)
                    )));
                }
            }
        }
        Ok(SymMatrix { n, data: m.data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.n,
            cols: self.n,
            data: self.data.clone(),
        }
    }

    pub fn into_matrix(self) -> Matrix {
        Matrix {
            rows: self.n,
            cols: self.n,
            data: self.data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// `diag(s) · self · diag(s)`, computed on the upper triangle and mirrored.
    pub fn scale_sym(&self, s: &[f64]) -> SymMatrix {
        SymMatrix::from_upper_fn(self.n, |i, j| s[i] * self.get(i, j) * s[j])
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

impl SquareView for SymMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn row(&self, i: usize) -> &[f64] {
        SymMatrix::row(self, i)
    }
}

/// One eigenpair of a symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vector,
}

/// Flips `v` so its largest-magnitude entry is positive; ties go to the lowest index.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The `k` largest eigenpairs of `a`, sorted by signed eigenvalue, descending.
///
/// Eigenvectors are unit-norm and sign-fixed by [`fix_sign`]. Every pair is
/// checked against `‖Aψ − λψ‖ ≤ 1e−8·‖A‖_F`; a violation is reported as
/// [`Error::Eigen`] with the worst residual seen.
pub fn sym_eigen_topk(a: &SymMatrix, k: usize) -> Result<Vec<EigenPair>> {
    let n = a.n();
    if k == 0 || k > n {
        return Err(Error::Dimension(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if !a.is_finite() {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }

    let required = EIGEN_RESIDUAL_TOL * a.frobenius_norm();
    let eig = SymmetricEigen::try_new(a.to_nalgebra(), f64::EPSILON, EIGEN_MAX_SWEEPS).ok_or(
        Error::Eigen {
            residual: f64::NAN,
            required,
        },
    )?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));

    let mut pairs = Vec::with_capacity(k);
    let mut worst = 0.0f64;
    for &idx in order.iter().take(k) {
        let value = eig.eigenvalues[idx];
        let col = eig.eigenvectors.column(idx);
        let norm = col.norm();
        let mut v: Vec<f64> = col.iter().map(|x| x / norm).collect();
        fix_sign(&mut v);

        let av = a.matvec(&v);
        let residual = av
            .iter()
            .zip(&v)
            .map(|(p, q)| (p - value * q).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(residual);
        pairs.push(EigenPair {
            value,
            vector: Vector(v),
        });
    }
    if worst > required {
        return Err(Error::Eigen {
            residual: worst,
            required,
        });
    }
    Ok(pairs)
}

/// Full spectrum of `a`, sorted descending.
pub fn sym_eigen_full(a: &SymMatrix) -> Result<Vec<EigenPair>> {
    sym_eigen_topk(a, a.n())
}

/// `‖A − B‖_F`.
pub fn frobenius_distance(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    frobenius_distance_sq(a, b).map(f64::sqrt)
}

/// `‖A − B‖_F²` for any two square views of equal size.
pub fn frobenius_distance_sq<A: SquareView + ?Sized, B: SquareView + ?Sized>(
    a: &A,
    b: &B,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "cannot compare {0}x{0} with {1}x{1}",
            a.dim(),
            b.dim()
        )));
    }
    Ok((0..a.dim())
        .map(|i| {
            a.row(i)
                .iter()
                .zip(b.row(i))
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
        })
        .sum())
}

/// Orthonormal basis of the span of `vectors` via twice-applied modified Gram–Schmidt.
///
/// Vectors that become numerically dependent are dropped.
pub fn orthonormalize(vectors: &[Vector]) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        let original = w.norm();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.iter_mut().zip(q.iter()).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = w.norm();
        if norm > 1e-10 * original.max(f64::MIN_POSITIVE) {
            w.iter_mut().for_each(|x| *x /= norm);
            basis.push(w);
        }
    }
    basis
}

//! Row-stochastic, symmetric and doubly-stochastic normalizations of a kernel.
//!
//! The doubly-stochastic scaling uses the symmetric Sinkhorn–Knopp fixed point
//! `d ← 1 / (K d)`. Consecutive iterates of that map oscillate around the
//! solution by a common factor `c, 1/c`, so convergence is measured between
//! iterates two steps apart and the result is the geometric mean of the final
//! two iterates, which cancels the oscillation.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{DataMatrix, KernelMatrix};
use crate::linalg::{self, dot, Matrix, SquareView, SymMatrix, Vector};

/// Which normalization produced an [`AffinityMatrix`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Row,
    Symmetric,
    Doubly,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Doubly, Variant::Row, Variant::Symmetric];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Row => "row",
            Variant::Symmetric => "symmetric",
            Variant::Doubly => "doubly",
        }
    }

    pub fn is_symmetric(self) -> bool {
        !matches!(self, Variant::Row)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row" => Ok(Variant::Row),
            "sym" | "symmetric" => Ok(Variant::Symmetric),
            "doubly" => Ok(Variant::Doubly),
            other => Err(Error::Input(format!(
                "unknown normalization {other:?} (expected row, sym or doubly)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Weights {
    Symmetric(SymMatrix),
    General(Matrix),
}

/// A normalized kernel together with its scaling vector.
///
/// `scaling` is `r` (inverse row sums of the kernel) for the row and
/// symmetric variants and `d` for the doubly-stochastic variant.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix {
    weights: Weights,
    variant: Variant,
    scaling: Vector,
    epsilon: f64,
}

impl AffinityMatrix {
    /// Reassembles an affinity matrix from stored parts.
    ///
    /// Symmetric variants must be exactly symmetric; every variant must have a
    /// zero diagonal and a strictly positive scaling vector of matching length.
    pub fn from_parts(w: Matrix, variant: Variant, scaling: Vector, epsilon: f64) -> Result<Self> {
        if w.rows() != w.cols() {
            return Err(Error::Dimension(format!(
                "affinity matrix must be square, got {}x{}",
                w.rows(),
                w.cols()
            )));
        }
        let n = w.rows();
        if scaling.len() != n {
            return Err(Error::Dimension(format!(
                "scaling vector has {} entries for a {n}x{n} matrix",
                scaling.len()
            )));
        }
        if let Some(i) = scaling.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Input(format!(
                "scaling entry {i} = {} is not strictly positive",
                scaling[i]
            )));
        }
        if let Some(i) = (0..n).find(|&i| w.get(i, i) != 0.0) {
            return Err(Error::Input(format!(
                "affinity diagonal must be zero, found {} at ({i}, {i})",
                w.get(i, i)
            )));
        }
        if !w.is_finite() || w.as_slice().iter().any(|&x| x < 0.0) {
            return Err(Error::Input(
                "affinity entries must be finite and nonnegative".into(),
            ));
        }
        let weights = if variant.is_symmetric() {
            Weights::Symmetric(SymMatrix::try_from_matrix(w)?)
        } else {
            Weights::General(w)
        };
        Ok(AffinityMatrix {
            weights,
            variant,
            scaling,
            epsilon,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn scaling(&self) -> &Vector {
        &self.scaling
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.scaling.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)[j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        match &self.weights {
            Weights::Symmetric(s) => s.row(i),
            Weights::General(m) => m.row(i),
        }
    }

    /// The weights as a symmetric matrix; `None` for the row-stochastic variant.
    pub fn as_sym(&self) -> Option<&SymMatrix> {
        match &self.weights {
            Weights::Symmetric(s) => Some(s),
            Weights::General(_) => None,
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        match &self.weights {
            Weights::Symmetric(s) => s.to_matrix(),
            Weights::General(m) => m.clone(),
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let n = self.n();
        let mut sums = vec![0.0; n];
        for i in 0..n {
            sums.iter_mut().zip(self.row(i)).for_each(|(s, w)| *s += w);
        }
        sums
    }

    pub(crate) fn require(&self, expected: Variant) -> Result<()> {
        if self.variant == expected {
            Ok(())
        } else {
            Err(Error::Variant {
                expected,
                found: self.variant,
            })
        }
    }
}

impl SquareView for AffinityMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn row(&self, i: usize) -> &[f64] {
        AffinityMatrix::row(self, i)
    }
}

/// Outcome of [`check_scalable`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalabilityReport {
    pub n: usize,
    /// Off-diagonal pairs `(i, j)`, `i < j`, whose kernel value is exactly zero.
    pub zero_pairs: Vec<(usize, usize)>,
}

impl ScalabilityReport {
    pub fn is_scalable(&self) -> bool {
        self.n > 2 && self.zero_pairs.is_empty()
    }

    pub fn remedy(&self) -> Option<&'static str> {
        if self.n <= 2 {
            Some("a doubly-stochastic scaling with zero diagonal needs at least 3 points")
        } else if !self.zero_pairs.is_empty() {
            Some("increase epsilon so that no kernel entry underflows to zero")
        } else {
            None
        }
    }
}

impl fmt::Display for ScalabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n <= 2 {
            return write!(
                f,
                "kernel is not scalable: n = {} but n > 2 is required for a zero-diagonal doubly-stochastic scaling to exist",
                self.n
            );
        }
        if self.zero_pairs.is_empty() {
            return write!(f, "kernel is scalable");
        }
        let shown: Vec<String> = self
            .zero_pairs
            .iter()
            .take(5)
            .map(|(i, j)| format!("({i}, {j})"))
            .collect();
        write!(
            f,
            "kernel is not scalable: {} off-diagonal entries underflowed to zero, e.g. {}{}; increase epsilon",
            self.zero_pairs.len(),
            shown.join(", "),
            if self.zero_pairs.len() > 5 { ", ..." } else { "" }
        )
    }
}

/// Checks the zero pattern that guarantees a unique doubly-stochastic scaling:
/// `n > 2` and every off-diagonal entry strictly positive after evaluation.
pub fn check_scalable(k: &KernelMatrix) -> ScalabilityReport {
    let g = k.gram();
    let n = g.n();
    let mut zero_pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !(g.get(i, j) > 0.0) {
                zero_pairs.push((i, j));
            }
        }
    }
    ScalabilityReport { n, zero_pairs }
}

fn inverse_row_sums(g: &SymMatrix) -> Result<Vec<f64>> {
    g.row_sums()
        .into_iter()
        .enumerate()
        .map(|(row, s)| {
            if s > 0.0 {
                Ok(1.0 / s)
            } else {
                Err(Error::DegenerateKernel { row })
            }
        })
        .collect()
}

/// `W = diag(r) K` with `r_i = 1 / Σ_j K_ij`.
pub fn row_stochastic(k: &KernelMatrix) -> Result<AffinityMatrix> {
    let g = k.gram();
    let r = inverse_row_sums(g)?;
    let n = g.n();
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        w.row_mut(i)
            .iter_mut()
            .zip(g.row(i))
            .for_each(|(out, kij)| *out = r[i] * kij);
    }
    Ok(AffinityMatrix {
        weights: Weights::General(w),
        variant: Variant::Row,
        scaling: r.into(),
        epsilon: k.epsilon(),
    })
}

/// One symmetric normalization step on an arbitrary nonnegative symmetric matrix:
/// returns `√diag(r) A √diag(r)` and `r`.
pub fn symmetric_scale(a: &SymMatrix) -> Result<(SymMatrix, Vector)> {
    let r = inverse_row_sums(a)?;
    let root: Vec<f64> = r.iter().map(|x| x.sqrt()).collect();
    Ok((a.scale_sym(&root), r.into()))
}

/// `W = √diag(r) K √diag(r)`.
pub fn symmetric_normalize(k: &KernelMatrix) -> Result<AffinityMatrix> {
    let (w, r) = symmetric_scale(k.gram())?;
    Ok(AffinityMatrix {
        weights: Weights::Symmetric(w),
        variant: Variant::Symmetric,
        scaling: r,
        epsilon: k.epsilon(),
    })
}

/// Stopping rule for [`sinkhorn_symmetric`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornConfig {
    /// Tolerance on `max_i |d_i^(τ−2) / d_i^(τ) − 1|`.
    pub delta: f64,
    pub max_iters: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            delta: 1e-12,
            max_iters: 1_000_000,
        }
    }
}

impl SinkhornConfig {
    pub fn new(delta: f64, max_iters: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Input(format!("delta must be positive, got {delta}")));
        }
        if max_iters == 0 {
            return Err(Error::Input("max_iters must be at least 1".into()));
        }
        Ok(SinkhornConfig { delta, max_iters })
    }
}

/// Diagnostics of one Sinkhorn run.
#[derive(Clone, Debug, PartialEq)]
pub struct SinkhornReport {
    /// Final value of the iteration counter τ.
    pub iters: usize,
    pub final_ratio_gap: f64,
    pub converged: bool,
    /// Geometric-mean contraction of the ratio gap per two fixed-point steps
    /// (one row-plus-column sweep of classical Sinkhorn–Knopp) over the last
    /// ten steps; NaN when the run was shorter than that.
    pub rate_estimate: f64,
}

const RATE_WINDOW: usize = 10;
const PARALLEL_MATVEC_MIN: usize = 512;

fn reciprocal_matvec(g: &SymMatrix, d: &[f64]) -> Vec<f64> {
    let n = g.n();
    if n >= PARALLEL_MATVEC_MIN {
        (0..n)
            .into_par_iter()
            .map(|i| 1.0 / dot(g.row(i), d))
            .collect()
    } else {
        (0..n).map(|i| 1.0 / dot(g.row(i), d)).collect()
    }
}

fn ratio_gap(older: &[f64], newer: &[f64]) -> f64 {
    older
        .iter()
        .zip(newer)
        .map(|(a, b)| (a / b - 1.0).abs())
        .fold(
            0.0,
            |acc: f64, x| if x.is_nan() { f64::NAN } else { acc.max(x) },
        )
}

/// Doubly-stochastic normalization `W = diag(d) K diag(d)` by symmetric Sinkhorn–Knopp.
///
/// Starts from `d^(0) = 1 / (K 1)`. On convergence every row and column sum of
/// `W` is within `10·delta` of one.
pub fn sinkhorn_symmetric(
    k: &KernelMatrix,
    cfg: &SinkhornConfig,
) -> Result<(AffinityMatrix, SinkhornReport)> {
    let report = check_scalable(k);
    if !report.is_scalable() {
        return Err(Error::NotScalable(report));
    }
    let d0 = inverse_row_sums(k.gram())?;
    run_sinkhorn(k, cfg, d0)
}

/// Same as [`sinkhorn_symmetric`] but starting from a caller-supplied `d^(0)`.
pub fn sinkhorn_symmetric_from(
    k: &KernelMatrix,
    cfg: &SinkhornConfig,
    d0: &[f64],
) -> Result<(AffinityMatrix, SinkhornReport)> {
    let report = check_scalable(k);
    if !report.is_scalable() {
        return Err(Error::NotScalable(report));
    }
    if d0.len() != k.n() {
        return Err(Error::Dimension(format!(
            "initial scaling has {} entries for n = {}",
            d0.len(),
            k.n()
        )));
    }
    if d0.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Input(
            "initial scaling must be strictly positive".into(),
        ));
    }
    run_sinkhorn(k, cfg, d0.to_vec())
}

fn run_sinkhorn(
    k: &KernelMatrix,
    cfg: &SinkhornConfig,
    d0: Vec<f64>,
) -> Result<(AffinityMatrix, SinkhornReport)> {
    let g = k.gram();
    let mut older = d0;
    let mut prev = reciprocal_matvec(g, &older);
    let mut cur = reciprocal_matvec(g, &prev);
    let mut tau = 2usize;
    let mut gaps: VecDeque<f64> = VecDeque::with_capacity(RATE_WINDOW + 1);

    let (converged, gap) = loop {
        let gap = ratio_gap(&older, &cur);
        if gaps.len() == RATE_WINDOW + 1 {
            gaps.pop_front();
        }
        gaps.push_back(gap);
        if gap <= cfg.delta {
            break (true, gap);
        }
        if tau >= cfg.max_iters || !gap.is_finite() {
            break (false, gap);
        }
        let next = reciprocal_matvec(g, &cur);
        older = std::mem::replace(&mut prev, std::mem::replace(&mut cur, next));
        tau += 1;
    };

    let rate_estimate = if gaps.len() == RATE_WINDOW + 1 {
        let first = gaps[0];
        let last = gaps[RATE_WINDOW];
        (last / first).powf(2.0 / RATE_WINDOW as f64)
    } else {
        f64::NAN
    };
    let report = SinkhornReport {
        iters: tau,
        final_ratio_gap: gap,
        converged,
        rate_estimate,
    };
    if !converged {
        return Err(Error::NotConverged(Box::new(report)));
    }

    let d: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| (a * b).sqrt()).collect();
    let w = g.scale_sym(&d);
    Ok((
        AffinityMatrix {
            weights: Weights::Symmetric(w),
            variant: Variant::Doubly,
            scaling: d.into(),
            epsilon: k.epsilon(),
        },
        report,
    ))
}

/// Observed Sinkhorn contraction next to the squared subdominant eigenvalue of `W`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub empirical: f64,
    pub predicted: f64,
}

/// Compares the report's tail contraction with `λ₂(W)²`, where `λ₂` is the
/// second-largest eigenvalue of `W` in magnitude.
pub fn estimate_rate(report: &SinkhornReport, w: &AffinityMatrix) -> Result<RateEstimate> {
    w.require(Variant::Doubly)?;
    if !report.converged {
        return Err(Error::Input(
            "rate estimate needs a converged Sinkhorn report".into(),
        ));
    }
    let sym = w.as_sym().expect("doubly-stochastic weights are symmetric");
    let mut mags: Vec<f64> = linalg::sym_eigen_full(sym)?
        .into_iter()
        .map(|p| p.value.abs())
        .collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let lambda2 = mags.get(1).copied().unwrap_or(0.0);
    Ok(RateEstimate {
        empirical: report.rate_estimate,
        predicted: lambda2 * lambda2,
    })
}

/// Factorization `W_ij = u_i H_ij u_j` of a doubly-stochastic affinity, with
/// `u_i = d_i exp(−‖x_i‖²/ε)` and `H_ij = exp(2⟨x_i, x_j⟩/ε)` off the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeDecomposition {
    pub u: Vector,
    pub h: SymMatrix,
}

impl GaugeDecomposition {
    pub fn reconstruct(&self, i: usize, j: usize) -> f64 {
        self.u[i] * self.h.get(i, j) * self.u[j]
    }
}

pub fn gauge_decompose(x: &DataMatrix, w: &AffinityMatrix) -> Result<GaugeDecomposition> {
    w.require(Variant::Doubly)?;
    if x.n() != w.n() {
        return Err(Error::Dimension(format!(
            "{} points for a {}x{} affinity matrix",
            x.n(),
            w.n(),
            w.n()
        )));
    }
    let eps = w.epsilon();
    let u: Vec<f64> = (0..x.n())
        .map(|i| w.scaling()[i] * (-x.sq_norm(i) / eps).exp())
        .collect();
    let h = SymMatrix::from_upper_fn(x.n(), |i, j| {
        if i == j {
            0.0
        } else {
            (2.0 * dot(x.point(i), x.point(j)) / eps).exp()
        }
    });
    Ok(GaugeDecomposition { u: u.into(), h })
}

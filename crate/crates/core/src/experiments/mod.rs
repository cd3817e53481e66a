//! Desk-scale studies comparing the three normalizations under noise, and the
//! metrics they report.

mod bias;
mod convergence;
mod eigen;
mod knn;
mod ot;
mod probe;
mod scrna;

pub use bias::{bias_ratio_check, BiasRatio};
pub use convergence::{
    read_convergence_csv, run_convergence_study, ConvergenceRow, ConvergenceStudySpec, StudyResult,
};
pub use eigen::{run_eigen_study, EigenStudyResult, EigenStudySpec, EigenVariantResult};
pub use knn::{knn_curve, knn_inconsistency};
pub use ot::{
    ot_objective, ot_optimality_against, ot_optimality_test, OtObjective, OtOptimality,
    OT_TOLERANCE,
};
pub use probe::{geometric_grid, probe_epsilon, ProbeOutcome, ProbeResult};
pub use scrna::{run_labeled_study, run_scrna_study, KnnCurve, ScrnaStudyConfig, ScrnaStudyResult};

use crate::error::Error;
use crate::kernel::KernelMatrix;
use crate::normalize::{self, AffinityMatrix, SinkhornConfig, Variant};

/// The three normalizations of one kernel, in [`Variant::ALL`] order.
pub(crate) fn all_normalizations(
    k: &KernelMatrix,
    cfg: &SinkhornConfig,
) -> crate::Result<Vec<AffinityMatrix>> {
    let (doubly, _) = normalize::sinkhorn_symmetric(k, cfg)?;
    let row = normalize::row_stochastic(k)?;
    let sym = normalize::symmetric_normalize(k)?;
    debug_assert_eq!(
        [doubly.variant(), row.variant(), sym.variant()],
        Variant::ALL
    );
    Ok(vec![doubly, row, sym])
}

/// Least-squares slope of `ys` against `xs`; `None` with fewer than two points
/// or a degenerate abscissa.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (sxx > 0.0 && slope.is_finite()).then_some(slope)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    let rho = cov / (vx * vy).sqrt();
    rho.is_finite().then_some(rho)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

pub(crate) fn is_sinkhorn_failure(e: &Error) -> bool {
    matches!(e, Error::NotConverged(_) | Error::NotScalable(_))
}

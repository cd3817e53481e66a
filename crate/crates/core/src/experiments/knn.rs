//! Fraction of nearest neighbors with a different label.

use crate::error::{Error, Result};
use crate::linalg::SquareView;

/// Indices of the `k` largest entries of row `i`, excluding `i` itself.
/// Ties go to the lower index.
fn top_neighbors(w: &(impl SquareView + ?Sized), i: usize, k: usize) -> Vec<usize> {
    let row = w.row(i);
    let mut idx: Vec<usize> = (0..row.len()).filter(|&j| j != i).collect();
    let cmp = |a: &usize, b: &usize| row[*b].total_cmp(&row[*a]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_by(cmp);
    idx
}

fn check(n: usize, labels: &[i64], k: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for a {n}x{n} affinity matrix",
            labels.len()
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::Input(format!(
            "k must be in 1..={}, got {k}",
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

/// Mean over points of the fraction of their `k` nearest neighbors (largest
/// row entries) whose label differs.
pub fn knn_inconsistency(w: &(impl SquareView + ?Sized), labels: &[i64], k: usize) -> Result<f64> {
    Ok(*knn_curve(w, labels, k)?.last().expect("k >= 1"))
}

/// [`knn_inconsistency`] for every `k` in `1..=k_max`, sorting each row once.
pub fn knn_curve(w: &(impl SquareView + ?Sized), labels: &[i64], k_max: usize) -> Result<Vec<f64>> {
    let n = w.dim();
    check(n, labels, k_max)?;
    let mut mismatches = vec![0usize; k_max];
    for i in 0..n {
        let mut seen = 0;
        for (slot, j) in top_neighbors(w, i, k_max).into_iter().enumerate() {
            seen += usize::from(labels[j] != labels[i]);
            mismatches[slot] += seen;
        }
    }
    Ok(mismatches
        .iter()
        .enumerate()
        .map(|(slot, &bad)| bad as f64 / (n * (slot + 1)) as f64)
        .collect())
}

//! Search for the smallest kernel width at which Sinkhorn still converges.

use crate::error::{Error, Result};
use crate::kernel::{kernel_from_sq_dists, pairwise_sq_dists, DataMatrix};
use crate::normalize::{sinkhorn_symmetric, SinkhornConfig};

/// `count` values from `lo` to `hi`, evenly spaced in log scale.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || count == 0 || (count == 1 && lo != hi) {
        return Err(Error::Input(format!(
            "need 0 < lo <= hi and a positive count, got lo = {lo}, hi = {hi}, count = {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi / lo).ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                lo * (step * i as f64).exp()
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeOutcome {
    pub epsilon: f64,
    pub converged: bool,
    /// Sinkhorn iterations used; 0 when the kernel was not scalable at all.
    pub iters: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult {
    /// Tried widths, largest first.
    pub outcomes: Vec<ProbeOutcome>,
    pub smallest_convergent: Option<f64>,
}

/// Tries the widths of `grid` from largest to smallest and stops at the first
/// failure after a success; the last success is the answer.
pub fn probe_epsilon(x: &DataMatrix, grid: &[f64], cfg: &SinkhornConfig) -> Result<ProbeResult> {
    if grid.is_empty() {
        return Err(Error::Input("empty epsilon grid".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    let d = pairwise_sq_dists(x);
    let mut outcomes = Vec::new();
    let mut smallest = None;
    for eps in grid {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Input(format!(
                "kernel width must be positive, got {eps}"
            )));
        }
        let outcome = match sinkhorn_symmetric(&kernel_from_sq_dists(&d, eps), cfg) {
            Ok((_, report)) => ProbeOutcome {
                epsilon: eps,
                converged: true,
                iters: report.iters,
            },
            Err(Error::NotConverged(report)) => ProbeOutcome {
                epsilon: eps,
                converged: false,
                iters: report.iters,
            },
            Err(Error::NotScalable(_)) => ProbeOutcome {
                epsilon: eps,
                converged: false,
                iters: 0,
            },
            Err(e) => return Err(e),
        };
        outcomes.push(outcome);
        if outcome.converged {
            smallest = Some(eps);
        } else if smallest.is_some() {
            break;
        }
    }
    Ok(ProbeResult {
        outcomes,
        smallest_convergent: smallest,
    })
}

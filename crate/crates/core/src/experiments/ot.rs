//! Entropy-regularized transport objective and a randomized optimality check
//! for the doubly-stochastic normalization.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::datagen::RngSeed;
use crate::error::{Error, Result};
use crate::kernel::{gaussian_kernel, pairwise_sq_dists, DataMatrix, KernelMatrix};
use crate::linalg::SymMatrix;
use crate::normalize::{sinkhorn_symmetric, AffinityMatrix, SinkhornConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OtObjective {
    /// `Σ_ij ‖x_i − x_j‖² W_ij`.
    pub transport_cost: f64,
    /// `Σ_ij W_ij ln W_ij`, with `0 ln 0 = 0`.
    pub neg_entropy: f64,
    /// `transport_cost + ε · neg_entropy`.
    pub total: f64,
}

/// Objective of `w` on the points `x`, with `ε` taken from `w`.
pub fn ot_objective(x: &DataMatrix, w: &AffinityMatrix) -> Result<OtObjective> {
    let n = w.n();
    if x.n() != n {
        return Err(Error::Dimension(format!(
            "{} points for a {n}x{n} affinity matrix",
            x.n()
        )));
    }
    let d = pairwise_sq_dists(x);
    let (mut cost, mut ent) = (0.0, 0.0);
    for i in 0..n {
        for (j, &v) in w.row(i).iter().enumerate() {
            if v < 0.0 {
                return Err(Error::Input(format!("negative affinity {v} at ({i}, {j})")));
            }
            if v > 0.0 {
                cost += d.get(i, j) * v;
                ent += v * v.ln();
            }
        }
    }
    Ok(OtObjective {
        transport_cost: cost,
        neg_entropy: ent,
        total: cost + w.epsilon() * ent,
    })
}

/// Outcome of comparing `W^(d)` against feasible competitors.
#[derive(Clone, Debug, PartialEq)]
pub struct OtOptimality {
    pub passed: bool,
    pub optimum: OtObjective,
    /// Smallest `competitor.total − optimum.total` seen.
    pub min_gap: f64,
    pub competitors: usize,
}

/// Slack allowed when comparing objective totals.
pub const OT_TOLERANCE: f64 = 1e-9;

/// Checks `w_d`'s objective against each of `competitors` (doubly-stochastic,
/// symmetric, zero diagonal); all objectives use `w_d`'s `ε`.
pub fn ot_optimality_against(
    x: &DataMatrix,
    w_d: &AffinityMatrix,
    competitors: &[AffinityMatrix],
) -> Result<OtOptimality> {
    let optimum = ot_objective(x, w_d)?;
    let mut min_gap = f64::INFINITY;
    for c in competitors {
        if c.n() != w_d.n() {
            return Err(Error::Dimension("competitor size differs".into()));
        }
        let rebased = AffinityMatrix::from_parts(
            c.to_matrix(),
            c.variant(),
            c.scaling().clone(),
            w_d.epsilon(),
        )?;
        min_gap = min_gap.min(ot_objective(x, &rebased)?.total - optimum.total);
    }
    Ok(OtOptimality {
        passed: min_gap >= -OT_TOLERANCE,
        optimum,
        min_gap,
        competitors: competitors.len(),
    })
}

const MAX_RETRIES: usize = 10;

/// Random positive symmetric matrix with zero diagonal and entries in `(0, 1]`.
/// Even-numbered draws are independent uniforms; odd ones are log-normal
/// perturbations of `k`, which land close to the optimum.
fn random_feasible_gram(k: &SymMatrix, draw: usize, rng: &mut impl Rng) -> SymMatrix {
    let n = k.n();
    let mut g = if draw % 2 == 0 {
        SymMatrix::from_upper_fn(n, |i, j| {
            if i == j {
                0.0
            } else {
                rng.random_range(0.05..=1.0)
            }
        })
    } else {
        let spread = 0.02 + 0.3 * rng.random::<f64>();
        SymMatrix::from_upper_fn(n, |i, j| {
            if i == j {
                0.0
            } else {
                let z: f64 = rng.sample(StandardNormal);
                k.get(i, j) * (spread * z).exp()
            }
        })
    };
    let top = g.as_slice().iter().cloned().fold(0.0, f64::max);
    if top > 0.0 {
        g = SymMatrix::from_upper_fn(n, |i, j| g.get(i, j) / top);
    }
    g
}

/// Builds the Gaussian kernel of `x`, its doubly-stochastic normalization and
/// `competitors` random doubly-stochastic matrices, then compares objectives.
/// A competitor whose scaling fails is redrawn, at most ten times.
pub fn ot_optimality_test(
    x: &DataMatrix,
    epsilon: f64,
    competitors: usize,
    seed: RngSeed,
) -> Result<OtOptimality> {
    let cfg = SinkhornConfig::default();
    let k = gaussian_kernel(x, epsilon)?;
    let (w_d, _) = sinkhorn_symmetric(&k, &cfg)?;
    let mut rng = seed.rng();
    let mut pool = Vec::with_capacity(competitors);
    for draw in 0..competitors {
        let mut attempt = 0;
        let w = loop {
            let g = random_feasible_gram(k.gram(), draw, &mut rng);
            let scaled =
                KernelMatrix::from_gram(g, epsilon).and_then(|kc| sinkhorn_symmetric(&kc, &cfg));
            match scaled {
                Ok((w, _)) => break w,
                Err(_) if attempt + 1 < MAX_RETRIES => attempt += 1,
                Err(e) => {
                    return Err(Error::Study(format!(
                        "could not scale a competitor after {MAX_RETRIES} attempts: {e}"
                    )))
                }
            }
        };
        pool.push(w);
    }
    ot_optimality_against(x, &w_d, &pool)
}

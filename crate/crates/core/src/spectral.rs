//! Leading eigenpairs of affinity matrices, 2D spectral embeddings, and a
//! subspace-level comparison between two decompositions.

use crate::error::{Error, Result};
use crate::linalg::{self, fix_sign, orthonormalize, SymMatrix, Vector};
use crate::normalize::{AffinityMatrix, Variant};

/// Top-k eigenpairs of an affinity matrix, largest eigenvalue first.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Unit-norm, sign-fixed. For the row variant these are right eigenvectors
    /// and are not mutually orthogonal.
    pub eigenvectors: Vec<Vector>,
    pub source_variant: Variant,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Length of each eigenvector.
    pub fn n(&self) -> usize {
        self.eigenvectors.first().map_or(0, |v| v.len())
    }
}

/// Leading `k` eigenpairs of `w`.
///
/// The row-stochastic variant is not symmetric; it is handled through the
/// similarity `W⁽ʳ⁾ = diag(r)^{1/2} W⁽ˢ⁾ diag(r)^{-1/2}`, so its eigenvalues are
/// those of `W⁽ˢ⁾` and its right eigenvectors are `diag(r)^{1/2} ψ⁽ˢ⁾`.
pub fn decompose(w: &AffinityMatrix, k: usize) -> Result<SpectralDecomposition> {
    let n = w.n();
    if k == 0 || k > n {
        return Err(Error::Dimension(format!(
            "requested {k} eigenpairs of a {n}x{n} affinity matrix"
        )));
    }
    let (eigenvalues, eigenvectors) = match w.as_sym() {
        Some(sym) => split(linalg::sym_eigen_topk(sym, k)?),
        None => {
            let root: Vec<f64> = w.scaling().iter().map(|r| r.sqrt()).collect();
            let sym = SymMatrix::from_upper_fn(n, |i, j| w.get(i, j) * root[j] / root[i]);
            let (values, vectors) = split(linalg::sym_eigen_topk(&sym, k)?);
            let mapped = vectors
                .into_iter()
                .map(|v| {
                    let mut out: Vec<f64> = v.iter().zip(&root).map(|(a, b)| a * b).collect();
                    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
                    out.iter_mut().for_each(|x| *x /= norm);
                    fix_sign(&mut out);
                    Vector::new(out)
                })
                .collect();
            (values, mapped)
        }
    };
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        source_variant: w.variant(),
    })
}

fn split(pairs: Vec<linalg::EigenPair>) -> (Vec<f64>, Vec<Vector>) {
    pairs.into_iter().map(|p| (p.value, p.vector)).unzip()
}

/// Points placed at `(ψ₂[i], ψ₃[i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding2D {
    pub coords: Vec<[f64; 2]>,
}

impl Embedding2D {
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Coefficient of variation of the distances from the centroid.
    ///
    /// Small values mean the points lie close to a circle.
    pub fn radius_cv(&self) -> f64 {
        let n = self.coords.len() as f64;
        let cx = self.coords.iter().map(|c| c[0]).sum::<f64>() / n;
        let cy = self.coords.iter().map(|c| c[1]).sum::<f64>() / n;
        let radii: Vec<f64> = self
            .coords
            .iter()
            .map(|c| (c[0] - cx).hypot(c[1] - cy))
            .collect();
        let mean = radii.iter().sum::<f64>() / n;
        let var = radii.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() / mean
    }
}

pub fn embed2d(dec: &SpectralDecomposition) -> Result<Embedding2D> {
    if dec.len() < 3 {
        return Err(Error::Dimension(format!(
            "a 2D embedding needs 3 eigenpairs, decomposition has {}",
            dec.len()
        )));
    }
    let (a, b) = (&dec.eigenvectors[1], &dec.eigenvectors[2]);
    Ok(Embedding2D {
        coords: a.iter().zip(b.iter()).map(|(&x, &y)| [x, y]).collect(),
    })
}

/// Mean squared canonical correlation between the spans of the leading `k`
/// eigenvectors of `a` and of `b`: `‖Q_aᵀ Q_b‖_F² / k` for orthonormal bases
/// `Q_a`, `Q_b`. Equals 1 exactly when the two subspaces coincide.
pub fn subspace_affinity(
    a: &SpectralDecomposition,
    b: &SpectralDecomposition,
    k: usize,
) -> Result<f64> {
    if k == 0 || a.len() < k || b.len() < k {
        return Err(Error::Dimension(format!(
            "subspace of dimension {k} requested from decompositions with {} and {} vectors",
            a.len(),
            b.len()
        )));
    }
    if a.n() != b.n() {
        return Err(Error::Dimension(format!(
            "eigenvectors have lengths {} and {}",
            a.n(),
            b.n()
        )));
    }
    let qa = orthonormalize(&a.eigenvectors[..k]);
    let qb = orthonormalize(&b.eigenvectors[..k]);
    if qa.len() < k || qb.len() < k {
        return Err(Error::Input(
            "leading eigenvectors are linearly dependent".into(),
        ));
    }
    let total: f64 = qa
        .iter()
        .flat_map(|u| qb.iter().map(move |v| u.dot(v).powi(2)))
        .sum();
    Ok((total / k as f64).clamp(0.0, 1.0))
}

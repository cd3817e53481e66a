//! How well the noisy kernel factors as the clean kernel times per-point decay.

use crate::error::{Error, Result};
use crate::kernel::{gaussian_kernel, DataMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasRatio {
    /// `max_{i≠j} |ln K̃_ij − ln K_ij + (mag_i + mag_j)/ε|`.
    pub max_abs_log_ratio: f64,
    /// Pairs skipped because `K_ij` or `K̃_ij` underflowed to zero.
    pub excluded: usize,
}

/// Compares the noisy kernel of `noisy` against `e^{−mag_i/ε} K_ij e^{−mag_j/ε}`
/// built from the clean points and the analytic noise magnitudes.
pub fn bias_ratio_check(
    clean: &DataMatrix,
    noisy: &DataMatrix,
    noise_mags: &[f64],
    epsilon: f64,
) -> Result<BiasRatio> {
    if clean.n() != noisy.n() || clean.m() != noisy.m() || noise_mags.len() != clean.n() {
        return Err(Error::Dimension(format!(
            "clean {}x{}, noisy {}x{}, {} noise magnitudes",
            clean.n(),
            clean.m(),
            noisy.n(),
            noisy.m(),
            noise_mags.len()
        )));
    }
    let k = gaussian_kernel(clean, epsilon)?;
    let kn = gaussian_kernel(noisy, epsilon)?;
    let (k, kn) = (k.gram(), kn.gram());
    let mut worst = 0.0f64;
    let mut excluded = 0;
    for i in 0..clean.n() {
        for j in i + 1..clean.n() {
            let (a, b) = (k.get(i, j), kn.get(i, j));
            if a == 0.0 || b == 0.0 {
                excluded += 1;
                continue;
            }
            let r = b.ln() - a.ln() + (noise_mags[i] + noise_mags[j]) / epsilon;
            worst = worst.max(r.abs());
        }
    }
    Ok(BiasRatio {
        max_abs_log_ratio: worst,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_shift_is_recovered() {
        // Noise orthogonal to the data and to each other, with known lengths.
        let x = DataMatrix::from_rows(&[
            vec![0.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
        ])
        .unwrap();
        let mut xn = x.clone();
        let lens = [0.3, 0.4, 0.0];
        xn.point_mut(0)[2] = lens[0];
        xn.point_mut(1)[3] = lens[1];
        let mags: Vec<f64> = lens.iter().map(|l| l * l).collect();
        let r = bias_ratio_check(&x, &xn, &mags, 0.5).unwrap();
        assert!(r.max_abs_log_ratio < 1e-14, "{r:?}");
        assert_eq!(r.excluded, 0);
    }

    #[test]
    fn underflow_is_counted() {
        let x = DataMatrix::from_rows(&[vec![0.0], vec![100.0], vec![0.1]]).unwrap();
        let r = bias_ratio_check(&x, &x, &[0.0; 3], 1e-3).unwrap();
        assert_eq!(r.excluded, 2);
        assert_eq!(r.max_abs_log_ratio, 0.0);
    }

    #[test]
    fn shapes_checked() {
        let x = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(bias_ratio_check(&x, &x, &[0.0; 2], 1.0).is_err());
    }
}

//! Leading eigenvectors of clean vs. ball-noised circle data.

use std::path::{Path, PathBuf};

use super::all_normalizations;
use crate::datagen::{add_ball_noise, gen_circle, BallNoiseSpec, CircleSpec, RngSeed};
use crate::error::Result;
use crate::io::{fmt_f64, write_table};
use crate::kernel::gaussian_kernel;
use crate::normalize::{SinkhornConfig, Variant};
use crate::spectral::{decompose, embed2d, subspace_affinity, Embedding2D};

#[derive(Clone, Debug, PartialEq)]
pub struct EigenStudySpec {
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub ball: BallNoiseSpec,
    pub seed: RngSeed,
    /// Number of leading eigenvectors compared.
    pub k: usize,
    pub sinkhorn: SinkhornConfig,
}

impl EigenStudySpec {
    pub fn new(n: usize, m: usize, epsilon: f64, ball: BallNoiseSpec, seed: RngSeed) -> Self {
        EigenStudySpec {
            n,
            m,
            epsilon,
            ball,
            seed,
            k: 5,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenVariantResult {
    pub variant: Variant,
    pub subspace_affinity: f64,
    pub clean: Embedding2D,
    pub noisy: Embedding2D,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenStudyResult {
    pub thetas: Vec<f64>,
    /// In [`Variant::ALL`] order.
    pub variants: Vec<EigenVariantResult>,
}

impl EigenStudyResult {
    pub fn get(&self, variant: Variant) -> &EigenVariantResult {
        self.variants
            .iter()
            .find(|v| v.variant == variant)
            .expect("every variant is present")
    }

    /// Summary rows to `path`, embeddings in long format to
    /// `<stem>_embeddings.csv` next to it.
    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_table(
            path,
            &[
                "variant",
                "subspace_affinity",
                "clean_radius_cv",
                "noisy_radius_cv",
            ],
            self.variants.iter().map(|v| {
                vec![
                    v.variant.to_string(),
                    fmt_f64(v.subspace_affinity),
                    fmt_f64(v.clean.radius_cv()),
                    fmt_f64(v.noisy.radius_cv()),
                ]
            }),
        )?;
        write_table(
            embeddings_path(path),
            &["variant", "data", "index", "theta", "x", "y"],
            self.variants.iter().flat_map(|v| {
                [("clean", &v.clean), ("noisy", &v.noisy)]
                    .into_iter()
                    .flat_map(move |(tag, e)| {
                        e.coords.iter().enumerate().map(move |(i, c)| {
                            vec![
                                v.variant.to_string(),
                                tag.to_string(),
                                i.to_string(),
                                fmt_f64(self.thetas[i]),
                                fmt_f64(c[0]),
                                fmt_f64(c[1]),
                            ]
                        })
                    })
            }),
        )
    }
}

fn embeddings_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("eigen");
    path.with_file_name(format!("{stem}_embeddings.csv"))
}

/// Samples a circle, adds angle-dependent ball noise and compares the leading
/// `k` eigenvectors of each normalization before and after.
pub fn run_eigen_study(spec: &EigenStudySpec) -> Result<EigenStudyResult> {
    let circle = gen_circle(&CircleSpec::new(spec.n, spec.m), spec.seed.derive(&[0]))?;
    let noisy = add_ball_noise(
        &circle.points,
        &circle.thetas,
        &spec.ball,
        spec.seed.derive(&[1]),
    )?;
    let clean = all_normalizations(
        &gaussian_kernel(&circle.points, spec.epsilon)?,
        &spec.sinkhorn,
    )?;
    let noisy = all_normalizations(&gaussian_kernel(&noisy, spec.epsilon)?, &spec.sinkhorn)?;
    let k = spec.k.max(3);
    let variants = clean
        .iter()
        .zip(&noisy)
        .map(|(c, n)| {
            let (dc, dn) = (decompose(c, k)?, decompose(n, k)?);
            Ok(EigenVariantResult {
                variant: c.variant(),
                subspace_affinity: subspace_affinity(&dc, &dn, spec.k)?,
                clean: embed2d(&dc)?,
                noisy: embed2d(&dn)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(EigenStudyResult {
        thetas: circle.thetas,
        variants,
    })
}

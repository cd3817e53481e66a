//! Cell-type consistency of nearest neighbors under each normalization.

use std::path::Path;

use super::{all_normalizations, knn_curve};
use crate::datagen::{gen_scrna, LabeledDataset, RngSeed, ScrnaSpec};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_matrix_csv, write_table};
use crate::kernel::gaussian_kernel;
use crate::linalg::Matrix;
use crate::normalize::{AffinityMatrix, SinkhornConfig, Variant};

#[derive(Clone, Debug, PartialEq)]
pub struct ScrnaStudyConfig {
    pub epsilon: f64,
    /// Curves cover `k = 1..=k_max`.
    pub k_max: usize,
    pub sinkhorn: SinkhornConfig,
}

impl ScrnaStudyConfig {
    pub fn new(epsilon: f64) -> Self {
        ScrnaStudyConfig {
            epsilon,
            k_max: 20,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnCurve {
    pub variant: Variant,
    /// `values[k - 1]` is the inconsistency at `k`.
    pub values: Vec<f64>,
}

impl KnnCurve {
    pub fn at(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScrnaStudyResult {
    pub dataset: LabeledDataset,
    /// In [`Variant::ALL`] order, like `affinities`.
    pub curves: Vec<KnnCurve>,
    pub affinities: Vec<AffinityMatrix>,
}

impl ScrnaStudyResult {
    pub fn curve(&self, variant: Variant) -> &KnnCurve {
        self.curves
            .iter()
            .find(|c| c.variant == variant)
            .expect("every variant has a curve")
    }

    /// Long format: `variant,k,inconsistency`.
    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_table(
            path,
            &["variant", "k", "inconsistency"],
            self.curves.iter().flat_map(|c| {
                c.values.iter().enumerate().map(move |(i, &v)| {
                    vec![c.variant.to_string(), (i + 1).to_string(), fmt_f64(v)]
                })
            }),
        )
    }

    /// Writes `log10_<variant>.csv` for every variant into `dir`; the zero
    /// diagonal becomes `-inf`.
    pub fn dump_log10(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for w in &self.affinities {
            let m = w.to_matrix();
            let logged = Matrix::from_row_major(
                m.rows(),
                m.cols(),
                m.as_slice().iter().map(|v| v.log10()).collect(),
            )?;
            write_matrix_csv(dir.join(format!("log10_{}.csv", w.variant())), &logged)?;
        }
        Ok(())
    }
}

/// Normalizes the kernel of `ds` three ways and computes kNN inconsistency
/// curves against its labels.
pub fn run_labeled_study(ds: &LabeledDataset, cfg: &ScrnaStudyConfig) -> Result<ScrnaStudyResult> {
    let n = ds.data.n();
    if cfg.k_max == 0 || cfg.k_max >= n {
        return Err(Error::Input(format!(
            "k_max must be in 1..={}, got {}",
            n.saturating_sub(1),
            cfg.k_max
        )));
    }
    let k = gaussian_kernel(&ds.data, cfg.epsilon)?;
    let affinities = all_normalizations(&k, &cfg.sinkhorn)?;
    let curves = affinities
        .iter()
        .map(|w| {
            Ok(KnnCurve {
                variant: w.variant(),
                values: knn_curve(w, &ds.labels, cfg.k_max)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScrnaStudyResult {
        dataset: ds.clone(),
        curves,
        affinities,
    })
}

/// Simulates `spec` and runs [`run_labeled_study`] on the result.
pub fn run_scrna_study(
    spec: &ScrnaSpec,
    cfg: &ScrnaStudyConfig,
    seed: RngSeed,
) -> Result<ScrnaStudyResult> {
    run_labeled_study(&gen_scrna(spec, seed)?, cfg)
}

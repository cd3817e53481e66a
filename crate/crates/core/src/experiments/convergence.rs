//! Clean-vs-noisy Frobenius error of each normalization as the ambient dimension grows.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{all_normalizations, fit_slope, is_sinkhorn_failure};
use crate::datagen::{
    add_gaussian_hetero_noise, gen_circle, CircleSpec, GaussianHeteroNoiseSpec, RngSeed,
};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_table, write_table};
use crate::kernel::gaussian_kernel;
use crate::linalg::frobenius_distance_sq;
use crate::normalize::{SinkhornConfig, Variant};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudySpec {
    pub n: usize,
    /// Ambient dimensions, ascending.
    pub dims: Vec<usize>,
    pub trials: usize,
    pub epsilon: f64,
    pub noise: GaussianHeteroNoiseSpec,
    pub seed: RngSeed,
    pub sinkhorn: SinkhornConfig,
    /// Inclusive `m` range used for the slope fit; the upper half of `dims` when absent.
    pub fit_window: Option<(usize, usize)>,
}

impl ConvergenceStudySpec {
    /// 200 points, `m = 10^2, 10^2.5, 10^3, 10^3.5`, five trials, `ε = 0.1`.
    pub fn desk(seed: RngSeed) -> Self {
        ConvergenceStudySpec {
            n: 200,
            dims: log_dims(2.0, 3.5, 4),
            trials: 5,
            epsilon: 0.1,
            noise: GaussianHeteroNoiseSpec::default(),
            seed,
            sinkhorn: SinkhornConfig::default(),
            fit_window: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 3 {
            return Err(Error::Input(format!(
                "convergence study needs at least 3 dimensions, got {}",
                self.dims.len()
            )));
        }
        if self.dims.windows(2).any(|w| w[0] >= w[1]) || self.dims[0] < 2 {
            return Err(Error::Input(
                "dims must be strictly ascending and at least 2".into(),
            ));
        }
        if self.trials == 0 || self.n < 3 {
            return Err(Error::Input(format!(
                "need trials >= 1 and n >= 3, got trials = {}, n = {}",
                self.trials, self.n
            )));
        }
        self.noise.validate()
    }

    pub fn window(&self) -> (usize, usize) {
        self.fit_window.unwrap_or_else(|| {
            let upper = &self.dims[self.dims.len() / 2..];
            (upper[0], *upper.last().expect("dims validated non-empty"))
        })
    }
}

/// `count` dimensions `round(10^e)` for `e` evenly spaced in `[lo_exp, hi_exp]`.
pub fn log_dims(lo_exp: f64, hi_exp: f64, count: usize) -> Vec<usize> {
    (0..count)
        .map(|i| {
            let t = if count == 1 {
                0.0
            } else {
                i as f64 / (count - 1) as f64
            };
            10f64.powf(lo_exp + t * (hi_exp - lo_exp)).round() as usize
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub m: usize,
    pub variant: Variant,
    /// Mean over successful trials of `‖W̃ − W‖_F²`.
    pub mean_sq_error: f64,
    pub trials_ok: usize,
    pub trials_failed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    /// Sorted by `m`, then variant.
    pub rows: Vec<ConvergenceRow>,
    pub window: (usize, usize),
    /// Log-log slope per variant; `None` when undefined (e.g. zero error).
    pub slopes: Vec<(Variant, Option<f64>)>,
}

impl StudyResult {
    pub fn slope(&self, variant: Variant) -> Option<f64> {
        self.slopes
            .iter()
            .find(|(v, _)| *v == variant)
            .and_then(|(_, s)| *s)
    }

    pub fn mean_error(&self, m: usize, variant: Variant) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.m == m && r.variant == variant)
            .map(|r| r.mean_sq_error)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.rows.iter().map(|r| r.m).collect();
        d.dedup();
        d
    }

    fn from_rows(rows: Vec<ConvergenceRow>, window: (usize, usize)) -> Self {
        let slopes = Variant::ALL
            .iter()
            .map(|&v| {
                let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                    .iter()
                    .filter(|r| r.variant == v && r.m >= window.0 && r.m <= window.1)
                    .map(|r| ((r.m as f64).ln(), r.mean_sq_error.ln()))
                    .unzip();
                let slope = if ys.iter().all(|y| y.is_finite()) {
                    fit_slope(&xs, &ys)
                } else {
                    None
                };
                (v, slope)
            })
            .collect();
        StudyResult {
            rows,
            window,
            slopes,
        }
    }

    /// Writes the per-`(m, variant)` rows to `path` and the fitted slopes to
    /// `<stem>_fit.csv` next to it.
    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_table(
            path,
            &[
                "m",
                "variant",
                "mean_sq_frobenius_error",
                "trials_ok",
                "trials_failed",
            ],
            self.rows.iter().map(|r| {
                vec![
                    r.m.to_string(),
                    r.variant.to_string(),
                    fmt_f64(r.mean_sq_error),
                    r.trials_ok.to_string(),
                    r.trials_failed.to_string(),
                ]
            }),
        )?;
        write_table(
            fit_path(path),
            &["variant", "slope", "window_lo", "window_hi"],
            self.slopes.iter().map(|(v, s)| {
                vec![
                    v.to_string(),
                    s.map_or_else(|| "undefined".into(), fmt_f64),
                    self.window.0.to_string(),
                    self.window.1.to_string(),
                ]
            }),
        )
    }
}

fn fit_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("convergence");
    path.with_file_name(format!("{stem}_fit.csv"))
}

/// Reads a [`StudyResult`] written by [`StudyResult::export_csv`].
pub fn read_convergence_csv(path: impl AsRef<Path>) -> Result<StudyResult> {
    let path = path.as_ref();
    let bad = |line: usize, msg: &str| Error::parse(path, line, msg.to_string());
    let (_, rows) = read_table(path)?;
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            if r.len() != 5 {
                return Err(bad(line, "expected 5 columns"));
            }
            Ok(ConvergenceRow {
                m: r[0].parse().map_err(|_| bad(line, "invalid m"))?,
                variant: r[1].parse()?,
                mean_sq_error: r[2].parse().map_err(|_| bad(line, "invalid error"))?,
                trials_ok: r[3].parse().map_err(|_| bad(line, "invalid count"))?,
                trials_failed: r[4].parse().map_err(|_| bad(line, "invalid count"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_path(path);
    let (_, fit_rows) = read_table(&fit)?;
    let window = fit_rows
        .first()
        .and_then(|r| Some((r.get(2)?.parse().ok()?, r.get(3)?.parse().ok()?)))
        .ok_or_else(|| Error::parse(&fit, 2, "missing fit window"))?;
    let mut slopes = Vec::new();
    for r in &fit_rows {
        let v = r[0].parse()?;
        let s = match r[1].as_str() {
            "undefined" => None,
            s => Some(
                s.parse()
                    .map_err(|_| Error::parse(&fit, 2, "invalid slope"))?,
            ),
        };
        slopes.push((v, s));
    }
    Ok(StudyResult {
        rows,
        window,
        slopes,
    })
}

/// Errors of one `(m, trial)` cell in [`Variant::ALL`] order, or `None` when
/// Sinkhorn failed on the clean or noisy kernel.
fn run_cell(spec: &ConvergenceStudySpec, m: usize, trial: usize) -> Result<Option<[f64; 3]>> {
    let cell = spec.seed.derive(&[m as u64, trial as u64]);
    let circle = gen_circle(&CircleSpec::new(spec.n, m), cell.derive(&[0]))?;
    let (noisy, _) = add_gaussian_hetero_noise(&circle.points, &spec.noise, cell.derive(&[1]))?;
    let clean_k = gaussian_kernel(&circle.points, spec.epsilon)?;
    let noisy_k = gaussian_kernel(&noisy, spec.epsilon)?;
    let (clean, noisy) = match (
        all_normalizations(&clean_k, &spec.sinkhorn),
        all_normalizations(&noisy_k, &spec.sinkhorn),
    ) {
        (Ok(c), Ok(n)) => (c, n),
        (Err(e), _) | (_, Err(e)) if is_sinkhorn_failure(&e) => return Ok(None),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let mut out = [0.0; 3];
    for (slot, (c, n)) in out.iter_mut().zip(clean.iter().zip(&noisy)) {
        *slot = frobenius_distance_sq(c, n)?;
    }
    Ok(Some(out))
}

/// Runs every `(m, trial)` cell (in parallel; each cell has its own derived
/// seed, so the result does not depend on scheduling), averages the squared
/// errors over trials and fits log-log slopes over the configured window.
pub fn run_convergence_study(spec: &ConvergenceStudySpec) -> Result<StudyResult> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = spec
        .dims
        .iter()
        .flat_map(|&m| (0..spec.trials).map(move |t| (m, t)))
        .collect();
    let outcomes = cells
        .par_iter()
        .map(|&(m, t)| run_cell(spec, m, t))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (di, &m) in spec.dims.iter().enumerate() {
        let chunk = &outcomes[di * spec.trials..(di + 1) * spec.trials];
        let ok: Vec<&[f64; 3]> = chunk.iter().flatten().collect();
        if ok.is_empty() {
            return Err(Error::Study(format!(
                "Sinkhorn failed in all {} trials at m = {m}; increase epsilon (currently {})",
                spec.trials, spec.epsilon
            )));
        }
        for (vi, &variant) in Variant::ALL.iter().enumerate() {
            rows.push(ConvergenceRow {
                m,
                variant,
                mean_sq_error: ok.iter().map(|e| e[vi]).sum::<f64>() / ok.len() as f64,
                trials_ok: ok.len(),
                trials_failed: chunk.len() - ok.len(),
            });
        }
    }
    Ok(StudyResult::from_rows(rows, spec.window()))
}

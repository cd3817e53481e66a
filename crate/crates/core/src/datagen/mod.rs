//! Synthetic datasets and noise models, plus ingestion of count matrices.
//!
//! Every generator is a deterministic function of its spec and an [`RngSeed`].
//! The underlying stream is ChaCha8, which produces the same sequence on every
//! platform.

mod mtx;

pub use mtx::{
    load_labeled, load_matrix_market, read_labels, read_matrix_market, write_labels,
    write_matrix_market, CountMatrix,
};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::DataMatrix;
use crate::linalg::Vector;

/// Seed of a reproducible random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed keyed by `keys`, e.g. `(m, trial)` of a study cell.
    ///
    /// The result depends only on `self` and `keys`, so cells can be generated
    /// in any order or in parallel.
    pub fn derive(self, keys: &[u64]) -> RngSeed {
        let mut h = splitmix64(self.0);
        for &k in keys {
            h = splitmix64(h ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019)));
        }
        RngSeed(h)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Points on the unit circle embedded in `R^m` by a random 2-frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleSpec {
    pub n: usize,
    pub m: usize,
    /// Explicit angles in radians; drawn uniformly from `[0, 2π)` when absent.
    pub thetas: Option<Vec<f64>>,
    /// Embed with the first two coordinate axes instead of a random frame.
    pub identity_frame: bool,
}

impl CircleSpec {
    pub fn new(n: usize, m: usize) -> Self {
        CircleSpec {
            n,
            m,
            thetas: None,
            identity_frame: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircleSample {
    pub points: DataMatrix,
    pub thetas: Vec<f64>,
}

/// Haar-distributed `m × 2` frame: Gram–Schmidt (thin QR with positive `R`
/// diagonal) of a standard Gaussian matrix. Returns the two columns.
pub fn random_frame(m: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    loop {
        let g1: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let g2: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n1 = norm(&g1);
        if n1 == 0.0 {
            continue;
        }
        let q1: Vec<f64> = g1.iter().map(|x| x / n1).collect();
        let mut q2 = g2;
        // Two passes keep q1·q2 at rounding level.
        for _ in 0..2 {
            let c: f64 = q1.iter().zip(&q2).map(|(a, b)| a * b).sum();
            q2.iter_mut().zip(&q1).for_each(|(x, y)| *x -= c * y);
        }
        let n2 = norm(&q2);
        if n2 == 0.0 {
            continue;
        }
        q2.iter_mut().for_each(|x| *x /= n2);
        return (q1, q2);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn gen_circle(spec: &CircleSpec, seed: RngSeed) -> Result<CircleSample> {
    if spec.m < 2 {
        return Err(Error::Input(format!(
            "circle needs ambient dimension m >= 2, got {}",
            spec.m
        )));
    }
    let mut rng = seed.rng();
    let thetas = match &spec.thetas {
        Some(t) => {
            if t.len() != spec.n {
                return Err(Error::Dimension(format!(
                    "{} angles supplied for n = {}",
                    t.len(),
                    spec.n
                )));
            }
            t.clone()
        }
        None => (0..spec.n)
            .map(|_| 2.0 * PI * rng.random::<f64>())
            .collect(),
    };
    let (q1, q2) = if spec.identity_frame {
        let mut e1 = vec![0.0; spec.m];
        let mut e2 = vec![0.0; spec.m];
        e1[0] = 1.0;
        e2[1] = 1.0;
        (e1, e2)
    } else {
        random_frame(spec.m, &mut rng)
    };
    let mut points = Vec::with_capacity(spec.n * spec.m);
    for &t in &thetas {
        let (s, c) = t.sin_cos();
        points.extend(q1.iter().zip(&q2).map(|(a, b)| c * a + s * b));
    }
    Ok(CircleSample {
        points: DataMatrix::new(spec.n, spec.m, points)?,
        thetas,
    })
}

/// Independent Gaussian noise with per-entry standard deviation `√(α_i β_j / m)`,
/// `α_i ~ U(alpha_range)`, `β_j ~ U(beta_range)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianHeteroNoiseSpec {
    pub alpha_range: (f64, f64),
    pub beta_range: (f64, f64),
}

impl Default for GaussianHeteroNoiseSpec {
    fn default() -> Self {
        GaussianHeteroNoiseSpec {
            alpha_range: (0.05, 0.5),
            beta_range: (0.05, 0.5),
        }
    }
}

impl GaussianHeteroNoiseSpec {
    /// Degenerate spec with `α_i = β_j = c`, so every entry has deviation `c/√m`.
    pub fn constant(c: f64) -> Self {
        GaussianHeteroNoiseSpec {
            alpha_range: (c, c),
            beta_range: (c, c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("alpha", self.alpha_range), ("beta", self.beta_range)] {
            if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::Input(format!(
                    "{name} range must satisfy 0 <= lo <= hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Returns the noisy points and the analytic noise magnitudes `E‖η_i‖² = α_i Σ_j β_j / m`.
pub fn add_gaussian_hetero_noise(
    x: &DataMatrix,
    spec: &GaussianHeteroNoiseSpec,
    seed: RngSeed,
) -> Result<(DataMatrix, Vector)> {
    spec.validate()?;
    let mut rng = seed.rng();
    let (n, m) = (x.n(), x.m());
    let alpha: Vec<f64> = (0..n)
        .map(|_| uniform(&mut rng, spec.alpha_range))
        .collect();
    let beta: Vec<f64> = (0..m).map(|_| uniform(&mut rng, spec.beta_range)).collect();
    let beta_mean = beta.iter().sum::<f64>() / m as f64;
    let beta_root: Vec<f64> = beta.iter().map(|b| (b / m as f64).sqrt()).collect();

    let mut noisy = x.clone();
    for (i, &a) in alpha.iter().enumerate() {
        let a_root = a.sqrt();
        for (v, br) in noisy.point_mut(i).iter_mut().zip(&beta_root) {
            let z: f64 = rng.sample(StandardNormal);
            *v += a_root * br * z;
        }
    }
    let mags: Vec<f64> = alpha.iter().map(|a| a * beta_mean).collect();
    Ok((noisy, mags.into()))
}

/// Uniform noise in an `m`-ball whose radius depends on the point's angle:
/// `ρ(θ) = min + (max − min)(1 + cos 2θ)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallNoiseSpec {
    pub min_radius: f64,
    pub max_radius: f64,
}

impl Default for BallNoiseSpec {
    fn default() -> Self {
        BallNoiseSpec {
            min_radius: 0.01,
            max_radius: 1.0,
        }
    }
}

impl BallNoiseSpec {
    /// Radius identically zero: the noisy data equals the clean data.
    pub fn zero() -> Self {
        BallNoiseSpec {
            min_radius: 0.0,
            max_radius: 0.0,
        }
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.min_radius + (self.max_radius - self.min_radius) * (1.0 + (2.0 * theta).cos()) / 2.0
    }
}

pub fn add_ball_noise(
    x: &DataMatrix,
    thetas: &[f64],
    spec: &BallNoiseSpec,
    seed: RngSeed,
) -> Result<DataMatrix> {
    if thetas.len() != x.n() {
        return Err(Error::Dimension(format!(
            "{} angles for {} points",
            thetas.len(),
            x.n()
        )));
    }
    if !(spec.min_radius >= 0.0 && spec.max_radius >= spec.min_radius) {
        return Err(Error::Input(format!(
            "ball radii must satisfy 0 <= min <= max, got ({}, {})",
            spec.min_radius, spec.max_radius
        )));
    }
    let m = x.m();
    let mut rng = seed.rng();
    let mut noisy = x.clone();
    for (i, &theta) in thetas.iter().enumerate() {
        let dir = loop {
            let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let len = norm(&g);
            if len > 0.0 {
                break g.into_iter().map(|v| v / len).collect::<Vec<f64>>();
            }
        };
        let u: f64 = rng.random();
        let r = spec.radius(theta) * u.powf(1.0 / m as f64);
        noisy
            .point_mut(i)
            .iter_mut()
            .zip(&dir)
            .for_each(|(v, d)| *v += r * d);
    }
    Ok(noisy)
}

/// Points with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub labels: Vec<i64>,
}

impl LabeledDataset {
    pub fn new(data: DataMatrix, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != data.n() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                labels.len(),
                data.n()
            )));
        }
        Ok(LabeledDataset { data, labels })
    }
}

/// A block of simulated cells sharing a prototype and a read depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScrnaGroup {
    pub count: usize,
    pub prototype: usize,
    pub trials: u64,
}

/// Multinomial expression simulator: each cell draws `trials` reads from its
/// group's prototype and is normalized to sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ScrnaSpec {
    pub m: usize,
    pub groups: Vec<ScrnaGroup>,
    /// Probability vectors; drawn as normalized `U[0, 1]` vectors when absent.
    pub prototypes: Option<Vec<Vec<f64>>>,
}

impl ScrnaSpec {
    /// Two cell types over 4000 genes: 500 cells of type 0 and 250 of type 1
    /// at 10³ reads, then 250 cells of type 1 at 10⁴ reads.
    pub fn two_batch() -> Self {
        Self::two_batch_scaled(4000, [500, 250, 250])
    }

    /// The two-batch layout with custom gene count and group sizes.
    pub fn two_batch_scaled(m: usize, counts: [usize; 3]) -> Self {
        ScrnaSpec {
            m,
            groups: vec![
                ScrnaGroup {
                    count: counts[0],
                    prototype: 0,
                    trials: 1_000,
                },
                ScrnaGroup {
                    count: counts[1],
                    prototype: 1,
                    trials: 1_000,
                },
                ScrnaGroup {
                    count: counts[2],
                    prototype: 1,
                    trials: 10_000,
                },
            ],
            prototypes: None,
        }
    }

    pub fn n(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    fn prototype_count(&self) -> usize {
        self.groups
            .iter()
            .map(|g| g.prototype + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n() == 0 {
            return Err(Error::Input(
                "scRNA spec needs m >= 1 and at least one cell".into(),
            ));
        }
        if let Some(g) = self.groups.iter().find(|g| g.trials == 0) {
            return Err(Error::Input(format!(
                "group with prototype {} has zero trials",
                g.prototype
            )));
        }
        if let Some(protos) = &self.prototypes {
            if protos.len() < self.prototype_count() {
                return Err(Error::Input(format!(
                    "groups reference {} prototypes, {} supplied",
                    self.prototype_count(),
                    protos.len()
                )));
            }
            for (id, p) in protos.iter().enumerate() {
                if p.len() != self.m {
                    return Err(Error::Dimension(format!(
                        "prototype {id} has {} genes, expected {}",
                        p.len(),
                        self.m
                    )));
                }
                let sum: f64 = p.iter().sum();
                if p.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::Input(format!(
                        "prototype {id} is not a probability vector (sum {sum})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `count` probability vectors of length `m`, each a normalized `U[0, 1]` draw.
pub fn gen_prototypes(m: usize, count: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    (0..count)
        .map(|id| {
            let z: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let total: f64 = z.iter().sum();
            if total <= 0.0 {
                return Err(Error::Input(format!("prototype {id} drew all zeros")));
            }
            Ok(z.into_iter().map(|v| v / total).collect())
        })
        .collect()
}

/// One multinomial draw by sequential conditional binomials.
pub fn sample_multinomial(trials: u64, p: &[f64], rng: &mut impl Rng) -> Vec<u64> {
    let mut left = trials;
    let mut mass = 1.0f64;
    let mut counts = vec![0u64; p.len()];
    for (c, &pj) in counts.iter_mut().zip(p) {
        if left == 0 {
            break;
        }
        let q = if mass > 0.0 {
            (pj / mass).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let draw = Binomial::new(left, q)
            .expect("probability clamped into [0, 1]")
            .sample(rng);
        *c = draw;
        left -= draw;
        mass -= pj;
    }
    if left > 0 {
        // Rounding in the running mass can leave reads unassigned; they belong
        // to the last gene with positive probability.
        if let Some(last) = p.iter().rposition(|&v| v > 0.0) {
            counts[last] += left;
        }
    }
    counts
}

pub fn gen_scrna(spec: &ScrnaSpec, seed: RngSeed) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = seed.rng();
    let prototypes = match &spec.prototypes {
        Some(p) => p.clone(),
        None => gen_prototypes(spec.m, spec.prototype_count(), &mut rng)?,
    };
    let n = spec.n();
    let mut points = Vec::with_capacity(n * spec.m);
    let mut labels = Vec::with_capacity(n);
    for g in &spec.groups {
        let p = &prototypes[g.prototype];
        for _ in 0..g.count {
            let counts = sample_multinomial(g.trials, p, &mut rng);
            let total: u64 = counts.iter().sum();
            points.extend(counts.iter().map(|&c| c as f64 / total as f64));
            labels.push(g.prototype as i64);
        }
    }
    LabeledDataset::new(DataMatrix::new(n, spec.m, points)?, labels)
}

/// Indices drawn uniformly without replacement per label, grouped in `wanted` order.
pub fn subsample_indices(
    labels: &[i64],
    wanted: &[(i64, usize)],
    seed: RngSeed,
) -> Result<Vec<usize>> {
    let mut rng = seed.rng();
    let mut out = Vec::new();
    for &(label, count) in wanted {
        let members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect();
        if members.len() < count {
            return Err(Error::Input(format!(
                "label {label} has {} members, {count} requested",
                members.len()
            )));
        }
        out.extend(
            rand::seq::index::sample(&mut rng, members.len(), count)
                .into_iter()
                .map(|k| members[k]),
        );
    }
    Ok(out)
}

pub fn subsample_by_label(
    ds: &LabeledDataset,
    wanted: &[(i64, usize)],
    seed: RngSeed,
) -> Result<LabeledDataset> {
    let idx = subsample_indices(&ds.labels, wanted, seed)?;
    let labels = idx.iter().map(|&i| ds.labels[i]).collect();
    LabeledDataset::new(ds.data.select(&idx)?, labels)
}

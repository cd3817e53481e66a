#![allow(dead_code)]

use dsnorm::datagen::RngSeed;
use dsnorm::kernel::DataMatrix;
use dsnorm::linalg::SymMatrix;
use rand::Rng;

pub fn random_points(n: usize, m: usize, seed: u64) -> DataMatrix {
    let mut rng = RngSeed(seed).rng();
    let pts: Vec<f64> = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    DataMatrix::new(n, m, pts).unwrap()
}

pub fn random_sym(n: usize, seed: u64) -> SymMatrix {
    let mut rng = RngSeed(seed).rng();
    SymMatrix::from_upper_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Positive off-diagonal, zero diagonal, entries in `(lo, 1]`.
pub fn random_gram(n: usize, lo: f64, seed: u64) -> SymMatrix {
    let mut rng = RngSeed(seed).rng();
    SymMatrix::from_upper_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            rng.random_range(lo..=1.0)
        }
    })
}

/// Equally spaced points on the unit circle in the plane.
pub fn ring(n: usize) -> DataMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    DataMatrix::from_rows(&rows).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

mod common;

use common::{max_abs_diff, random_gram, random_points, ring};
use dsnorm::datagen::{gen_circle, CircleSpec, RngSeed};
use dsnorm::kernel::{gaussian_kernel, pairwise_sq_dists, DataMatrix, KernelMatrix};
use dsnorm::linalg::{sym_eigen_full, SquareView, SymMatrix};
use dsnorm::normalize::{
    check_scalable, estimate_rate, gauge_decompose, row_stochastic, sinkhorn_symmetric,
    sinkhorn_symmetric_from, symmetric_normalize, symmetric_scale, AffinityMatrix, SinkhornConfig,
};
use dsnorm::spectral::{decompose, embed2d};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn kernel(g: SymMatrix) -> KernelMatrix {
    KernelMatrix::from_gram(g, 1.0).unwrap()
}

fn doubly(k: &KernelMatrix) -> AffinityMatrix {
    sinkhorn_symmetric(k, &SinkhornConfig::default()).unwrap().0
}

/// Classical alternating Sinkhorn–Knopp on rows and columns, run until the
/// scalings stop changing.
fn sinkhorn_oracle(k: &SymMatrix) -> Vec<Vec<f64>> {
    let n = k.n();
    let mut r = vec![1.0; n];
    let mut c = vec![1.0; n];
    for _ in 0..200_000 {
        let r_new: Vec<f64> = (0..n)
            .map(|i| 1.0 / (0..n).map(|j| k.get(i, j) * c[j]).sum::<f64>())
            .collect();
        let c_new: Vec<f64> = (0..n)
            .map(|j| 1.0 / (0..n).map(|i| k.get(i, j) * r_new[i]).sum::<f64>())
            .collect();
        let change = r_new
            .iter()
            .zip(&r)
            .chain(c_new.iter().zip(&c))
            .map(|(a, b)| (a / b - 1.0).abs())
            .fold(0.0, f64::max);
        r = r_new;
        c = c_new;
        if change < 1e-15 {
            break;
        }
    }
    (0..n)
        .map(|i| (0..n).map(|j| r[i] * k.get(i, j) * c[j]).collect())
        .collect()
}

#[test]
fn distances_match_naive_loops() {
    let x = random_points(6, 4, 9);
    let d = pairwise_sq_dists(&x);
    for i in 0..6 {
        for j in 0..6 {
            let mut s = 0.0;
            for c in 0..4 {
                s += (x.point(i)[c] - x.point(j)[c]).powi(2);
            }
            assert!((d.get(i, j) - s).abs() < 1e-12);
        }
    }
    let dup = DataMatrix::from_rows(&[vec![0.3, 1.0], vec![0.3, 1.0], vec![2.0, 0.0]]).unwrap();
    assert_eq!(pairwise_sq_dists(&dup).get(0, 1), 0.0);
    let k = gaussian_kernel(&dup, 0.5).unwrap();
    assert_eq!(k.gram().get(0, 1), 1.0);
    assert!((0..3).all(|i| k.gram().get(i, i) == 0.0));
}

#[test]
fn kernel_at_distance_epsilon_is_inverse_e() {
    let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![0.6, 0.8], vec![5.0, 5.0]]).unwrap();
    let k = gaussian_kernel(&x, 1.0).unwrap();
    assert!((k.gram().get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
    assert!(gaussian_kernel(&x, 0.0).is_err());
    assert!(gaussian_kernel(&x, -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_invariant_under_rigid_motion(n in 3usize..15, m in 2usize..6, seed in any::<u64>()) {
        let x = random_points(n, m, seed);
        let mut rng = RngSeed(seed ^ 0xabc).rng();
        let g = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let q = g.qr().q();
        let shift: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let moved: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..m).map(|a| (0..m).map(|b| q[(a, b)] * x.point(i)[b]).sum::<f64>() + shift[a]).collect())
            .collect();
        let y = DataMatrix::from_rows(&moved).unwrap();
        let (kx, ky) = (gaussian_kernel(&x, 0.7).unwrap(), gaussian_kernel(&y, 0.7).unwrap());
        prop_assert!(max_abs_diff(kx.gram().as_slice(), ky.gram().as_slice()) < 1e-10);
    }

    #[test]
    fn kernel_decreases_with_distance(n in 3usize..10, seed in any::<u64>(), stretch in 1.01f64..3.0) {
        let x = random_points(n, 3, seed);
        let mut y = x.clone();
        // Moving point 0 away from point 1 along their difference increases only their distances to 0.
        let dir: Vec<f64> = x.point(0).iter().zip(x.point(1)).map(|(a, b)| a - b).collect();
        y.point_mut(0).iter_mut().zip(&dir).for_each(|(v, d)| *v += (stretch - 1.0) * d);
        let (kx, ky) = (gaussian_kernel(&x, 0.5).unwrap(), gaussian_kernel(&y, 0.5).unwrap());
        prop_assert!(ky.gram().get(0, 1) < kx.gram().get(0, 1));
    }

    #[test]
    fn sinkhorn_doubly_stochastic(n in 3usize..40, seed in any::<u64>()) {
        let k = gaussian_kernel(&random_points(n, 3, seed), 0.5).unwrap();
        let cfg = SinkhornConfig::default();
        let (w, report) = sinkhorn_symmetric(&k, &cfg).unwrap();
        prop_assert!(report.converged && report.final_ratio_gap <= cfg.delta);
        for s in w.row_sums().into_iter().chain(w.col_sums()) {
            prop_assert!((s - 1.0).abs() <= 10.0 * cfg.delta);
        }
        for i in 0..n {
            prop_assert_eq!(w.get(i, i), 0.0);
        }
    }

    #[test]
    fn perturbed_start_reaches_same_scaling(n in 3usize..30, seed in any::<u64>()) {
        let k = kernel(random_gram(n, 0.01, seed));
        let (w, _) = sinkhorn_symmetric(&k, &SinkhornConfig::default()).unwrap();
        let mut rng = RngSeed(seed ^ 7).rng();
        let base: Vec<f64> = k.gram().row_sums().iter().map(|s| 1.0 / s).collect();
        let d0: Vec<f64> = base.iter().map(|b| b * rng.random_range(0.5..2.0)).collect();
        let (w2, _) = sinkhorn_symmetric_from(&k, &SinkhornConfig::default(), &d0).unwrap();
        for (a, b) in w.scaling().iter().zip(w2.scaling().iter()) {
            prop_assert!((a / b - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn diagonal_bias_is_removed(n in 3usize..25, seed in any::<u64>()) {
        let g = random_gram(n, 0.01, seed);
        let mut rng = RngSeed(seed ^ 99).rng();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let biased = g.scale_sym(&c);
        // Kernel entries must stay in [0, 1]; a global factor does not change W.
        let top = biased.as_slice().iter().cloned().fold(0.0, f64::max);
        let biased = SymMatrix::from_upper_fn(n, |i, j| biased.get(i, j) / top);
        let w = doubly(&kernel(g));
        let wb = doubly(&kernel(biased));
        prop_assert!(max_abs_diff(&w.to_matrix().as_slice(), &wb.to_matrix().as_slice()) < 1e-8);
        for i in 0..n {
            let expect = w.scaling()[i] / c[i] * top.sqrt();
            prop_assert!((wb.scaling()[i] / expect - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn repeated_symmetric_normalization_converges(n in 3usize..=30, seed in any::<u64>()) {
        let k = gaussian_kernel(&random_points(n, 2, seed), 1.0).unwrap();
        let mut a = k.gram().clone();
        for _ in 0..500 {
            a = symmetric_scale(&a).unwrap().0;
        }
        let w = doubly(&k);
        prop_assert!(max_abs_diff(a.as_slice(), w.as_sym().unwrap().as_slice()) < 1e-6);
    }
}

#[test]
fn sinkhorn_matches_long_run_oracle() {
    for seed in 0..5 {
        let g = random_gram(8, 0.05, seed);
        let w = doubly(&kernel(g.clone()));
        let oracle = sinkhorn_oracle(&g);
        for (i, row) in oracle.iter().enumerate() {
            assert!(max_abs_diff(w.row(i), row) < 1e-9, "seed {seed} row {i}");
        }
    }
}

#[test]
fn underflow_breaks_scalability() {
    let x = DataMatrix::from_rows(&[vec![0.0], vec![0.1], vec![0.2], vec![50.0]]).unwrap();
    let k = gaussian_kernel(&x, 0.01).unwrap();
    let report = check_scalable(&k);
    assert!(!report.is_scalable());
    assert_eq!(report.zero_pairs, vec![(0, 3), (1, 3), (2, 3)]);
    assert!(report.to_string().contains("increase epsilon"));
    assert!(sinkhorn_symmetric(&k, &SinkhornConfig::default()).is_err());
}

#[test]
fn symmetric_matches_triangle_oracle() {
    let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let k = gaussian_kernel(&x, 1.0).unwrap();
    let e1 = (-1.0f64).exp();
    let e2 = (-2.0f64).exp();
    let r = [1.0 / (2.0 * e1), 1.0 / (e1 + e2), 1.0 / (e1 + e2)];
    let s = symmetric_normalize(&k).unwrap();
    assert!((s.get(0, 1) - (r[0] * r[1]).sqrt() * e1).abs() < 1e-15);
    assert!((s.get(1, 2) - (r[1] * r[2]).sqrt() * e2).abs() < 1e-15);
    let w = row_stochastic(&k).unwrap();
    assert!((w.get(1, 0) - e1 * r[1]).abs() < 1e-15);
    for sum in w.row_sums() {
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn row_and_symmetric_share_spectrum_and_vectors() {
    for seed in 0..4 {
        let k = gaussian_kernel(&random_points(60, 3, seed), 0.4).unwrap();
        let (wr, ws) = (
            row_stochastic(&k).unwrap(),
            symmetric_normalize(&k).unwrap(),
        );
        let (dr, ds) = (decompose(&wr, 60).unwrap(), decompose(&ws, 60).unwrap());
        assert!(max_abs_diff(&dr.eigenvalues, &ds.eigenvalues) < 1e-9);
        let m = wr.to_matrix();
        let root: Vec<f64> = wr.scaling().iter().map(|r| r.sqrt()).collect();
        for (idx, (psi_r, psi_s)) in dr.eigenvectors.iter().zip(&ds.eigenvectors).enumerate() {
            // Right eigenvector of the nonsymmetric matrix, checked directly.
            let lam = dr.eigenvalues[idx];
            for i in 0..60 {
                let av: f64 = (0..60).map(|j| m.get(i, j) * psi_r[j]).sum();
                assert!((av - lam * psi_r[i]).abs() < 1e-7);
            }
            // Skip near-degenerate eigenvalues, where individual vectors are not unique.
            let gap = dr
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != idx)
                .map(|(_, v)| (v - lam).abs())
                .fold(f64::INFINITY, f64::min);
            if gap < 1e-6 {
                continue;
            }
            let mapped: Vec<f64> = psi_s.iter().zip(&root).map(|(a, b)| a * b).collect();
            let norm = mapped.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cos: f64 = mapped
                .iter()
                .zip(psi_r.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / norm;
            assert!(
                (cos.abs() - 1.0).abs() < 1e-7,
                "seed {seed} pair {idx}: {cos}"
            );
        }
    }
}

#[test]
fn doubly_spectrum_is_perron() {
    for seed in 0..10 {
        let w = doubly(&gaussian_kernel(&random_points(25, 3, seed), 0.3).unwrap());
        let pairs = sym_eigen_full(w.as_sym().unwrap()).unwrap();
        assert!((pairs[0].value - 1.0).abs() < 1e-8);
        let c = 1.0 / 25f64.sqrt();
        assert!(pairs[0].vector.iter().all(|v| (v - c).abs() < 1e-6));
        assert!(pairs.iter().all(|p| p.value.abs() <= 1.0 + 1e-8));
        assert!(pairs.last().unwrap().value > -1.0 + 1e-8);
    }
}

#[test]
fn clean_circle_spectrum_pairs_and_embedding() {
    let c = gen_circle(&CircleSpec::new(400, 3), RngSeed(1)).unwrap();
    let w = doubly(&gaussian_kernel(&c.points, 0.1).unwrap());
    let dec = decompose(&w, 5).unwrap();
    let ev = &dec.eigenvalues;
    assert!((ev[1] - ev[2]).abs() < 0.01 * ev[1], "{ev:?}");
    // The second harmonic pair splits more under finite sampling.
    assert!((ev[3] - ev[4]).abs() < 0.1 * ev[3], "{ev:?}");
    let emb = embed2d(&dec).unwrap();
    assert!(emb.radius_cv() < 0.10, "{}", emb.radius_cv());
    for col in 0..2 {
        let norm: f64 = emb
            .coords
            .iter()
            .map(|p| p[col] * p[col])
            .sum::<f64>()
            .sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn embedding_is_permutation_equivariant() {
    let x = random_points(20, 3, 4);
    let perm: Vec<usize> = (0..20).rev().collect();
    let y = x.select(&perm).unwrap();
    let e = |d: &DataMatrix| {
        embed2d(&decompose(&doubly(&gaussian_kernel(d, 0.5).unwrap()), 3).unwrap()).unwrap()
    };
    let (ex, ey) = (e(&x), e(&y));
    for (new, &old) in perm.iter().enumerate() {
        for c in 0..2 {
            // Eigenvector signs are fixed per vector, so compare magnitudes.
            assert!((ey.coords[new][c].abs() - ex.coords[old][c].abs()).abs() < 1e-9);
        }
    }
}

#[test]
fn rate_tracks_subdominant_eigenvalue() {
    let c = gen_circle(&CircleSpec::new(100, 2), RngSeed(5)).unwrap();
    let k = gaussian_kernel(&c.points, 0.1).unwrap();
    let (w, report) = sinkhorn_symmetric(&k, &SinkhornConfig::default()).unwrap();
    let rate = estimate_rate(&report, &w).unwrap();
    let ratio = rate.empirical / rate.predicted;
    assert!((1.0 / 3.0..=3.0).contains(&ratio), "{rate:?}");

    // Two tight, distant clusters of unequal size: nearly block diagonal and
    // the imbalance excites the slow mode.
    let mut rows = Vec::new();
    for i in 0..6 {
        let base = if i < 2 { 0.0 } else { 3.0 };
        rows.push(vec![base + 0.01 * i as f64, 0.0]);
    }
    let k = gaussian_kernel(&DataMatrix::from_rows(&rows).unwrap(), 1.0).unwrap();
    let (w, report) = sinkhorn_symmetric(&k, &SinkhornConfig::default()).unwrap();
    let rate = estimate_rate(&report, &w).unwrap();
    assert!(rate.predicted > 0.95 && rate.empirical > 0.95, "{rate:?}");
    assert!(report.iters > 100);
}

#[test]
fn gauge_reconstructs_doubly() {
    let x = random_points(6, 3, 21);
    let w = doubly(&gaussian_kernel(&x, 0.8).unwrap());
    let g = gauge_decompose(&x, &w).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            if i != j {
                assert!((g.reconstruct(i, j) - w.get(i, j)).abs() < 1e-10);
            }
        }
    }
    // Unit-norm, mutually orthogonal points.
    let e = DataMatrix::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ])
    .unwrap();
    let we = doubly(&gaussian_kernel(&e, 0.5).unwrap());
    let ge = gauge_decompose(&e, &we).unwrap();
    for i in 0..3 {
        assert!((ge.u[i] - we.scaling()[i] * (-2.0f64).exp()).abs() < 1e-15);
        for j in 0..3 {
            if i != j {
                assert_eq!(ge.h.get(i, j), 1.0);
            }
        }
    }
    assert!(gauge_decompose(
        &x,
        &row_stochastic(&gaussian_kernel(&x, 0.8).unwrap()).unwrap()
    )
    .is_err());
}

#[test]
fn ring_kernel_views_agree() {
    let k = gaussian_kernel(&ring(12), 0.5).unwrap();
    let w = doubly(&k);
    assert_eq!(w.dim(), 12);
    assert_eq!(SquareView::row(&w, 3), w.row(3));
}

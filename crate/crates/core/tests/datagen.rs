mod common;

use std::f64::consts::PI;

use dsnorm::datagen::{
    add_ball_noise, add_gaussian_hetero_noise, gen_circle, gen_scrna, read_labels,
    read_matrix_market, sample_multinomial, subsample_by_label, subsample_indices, write_labels,
    write_matrix_market, BallNoiseSpec, CircleSpec, CountMatrix, GaussianHeteroNoiseSpec,
    LabeledDataset, RngSeed, ScrnaSpec,
};
use dsnorm::kernel::{pairwise_sq_dists, DataMatrix};
use proptest::prelude::*;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn circle_points_lie_on_unit_circle() {
    let c = gen_circle(&CircleSpec::new(200, 50), RngSeed(3)).unwrap();
    let d = pairwise_sq_dists(&c.points);
    for i in 0..200 {
        assert!((norm(c.points.point(i)) - 1.0).abs() < 1e-12);
        assert!((0.0..2.0 * PI).contains(&c.thetas[i]));
        for j in 0..200 {
            // Chord length for the angle difference.
            let chord = 2.0 - 2.0 * (c.thetas[i] - c.thetas[j]).cos();
            assert!((d.get(i, j) - chord).abs() < 1e-12);
        }
    }
    assert_eq!(
        c,
        gen_circle(&CircleSpec::new(200, 50), RngSeed(3)).unwrap()
    );
    assert_ne!(
        c,
        gen_circle(&CircleSpec::new(200, 50), RngSeed(4)).unwrap()
    );
    assert!(gen_circle(&CircleSpec::new(5, 1), RngSeed(0)).is_err());
}

#[test]
fn seed_derivation_is_order_free() {
    let s = RngSeed(10);
    assert_eq!(s.derive(&[3, 1]), s.derive(&[3, 1]));
    assert_ne!(s.derive(&[3, 1]), s.derive(&[1, 3]));
    assert_ne!(s.derive(&[0]), RngSeed(11).derive(&[0]));
}

#[test]
fn hetero_noise_magnitudes_in_range() {
    let c = gen_circle(&CircleSpec::new(300, 40), RngSeed(1)).unwrap();
    let (_, mags) = add_gaussian_hetero_noise(&c.points, &Default::default(), RngSeed(2)).unwrap();
    assert!(mags.iter().all(|&v| (1.0 / 400.0..=0.25).contains(&v)));
}

#[test]
fn hetero_noise_energy_matches_expectation() {
    let (n, m, c) = (400, 500, 0.4);
    let zero = DataMatrix::new(n, m, vec![0.0; n * m]).unwrap();
    let (noisy, mags) =
        add_gaussian_hetero_noise(&zero, &GaussianHeteroNoiseSpec::constant(c), RngSeed(8))
            .unwrap();
    assert!(mags.iter().all(|&v| (v - c * c).abs() < 1e-12));
    // ‖η‖² = (c²/m) χ²_m: mean c², variance 2c⁴/m.
    let mean = (0..n).map(|i| norm(noisy.point(i)).powi(2)).sum::<f64>() / n as f64;
    let se = (2.0 * c.powi(4) / m as f64 / n as f64).sqrt();
    assert!((mean - c * c).abs() < 3.0 * se, "{mean} vs {}", c * c);

    // Random α, β: the per-point ratio to the analytic magnitude averages to one.
    let (noisy, mags) = add_gaussian_hetero_noise(&zero, &Default::default(), RngSeed(9)).unwrap();
    let ratio = (0..n)
        .map(|i| norm(noisy.point(i)).powi(2) / mags[i])
        .sum::<f64>()
        / n as f64;
    assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
}

#[test]
fn zero_noise_is_identity() {
    let c = gen_circle(&CircleSpec::new(20, 5), RngSeed(1)).unwrap();
    let (noisy, mags) = add_gaussian_hetero_noise(
        &c.points,
        &GaussianHeteroNoiseSpec::constant(0.0),
        RngSeed(2),
    )
    .unwrap();
    assert_eq!(noisy, c.points);
    assert!(mags.iter().all(|&v| v == 0.0));
    assert_eq!(
        add_ball_noise(&c.points, &c.thetas, &BallNoiseSpec::zero(), RngSeed(2)).unwrap(),
        c.points
    );
    let bad = GaussianHeteroNoiseSpec {
        alpha_range: (0.5, 0.1),
        beta_range: (0.1, 0.2),
    };
    assert!(add_gaussian_hetero_noise(&c.points, &bad, RngSeed(0)).is_err());
}

#[test]
fn ball_noise_respects_radius_profile() {
    let mut spec = CircleSpec::new(500, 30);
    let mut thetas: Vec<f64> = (0..499).map(|i| 2.0 * PI * i as f64 / 499.0).collect();
    thetas.push(PI / 2.0);
    spec.thetas = Some(thetas);
    let c = gen_circle(&spec, RngSeed(5)).unwrap();
    let ball = BallNoiseSpec::default();
    let noisy = add_ball_noise(&c.points, &c.thetas, &ball, RngSeed(6)).unwrap();
    for i in 0..500 {
        let shift: Vec<f64> = noisy
            .point(i)
            .iter()
            .zip(c.points.point(i))
            .map(|(a, b)| a - b)
            .collect();
        assert!(norm(&shift) <= ball.radius(c.thetas[i]) + 1e-15);
    }
    assert!((ball.radius(PI / 2.0) - 0.01).abs() < 1e-15);
    assert!((ball.radius(0.0) - 1.0).abs() < 1e-15);
    let last: Vec<f64> = noisy
        .point(499)
        .iter()
        .zip(c.points.point(499))
        .map(|(a, b)| a - b)
        .collect();
    assert!(norm(&last) <= 0.01);
    assert!(add_ball_noise(&c.points, &c.thetas[1..], &ball, RngSeed(6)).is_err());
}

#[test]
fn ball_noise_is_uniform_in_the_disk() {
    // In the plane half of a disk's area lies within radius ρ/√2.
    let n = 20_000;
    let spec = CircleSpec {
        n,
        m: 2,
        thetas: Some(vec![0.0; n]),
        identity_frame: true,
    };
    let c = gen_circle(&spec, RngSeed(0)).unwrap();
    let noisy = add_ball_noise(
        &c.points,
        &c.thetas,
        &BallNoiseSpec {
            min_radius: 1.0,
            max_radius: 1.0,
        },
        RngSeed(1),
    )
    .unwrap();
    let inner = (0..n)
        .filter(|&i| {
            let p = noisy.point(i);
            norm(&[p[0] - 1.0, p[1]]) <= 1.0 / 2f64.sqrt()
        })
        .count();
    let frac = inner as f64 / n as f64;
    assert!((frac - 0.5).abs() < 0.02, "{frac}");
}

#[test]
fn scrna_layout_and_normalization() {
    let spec = ScrnaSpec::two_batch_scaled(80, [12, 6, 6]);
    let ds = gen_scrna(&spec, RngSeed(4)).unwrap();
    assert_eq!((ds.data.n(), ds.data.m()), (24, 80));
    let mut want = vec![0i64; 12];
    want.extend([1; 12]);
    assert_eq!(ds.labels, want);
    for i in 0..24 {
        let row = ds.data.point(i);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Counts are whole numbers of reads.
        let trials = if i < 18 { 1e3 } else { 1e4 };
        assert!(row
            .iter()
            .all(|v| ((v * trials) - (v * trials).round()).abs() < 1e-6));
    }
    assert_eq!(ds, gen_scrna(&spec, RngSeed(4)).unwrap());
    let desk = ScrnaSpec::two_batch();
    assert_eq!((desk.m, desk.n()), (4000, 1000));
}

#[test]
fn scrna_group_means_track_prototypes() {
    let m = 20;
    let p0: Vec<f64> = (1..=m).map(|j| j as f64 / 210.0).collect();
    let p1: Vec<f64> = p0.iter().rev().cloned().collect();
    let mut spec = ScrnaSpec::two_batch_scaled(m, [200, 200, 50]);
    spec.prototypes = Some(vec![p0.clone(), p1.clone()]);
    let ds = gen_scrna(&spec, RngSeed(12)).unwrap();
    for (range, p, trials) in [
        (0..200, &p0, 1e3),
        (200..400, &p1, 1e3),
        (400..450, &p1, 1e4),
    ] {
        let count = range.len() as f64;
        for j in 0..m {
            let mean = range.clone().map(|i| ds.data.point(i)[j]).sum::<f64>() / count;
            let se = (p[j] * (1.0 - p[j]) / (trials * count)).sqrt();
            assert!(
                (mean - p[j]).abs() < 3.5 * se,
                "gene {j}: {mean} vs {}",
                p[j]
            );
        }
    }
    let mut bad = spec.clone();
    bad.prototypes = Some(vec![vec![0.5; m], p1]);
    assert!(gen_scrna(&bad, RngSeed(0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn multinomial_conserves_reads(trials in 0u64..5000, weights in prop::collection::vec(0.0f64..1.0, 1..30), seed in any::<u64>()) {
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 0.0);
        let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let counts = sample_multinomial(trials, &p, &mut RngSeed(seed).rng());
        prop_assert_eq!(counts.iter().sum::<u64>(), trials);
        for (c, q) in counts.iter().zip(&p) {
            if *q == 0.0 {
                prop_assert_eq!(*c, 0);
            }
        }
    }

    #[test]
    fn matrix_market_round_trip(
        genes in 1usize..8,
        cells in 1usize..8,
        entries in prop::collection::vec((0usize..8, 0usize..8, 1u32..100), 0..30),
    ) {
        let triplets: Vec<(usize, usize, f64)> = entries
            .into_iter()
            .filter(|&(g, c, _)| g < genes && c < cells)
            .map(|(g, c, v)| (g, c, v as f64))
            .collect();
        let counts = CountMatrix::from_triplets(genes, cells, triplets).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mtx");
        write_matrix_market(&path, &counts).unwrap();
        prop_assert_eq!(read_matrix_market(&path).unwrap(), counts);
    }
}

#[test]
fn labels_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.txt");
    write_labels(&path, &[3, -1, 0, 3]).unwrap();
    assert_eq!(read_labels(&path).unwrap(), vec![3, -1, 0, 3]);
}

#[test]
fn subsampling_per_label() {
    let labels: Vec<i64> = (0..30).map(|i| i % 3).collect();
    let idx = subsample_indices(&labels, &[(2, 4), (0, 10)], RngSeed(1)).unwrap();
    assert_eq!(idx.len(), 14);
    assert!(idx[..4].iter().all(|&i| labels[i] == 2));
    assert!(idx[4..].iter().all(|&i| labels[i] == 0));
    let mut sorted = idx.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), 14);
    assert_eq!(
        idx,
        subsample_indices(&labels, &[(2, 4), (0, 10)], RngSeed(1)).unwrap()
    );
    assert!(subsample_indices(&labels, &[(1, 11)], RngSeed(1)).is_err());
    assert!(subsample_indices(&labels, &[(7, 1)], RngSeed(1)).is_err());

    let data = DataMatrix::new(30, 1, (0..30).map(f64::from).collect()).unwrap();
    let ds = LabeledDataset::new(data, labels).unwrap();
    let sub = subsample_by_label(&ds, &[(1, 10)], RngSeed(2)).unwrap();
    for i in 0..10 {
        assert_eq!(sub.data.point(i)[0] as i64 % 3, 1);
    }
}

mod common;

use common::{adjusted_rand_index, brute_force_mst_weight, planted_blobs};
use fintopic::cluster::{core_distances, density_cluster, minimum_spanning_tree, DensityParams, NOISE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn planted_blobs_recovered() {
    let (points, truth) = planted_blobs(3, 500, 10, 10.0, 11);
    let a = density_cluster(&points, DensityParams::new(100, 10).unwrap()).unwrap();
    assert_eq!(a.n_clusters, 3);
    assert!(adjusted_rand_index(&a.labels, &truth) >= 0.99);
}

#[test]
fn uniform_points_below_min_cluster_size_are_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Vec<f64>> = (0..200).map(|_| (0..10).map(|_| rng.gen::<f64>()).collect()).collect();
    let a = density_cluster(&points, DensityParams::new(1250, 10).unwrap()).unwrap();
    assert!(a.labels.iter().all(|&l| l == NOISE));
}

#[test]
fn mst_matches_kruskal() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let n = rng.gen_range(2..120);
        let dim = rng.gen_range(1..6);
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let ms = rng.gen_range(1..=10);
        let core = core_distances(&points, ms);
        let mst = minimum_spanning_tree(&points, &core);
        assert_eq!(mst.len(), n - 1);
        let w: f64 = mst.iter().map(|e| e.weight).sum();
        assert!((w - brute_force_mst_weight(&points, ms)).abs() < 1e-9);
    }
}

#[test]
fn ari_oracle_sanity() {
    assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 7, 7]), 1.0);
    // sklearn: adjusted_rand_score([0, 0, 1, 1], [0, 0, 1, 2]) = 0.5714285714285715
    assert!((adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]) - 4.0 / 7.0).abs() < 1e-12);
}

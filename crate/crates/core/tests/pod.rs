mod common;

use agebo_uq::pod::{fit_pod, ModeSelection, PodBasis, SnapshotMatrix};
use approx::assert_relative_eq;
use common::{jacobi_eigen, random_snapshots, rng};
use proptest::prelude::*;

fn covariance(snaps: &[Vec<f64>]) -> (Vec<f64>, usize) {
    let m = SnapshotMatrix::from_snapshots(snaps).unwrap();
    let n = m.state_dim();
    let mut c = vec![0.0; n * n];
    for t in 0..m.snapshot_count() {
        let y = m.column(t);
        for i in 0..n {
            for j in 0..n {
                c[i * n + j] += y[i] * y[j];
            }
        }
    }
    (c, n)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn matches_dense_eigen_oracle() {
    let mut r = rng(3);
    let snaps = random_snapshots(20, 10, &mut r);
    let basis = fit_pod(&snaps, 9).unwrap();
    let (c, n) = covariance(&snaps);
    let (vals, vecs) = jacobi_eigen(&c, n);
    for j in 0..9 {
        let rel = (basis.eigenvalues()[j] - vals[j]).abs() / vals[j];
        assert!(rel < 1e-8, "mode {j}: rel {rel}");
        let align = dot(basis.mode(j), &vecs[j]).abs();
        assert!((align - 1.0).abs() < 1e-8, "mode {j}: alignment {align}");
    }
}

#[test]
fn column_means_vanish() {
    let snaps = random_snapshots(15, 7, &mut rng(4));
    let m = SnapshotMatrix::from_snapshots(&snaps).unwrap();
    for i in 0..m.state_dim() {
        let s: f64 = (0..m.snapshot_count()).map(|t| m.column(t)[i]).sum();
        assert!((s / m.snapshot_count() as f64).abs() < 1e-8);
    }
}

#[test]
fn duplicated_snapshots_double_eigenvalues() {
    let snaps = random_snapshots(12, 6, &mut rng(5));
    let mut doubled = snaps.clone();
    doubled.extend(snaps.iter().cloned());
    let a = fit_pod(&snaps, 4).unwrap();
    let b = fit_pod(&doubled, 4).unwrap();
    for j in 0..4 {
        assert_relative_eq!(b.eigenvalues()[j], 2.0 * a.eigenvalues()[j], max_relative = 1e-10);
        for (x, y) in a.mode(j).iter().zip(b.mode(j)) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn projection_identities() {
    let snaps = random_snapshots(30, 12, &mut rng(6));
    let basis = fit_pod(&snaps, 5).unwrap();
    let zero = basis.project(basis.mean()).unwrap();
    assert!(zero.iter().all(|a| a.abs() < 1e-12));
    let shifted: Vec<f64> = basis.mean().iter().zip(basis.mode(0)).map(|(m, v)| m + 3.0 * v).collect();
    let a = basis.project(&shifted).unwrap();
    assert!((a[0] - 3.0).abs() < 1e-10);
    assert!(a[1..].iter().all(|x| x.abs() < 1e-10));
    let coeffs = vec![0.3, -1.2, 2.0, 0.0, 0.7];
    let back = basis.project(&basis.reconstruct(&coeffs).unwrap()).unwrap();
    for (x, y) in coeffs.iter().zip(&back) {
        assert!((x - y).abs() < 1e-10);
    }
    assert_eq!(basis.reconstruct(&[0.0; 5]).unwrap(), basis.mean().to_vec());
}

#[test]
fn full_rank_round_trip() {
    let snaps = random_snapshots(25, 8, &mut rng(7));
    // centered rank is T - 1
    let basis = fit_pod(&snaps, 7).unwrap();
    for s in &snaps {
        let rec = basis.reconstruct(&basis.project(s).unwrap()).unwrap();
        for (a, b) in s.iter().zip(&rec) {
            assert!((a - b).abs() < 1e-8);
        }
    }
    assert!(basis.residual(&snaps).unwrap().residual < 1e-8);
}

#[test]
fn residual_equals_eigen_tail() {
    let snaps = random_snapshots(20, 10, &mut rng(8));
    let full = fit_pod(&snaps, 10).unwrap();
    let total: f64 = full.eigenvalues().iter().sum();
    let energy = SnapshotMatrix::from_snapshots(&snaps).unwrap().total_energy();
    assert_relative_eq!(total, energy, max_relative = 1e-6);
    for m in 0..10 {
        let b = fit_pod(&snaps, m).unwrap();
        let tail: f64 = full.eigenvalues()[m..].iter().sum();
        let r = b.residual(&snaps).unwrap();
        assert!((r.residual - tail).abs() <= 1e-6 * tail.max(1e-12) + 1e-12, "m={m}");
        let per_snapshot: f64 = snaps
            .iter()
            .map(|s| {
                let rec = b.reconstruct(&b.project(s).unwrap()).unwrap();
                s.iter().zip(&rec).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
            })
            .sum();
        assert_relative_eq!(per_snapshot.sqrt(), tail.sqrt(), max_relative = 1e-6, epsilon = 1e-9);
        assert_relative_eq!(r.retained_energy, 1.0 - tail / energy, epsilon = 1e-9);
    }
}

#[test]
fn energy_selection_picks_smallest_m() {
    let snaps = random_snapshots(40, 20, &mut rng(9));
    let matrix = SnapshotMatrix::from_snapshots(&snaps).unwrap();
    let b = PodBasis::fit(&matrix, ModeSelection::default()).unwrap();
    let all = PodBasis::fit(&matrix, ModeSelection::Fixed(20)).unwrap();
    let total: f64 = all.eigenvalues().iter().sum();
    let m = b.mode_count();
    let frac = |k: usize| all.eigenvalues()[..k].iter().sum::<f64>() / total;
    assert!(frac(m) >= 0.9 - 1e-12);
    assert!(frac(m - 1) < 0.9);
    let capped = PodBasis::fit(&matrix, ModeSelection::Energy { fraction: 0.999, max_modes: 3 }).unwrap();
    assert_eq!(capped.mode_count(), 3);
}

#[test]
fn persistence_round_trip() {
    let snaps = random_snapshots(10, 6, &mut rng(10));
    let b = fit_pod(&snaps, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("basis.pod");
    b.save(&path).unwrap();
    let back: PodBasis<f64> = PodBasis::load(&path).unwrap();
    assert_eq!(back.mean(), b.mean());
    assert_eq!(back.eigenvalues(), b.eigenvalues());
    assert_eq!(back.mode(2), b.mode(2));
    assert_relative_eq!(back.retained_energy(), b.retained_energy(), max_relative = 1e-12);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"POD1");
    assert_eq!(bytes.len(), 4 + 8 * 4 + 8 * (10 + 3 + 30));
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(PodBasis::<f64>::load(&path).is_err());
}

#[test]
fn single_precision_fit() {
    let snaps: Vec<Vec<f32>> = random_snapshots(8, 5, &mut rng(11))
        .into_iter()
        .map(|s| s.into_iter().map(|v| v as f32).collect())
        .collect();
    let b = fit_pod(&snaps, 2).unwrap();
    assert!((common_dot32(b.mode(0), b.mode(0)) - 1.0).abs() < 1e-5);
}

fn common_dot32(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn orthonormal_sorted_signed(seed in 0u64..10_000, n in 2usize..16, t in 2usize..12) {
        let snaps = random_snapshots(n, t, &mut rng(seed));
        let m = n.min(t) - 1;
        let b = fit_pod(&snaps, m).unwrap();
        for i in 0..m {
            for j in 0..m {
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot(b.mode(i), b.mode(j)) - expect).abs() < 1e-10);
            }
            let first = b.mode(i).iter().find(|v| v.abs() > 1e-12).copied().unwrap();
            prop_assert!(first > 0.0);
        }
        for w in b.eigenvalues().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert!(b.eigenvalues().iter().all(|&l| l >= 0.0));
    }
}

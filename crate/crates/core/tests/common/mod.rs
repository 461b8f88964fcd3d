#![allow(dead_code)]

use agebo_uq::nn::{
    gradient, nll_loss, Activation, LayerSpec, Network, NetworkSpec, Samples, SkipEdge,
};
use agebo_uq::arch::ArchConfig;
use agebo_uq::hpo::HyperConfig;
use agebo_uq::nn::{GaussianPrediction, OptimizerKind};
use agebo_uq::search::{CatalogRecord, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random network with at most 3 layers of width at most 32, mixing dense and
/// recurrent cells when `seq_len > 1`, with random forward skips.
pub fn random_spec(rng: &mut ChaCha8Rng) -> NetworkSpec {
    let seq_len = rng.random_range(1..=3);
    let input_dim = rng.random_range(1..=4);
    let output_dim = rng.random_range(1..=3);
    let n_layers = rng.random_range(1..=3);
    let acts = [Activation::Tanh, Activation::Linear, Activation::Relu];
    let layers: Vec<LayerSpec> = (0..n_layers)
        .map(|_| {
            let width = rng.random_range(1..=8);
            match rng.random_range(0..4) {
                0 if seq_len > 1 => LayerSpec::recurrent(width),
                1 => LayerSpec::identity(),
                _ => LayerSpec::dense(width, acts[rng.random_range(0..2)]),
            }
        })
        .collect();
    let head = n_layers + 1;
    let mut skips = Vec::new();
    for to in 2..=head {
        for from in 0..to - 1 {
            if rng.random_bool(0.3) {
                skips.push(SkipEdge { from, to });
            }
        }
    }
    NetworkSpec {
        input_dim,
        seq_len,
        output_dim,
        layers,
        skips,
    }
}

pub fn random_samples(spec: &NetworkSpec, n: usize, rng: &mut ChaCha8Rng) -> Samples<f64> {
    let inputs = (0..n * spec.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let targets = (0..n * spec.output_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    Samples::new(inputs, targets, spec.input_len(), spec.output_dim).unwrap()
}

/// Central finite differences of the mean batch NLL.
pub fn finite_difference(net: &Network<f64>, data: &Samples<f64>, step: f64) -> Vec<f64> {
    let mut probe = net.clone();
    let loss = |n: &Network<f64>| {
        let pred = n.forward_gaussian(&data.inputs).unwrap();
        nll_loss(&pred, &data.targets).unwrap()
    };
    (0..net.param_count())
        .map(|i| {
            let w0 = probe.weights()[i];
            probe.weights_mut()[i] = w0 + step;
            let up = loss(&probe);
            probe.weights_mut()[i] = w0 - step;
            let down = loss(&probe);
            probe.weights_mut()[i] = w0;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest elementwise relative error between analytic and numeric gradients.
/// Entries whose magnitudes are both below `floor` are compared on that scale.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn analytic_gradient(net: &Network<f64>, data: &Samples<f64>) -> Vec<f64> {
    let all: Vec<usize> = (0..data.len()).collect();
    gradient(net, data, &all).unwrap().1
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Cyclic Jacobi eigensolver for a dense symmetric matrix (row-major `n x n`).
/// Returns eigenvalues in descending order with matching unit eigenvectors.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y * n + y].total_cmp(&a[x * n + x]));
    let vals = order.iter().map(|&k| a[k * n + k]).collect();
    let vecs = order
        .iter()
        .map(|&k| (0..n).map(|i| v[i * n + k]).collect())
        .collect();
    (vals, vecs)
}

pub fn random_snapshots(n: usize, t: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn record(id: u64, nll: Option<f64>, status: Status) -> CatalogRecord {
    CatalogRecord {
        id,
        arch: ArchConfig(vec![0]),
        hyper: HyperConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            optimizer: OptimizerKind::Sgd,
        },
        checkpoint: None,
        valid_nll: nll,
        status,
        completion_index: id as usize,
        parent: None,
        submitted_after: 0,
        message: None,
    }
}

pub fn random_members(r: &mut impl Rng, k: usize, n: usize) -> Vec<GaussianPrediction<f64>> {
    (0..k)
        .map(|_| {
            GaussianPrediction::new(
                (0..n).map(|_| r.random_range(-3.0..3.0)).collect(),
                (0..n).map(|_| r.random_range(0.05..2.0)).collect(),
            )
            .unwrap()
        })
        .collect()
}

/// Variance of the equal-weight Gaussian mixture at output `i`, by sampling.
pub fn mixture_variance_mc(preds: &[GaussianPrediction<f64>], i: usize, draws: usize, r: &mut impl Rng) -> f64 {
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let p = &preds[r.random_range(0..preds.len())];
        let x = Normal::new(p.mean[i], p.variance[i].sqrt()).unwrap().sample(r);
        s += x;
        s2 += x * x;
    }
    let m = s / draws as f64;
    s2 / draws as f64 - m * m
}

/// Replays the catalog and checks the aging and mutation invariants.
pub fn check_log(records: &[CatalogRecord], p: usize) {
    let by_id: std::collections::HashMap<u64, &CatalogRecord> = records.iter().map(|r| (r.id, r)).collect();
    for r in records {
        let before: Vec<&CatalogRecord> = records[..r.submitted_after].iter().filter(|x| x.is_ok()).collect();
        let pop = &before[before.len().saturating_sub(p)..];
        match r.parent {
            None => assert!(pop.len() < p, "record {} random after fill", r.id),
            Some(pid) => {
                assert_eq!(pop.len(), p, "record {} mutated before fill", r.id);
                assert!(pop.iter().any(|m| m.id == pid), "parent {pid} of {} not in population", r.id);
                assert_eq!(by_id[&pid].arch.hamming(&r.arch), 1);
            }
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::grid::{GridGeometry, LandMask};

/// `y = x^3 + e`, `sd(e) = 0.3 |x|`, with `x` uniform on `range`.
pub fn heteroscedastic(size: usize, range: (f64, f64), seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let xs: Vec<f64> = (0..size).map(|_| rng.random_range(range.0..=range.1)).collect();
    let ys = xs.iter().map(|&x| x.powi(3) + 0.3 * x.abs() * std.sample(&mut rng)).collect();
    (xs, ys)
}

pub fn heteroscedastic_sd(x: f64) -> f64 {
    0.3 * x.abs()
}

/// Sum of `waves` traveling sinusoids with distinct integer wavenumbers on a
/// periodic 1-D domain of `n` points. Each wave spans two spatial modes.
pub fn traveling_waves(n: usize, steps: usize, waves: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64, f64, f64)> = (1..=waves)
        .map(|k| {
            (
                k as f64,
                rng.random_range(0.5..2.0),
                rng.random_range(0.1..0.9),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    (0..steps)
        .map(|t| {
            (0..n)
                .map(|i| {
                    let x = std::f64::consts::TAU * i as f64 / n as f64;
                    params
                        .iter()
                        .map(|&(k, a, w, p)| a * (k * x - w * t as f64 + p).sin())
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Toy temperature fields on `geometry`: a latitude profile, a seasonal cycle,
/// a few eastward waves and small noise, with a rectangular continent as land.
pub fn synthetic_sst(geometry: GridGeometry, weeks: usize, seed: u64) -> (LandMask, Vec<Vec<f32>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).expect("valid sd");
    let ocean: Vec<bool> = (0..geometry.len())
        .map(|i| {
            let (lat, lon) = (geometry.lat_of(i), geometry.lon_of(i));
            !((20.0..=60.0).contains(&lat) && (60.0..=120.0).contains(&lon)) && lat.abs() < 80.0
        })
        .collect();
    let mask = LandMask::new(geometry, ocean).expect("sizes agree");
    let waves: Vec<(f64, f64, f64)> = (1..=3)
        .map(|k| (k as f64, rng.random_range(0.3..1.0), rng.random_range(0.05..0.3)))
        .collect();
    let grids = (0..weeks)
        .map(|t| {
            let season = (std::f64::consts::TAU * t as f64 / 52.18).sin();
            (0..geometry.len())
                .map(|i| {
                    if !mask.is_ocean(i) {
                        return f32::NAN;
                    }
                    let lat = geometry.lat_of(i).to_radians();
                    let lon = geometry.lon_of(i).to_radians();
                    let base = 28.0 * lat.cos().powi(2) - 1.0 + 3.0 * season * lat.sin();
                    let w: f64 = waves
                        .iter()
                        .map(|&(k, a, om)| a * lat.cos() * (k * lon - om * t as f64).sin())
                        .sum();
                    (base + w + noise.sample(&mut rng)) as f32
                })
                .collect()
        })
        .collect();
    (mask, grids)
}

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::LandMask;
use crate::error::{Error, Result};
use crate::real::Real;

pub const DEFAULT_SENSORS: usize = 50;
pub const DEFAULT_BAND: (f64, f64) = (-50.0, 50.0);

/// Sparse sensor locations and the observation operator they induce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSet {
    /// Grid indices.
    pub indices: Vec<usize>,
    /// Matching positions in the flattened ocean vector.
    pub positions: Vec<usize>,
}

/// `n` distinct ocean points drawn uniformly from the latitude band `[lo, hi]`.
pub fn sample_sensors(mask: &LandMask, n: usize, band: (f64, f64), seed: u64) -> Result<SensorSet> {
    let g = mask.geometry();
    let eligible: Vec<usize> = (0..mask.n_ocean())
        .filter(|&p| {
            let lat = g.lat_of(mask.ocean_indices()[p]);
            lat >= band.0 && lat <= band.1
        })
        .collect();
    if n == 0 || n > eligible.len() {
        return Err(Error::Config(format!(
            "{n} sensors requested but {} ocean points lie in latitude band [{}, {}]",
            eligible.len(),
            band.0,
            band.1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = index::sample(&mut rng, eligible.len(), n)
        .into_iter()
        .map(|k| eligible[k])
        .collect();
    positions.sort_unstable();
    Ok(SensorSet {
        indices: positions.iter().map(|&p| mask.ocean_indices()[p]).collect(),
        positions,
    })
}

impl SensorSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Applies the observation operator to a flattened ocean vector.
    pub fn observe<T: Real>(&self, flat: &[T]) -> Result<Vec<T>> {
        if let Some(&p) = self.positions.iter().find(|&&p| p >= flat.len()) {
            return Err(Error::dims(p + 1, flat.len(), "ocean vector"));
        }
        Ok(self.positions.iter().map(|&p| flat[p]).collect())
    }

    /// Applies the observation operator to a full grid.
    pub fn observe_grid(&self, grid: &[f32]) -> Result<Vec<f32>> {
        if let Some(&i) = self.indices.iter().find(|&&i| i >= grid.len()) {
            return Err(Error::dims(i + 1, grid.len(), "grid"));
        }
        Ok(self.indices.iter().map(|&i| grid[i]).collect())
    }
}

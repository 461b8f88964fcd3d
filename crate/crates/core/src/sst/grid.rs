use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Cell-centred regular lat/lon grid, row-major with rows running north to south.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub height: usize,
    pub width: usize,
}

pub const NOAA_HEIGHT: usize = 180;
pub const NOAA_WIDTH: usize = 360;

impl GridGeometry {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Config(format!("grid {height}x{width} is empty")));
        }
        Ok(Self { height, width })
    }

    pub fn one_degree() -> Self {
        Self {
            height: NOAA_HEIGHT,
            width: NOAA_WIDTH,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    /// Latitude of a row centre in degrees north; 89.5 for row 0 on the one-degree grid.
    pub fn lat(&self, row: usize) -> f64 {
        90.0 - (row as f64 + 0.5) * 180.0 / self.height as f64
    }

    /// Longitude of a column centre in degrees east on [0, 360); 0.5 for column 0.
    pub fn lon(&self, col: usize) -> f64 {
        (col as f64 + 0.5) * 360.0 / self.width as f64
    }

    pub fn lat_of(&self, index: usize) -> f64 {
        self.lat(index / self.width)
    }

    pub fn lon_of(&self, index: usize) -> f64 {
        self.lon(index % self.width)
    }
}

/// Ocean/land indicator. Flattened vectors hold ocean points in grid order.
#[derive(Clone, Debug, PartialEq)]
pub struct LandMask {
    geometry: GridGeometry,
    ocean: Vec<bool>,
    ocean_indices: Vec<usize>,
}

impl LandMask {
    pub fn new(geometry: GridGeometry, ocean: Vec<bool>) -> Result<Self> {
        if ocean.len() != geometry.len() {
            return Err(Error::dims(geometry.len(), ocean.len(), "mask size"));
        }
        let ocean_indices = ocean.iter().enumerate().filter(|(_, &o)| o).map(|(i, _)| i).collect();
        Ok(Self {
            geometry,
            ocean,
            ocean_indices,
        })
    }

    pub fn all_ocean(geometry: GridGeometry) -> Self {
        Self::new(geometry, vec![true; geometry.len()]).expect("sizes agree")
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn is_ocean(&self, index: usize) -> bool {
        self.ocean[index]
    }

    pub fn ocean(&self) -> &[bool] {
        &self.ocean
    }

    pub fn n_ocean(&self) -> usize {
        self.ocean_indices.len()
    }

    /// Grid index of each flattened position.
    pub fn ocean_indices(&self) -> &[usize] {
        &self.ocean_indices
    }

    pub fn flatten<T: Real>(&self, grid: &[f32]) -> Result<Vec<T>> {
        if grid.len() != self.geometry.len() {
            return Err(Error::dims(self.geometry.len(), grid.len(), "grid size"));
        }
        Ok(self.ocean_indices.iter().map(|&i| T::lit(grid[i] as f64)).collect())
    }

    /// Land points are filled with NaN.
    pub fn unflatten<T: Real>(&self, values: &[T]) -> Result<Vec<T>> {
        if values.len() != self.n_ocean() {
            return Err(Error::dims(self.n_ocean(), values.len(), "ocean vector"));
        }
        let mut grid = vec![T::nan(); self.geometry.len()];
        for (&i, &v) in self.ocean_indices.iter().zip(values) {
            grid[i] = v;
        }
        Ok(grid)
    }
}

/// Latitude/longitude box, inclusive, in degrees (longitude on [0, 360)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

pub const EASTERN_PACIFIC: Region = Region {
    lat_min: -10.0,
    lat_max: 10.0,
    lon_min: 200.0,
    lon_max: 250.0,
};

impl Region {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }

    /// Flattened positions of the ocean points inside the region.
    pub fn ocean_positions(&self, mask: &LandMask) -> Vec<usize> {
        let g = mask.geometry();
        mask.ocean_indices()
            .iter()
            .enumerate()
            .filter(|(_, &i)| self.contains(g.lat_of(i), g.lon_of(i)))
            .map(|(p, _)| p)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_degree_orientation() {
        let g = GridGeometry::one_degree();
        assert_eq!(g.lat(0), 89.5);
        assert_eq!(g.lat(179), -89.5);
        assert_eq!(g.lon(0), 0.5);
        assert_eq!(g.lon(359), 359.5);
        assert_eq!(g.row_col(g.index(3, 7)), (3, 7));
    }

    #[test]
    fn toy_round_trip() {
        let g = GridGeometry::new(2, 2).unwrap();
        let m = LandMask::all_ocean(g);
        let v: Vec<f64> = m.flatten(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0]);
        let m = LandMask::new(g, vec![true, false, true, true]).unwrap();
        let v: Vec<f64> = m.flatten(&[1.0, f32::NAN, 3.0, 4.0]).unwrap();
        assert_eq!(v, vec![1.0, 3.0, 4.0]);
        let back = m.unflatten(&v).unwrap();
        assert!(back[1].is_nan());
        assert_eq!((back[0], back[2], back[3]), (1.0, 3.0, 4.0));
        assert!(m.unflatten(&[1.0f64]).is_err());
    }
}

//! Sea-surface temperature data handling and evaluation metrics.

mod grid;
pub mod io;
pub mod metrics;
mod sensors;
pub mod synth;
mod windows;

pub use grid::{GridGeometry, LandMask, Region, EASTERN_PACIFIC, NOAA_HEIGHT, NOAA_WIDTH};
pub use io::{load_snapshots, SstDataset};
pub use sensors::{sample_sensors, SensorSet, DEFAULT_BAND, DEFAULT_SENSORS};
pub use windows::{build_forecast_windows, window_count, Standardizer, WindowedDataset, DEFAULT_TAU};

/// Weekly snapshots in the full one-degree record.
pub const TOTAL_WEEKS: usize = 1914;
/// Leading weeks used to fit the forecasting model; the rest are test weeks.
pub const FORECAST_TRAIN_WEEKS: usize = 427;
/// Leading weeks used to fit the reconstruction model.
pub const RECONSTRUCT_TRAIN_WEEKS: usize = 1040;

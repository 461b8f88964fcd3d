use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arch::{IoShape, SearchSpace, DEFAULT_NODES, DEFAULT_SKIP_SPAN, DEFAULT_WIDTHS};
use crate::ensemble::{Projection, DEFAULT_K};
use crate::error::{Error, Result};
use crate::hpo::{BoConfig, HyperSpace, LiarStrategy};
use crate::nn::{Activation, LayerSpec};
use crate::pod::{ModeSelection, DEFAULT_ENERGY, DEFAULT_MAX_MODES};
use crate::search::SearchConfig;
use crate::sst::{DEFAULT_SENSORS, DEFAULT_TAU, FORECAST_TRAIN_WEEKS, RECONSTRUCT_TRAIN_WEEKS};

/// Environment variable naming the directory that relative run directories live under.
pub const RUN_ROOT_ENV: &str = "AGEBO_RUN_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Forecast,
    Reconstruct,
    Synthetic,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub snapshots: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    /// Synthetic task: training points and their x range.
    pub train_size: Option<usize>,
    pub x_range: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceConfig {
    pub nodes: Option<usize>,
    pub widths: Option<Vec<usize>>,
    pub skip_span: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub population_size: usize,
    pub sample_size: usize,
    pub workers: usize,
    pub max_evals: Option<usize>,
    pub max_seconds: Option<f64>,
    pub kappa: f64,
    pub liar: LiarStrategy,
    pub pool_size: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        let s = SearchConfig::default();
        Self {
            population_size: s.population_size,
            sample_size: s.sample_size,
            workers: s.workers,
            max_evals: s.max_evals,
            max_seconds: s.max_seconds,
            kappa: s.bo.kappa,
            liar: s.bo.liar,
            pool_size: s.bo.pool_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub max_epochs: usize,
    pub lr_patience: usize,
    pub lr_factor: f64,
    pub early_stop_patience: usize,
    pub valid_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            lr_patience: 15,
            lr_factor: 0.5,
            early_stop_patience: 20,
            valid_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub k: usize,
    pub projection: Projection,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            projection: Projection::Quadrature,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodSection {
    /// Fixed mode count; when absent the energy rule applies.
    pub modes: Option<usize>,
    pub energy: f64,
    pub max_modes: usize,
}

impl Default for PodSection {
    fn default() -> Self {
        Self {
            modes: None,
            energy: DEFAULT_ENERGY,
            max_modes: DEFAULT_MAX_MODES,
        }
    }
}

impl PodSection {
    pub fn selection(&self) -> ModeSelection {
        match self.modes {
            Some(m) => ModeSelection::Fixed(m),
            None => ModeSelection::Energy {
                fraction: self.energy,
                max_modes: self.max_modes,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub count: usize,
    pub lat_min: f64,
    pub lat_max: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            count: DEFAULT_SENSORS,
            lat_min: -50.0,
            lat_max: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub tau: usize,
    /// Leading weeks in the training split; task default when absent.
    pub train_weeks: Option<usize>,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            train_weeks: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub space: SpaceConfig,
    #[serde(default)]
    pub hyper: HyperSpace,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub pod: PodSection,
    #[serde(default)]
    pub sensors: SensorSection,
    #[serde(default)]
    pub split: SplitSection,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub workers: Option<usize>,
    pub max_evals: Option<usize>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`, applies overrides, fills task defaults and makes paths
    /// absolute. Returns the resolved config and the verbatim file text.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|_| Error::MissingData(path.to_path_buf()))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve(&base, overrides)?;
        Ok((cfg, text))
    }

    pub fn resolve(&mut self, config_dir: &Path, o: &Overrides) -> Result<()> {
        if let Some(w) = o.workers {
            self.search.workers = w;
        }
        if let Some(m) = o.max_evals {
            self.search.max_evals = Some(m);
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(k) = o.k {
            self.ensemble.k = k;
        }
        for p in [&mut self.data.snapshots, &mut self.data.mask].into_iter().flatten() {
            if p.is_relative() {
                *p = config_dir.join(&*p);
            }
        }
        self.output_dir = resolve_run_dir(&self.output_dir);
        let (nodes, widths) = match self.task {
            TaskKind::Synthetic => (3, vec![8, 16, 32, 64]),
            _ => (DEFAULT_NODES, DEFAULT_WIDTHS.to_vec()),
        };
        self.space.nodes.get_or_insert(nodes);
        self.space.widths.get_or_insert(widths);
        self.space.skip_span.get_or_insert(DEFAULT_SKIP_SPAN);
        match self.task {
            TaskKind::Synthetic => {
                self.data.train_size.get_or_insert(1000);
                self.data.x_range.get_or_insert([-1.0, 1.0]);
            }
            TaskKind::Forecast => {
                self.split.train_weeks.get_or_insert(FORECAST_TRAIN_WEEKS);
            }
            TaskKind::Reconstruct => {
                self.split.train_weeks.get_or_insert(RECONSTRUCT_TRAIN_WEEKS);
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.search_config().validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.ensemble.k == 0 {
            return bad("ensemble k must be >= 1");
        }
        if !(self.train.valid_fraction > 0.0 && self.train.valid_fraction < 1.0) {
            return bad("valid_fraction must lie in (0, 1)");
        }
        if self.train.max_epochs == 0 || !(self.train.lr_factor > 0.0 && self.train.lr_factor < 1.0) {
            return bad("max_epochs must be positive and lr_factor in (0, 1)");
        }
        if self.space.nodes == Some(0) || self.space.widths.as_ref().is_some_and(|w| w.is_empty() || w.contains(&0)) {
            return bad("space needs at least one node and positive widths");
        }
        if self.split.tau == 0 {
            return bad("tau must be positive");
        }
        if self.sensors.count == 0 || self.sensors.lat_min > self.sensors.lat_max {
            return bad("sensor count must be positive and the band nonempty");
        }
        if !(self.pod.energy > 0.0 && self.pod.energy <= 1.0) || self.pod.max_modes == 0 || self.pod.modes == Some(0) {
            return bad("pod energy must lie in (0, 1] and mode counts be positive");
        }
        match self.task {
            TaskKind::Synthetic => {
                let [lo, hi] = self.data.x_range.unwrap_or([-1.0, 1.0]);
                if !(lo < hi) || self.data.train_size.is_some_and(|n| n < 10) {
                    return bad("synthetic task needs x_range lo < hi and train_size >= 10");
                }
            }
            _ => {
                for (name, p) in [("snapshots", &self.data.snapshots), ("mask", &self.data.mask)] {
                    match p {
                        None => return Err(Error::Config(format!("data.{name} is required for this task"))),
                        Some(p) if !p.exists() => return Err(Error::MissingData(p.clone())),
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    pub fn search_config(&self) -> SearchConfig {
        let s = &self.search;
        SearchConfig {
            population_size: s.population_size,
            sample_size: s.sample_size,
            workers: s.workers,
            max_evals: s.max_evals,
            max_seconds: s.max_seconds,
            seed: self.seed,
            bo: BoConfig {
                kappa: s.kappa,
                liar: s.liar,
                pool_size: s.pool_size,
                ..BoConfig::default()
            },
        }
    }

    pub fn search_space(&self, io: IoShape) -> Result<SearchSpace> {
        let nodes = self.space.nodes.unwrap_or(DEFAULT_NODES);
        let widths = self.space.widths.clone().unwrap_or_else(|| DEFAULT_WIDTHS.to_vec());
        let span = self.space.skip_span.unwrap_or(DEFAULT_SKIP_SPAN);
        let mut opts = vec![LayerSpec::identity()];
        match self.task {
            TaskKind::Forecast => opts.extend(widths.iter().map(|&w| LayerSpec::recurrent(w))),
            _ => {
                for &w in &widths {
                    for a in [Activation::Relu, Activation::Tanh] {
                        opts.push(LayerSpec::dense(w, a));
                    }
                }
            }
        }
        SearchSpace::new(io, vec![opts; nodes], span)
    }
}

/// Joins a relative run directory onto the run root, when one is set.
pub fn resolve_run_dir(dir: &Path) -> PathBuf {
    match std::env::var_os(RUN_ROOT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

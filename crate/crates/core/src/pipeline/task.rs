use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::config::{RunConfig, TaskKind};
use crate::arch::{IoShape, SearchSpace};
use crate::error::{Error, Result};
use crate::nn::{build_network, checkpoint, train, Samples, TrainingConfig};
use crate::pod::{PodBasis, SnapshotMatrix};
use crate::search::{derive_seed, Evaluation, Evaluator, Job};
use crate::sst::synth::heteroscedastic;
use crate::sst::{build_forecast_windows, load_snapshots, sample_sensors, SensorSet, SstDataset, Standardizer};

pub const POD_FILE: &str = "pod.bin";
pub const STANDARDIZER_FILE: &str = "standardizer.json";
pub const SENSORS_FILE: &str = "sensors.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Seed offsets so data generation, sensors and the search draw independent streams.
const DATA_STREAM: u64 = 0xD474;
const SENSOR_STREAM: u64 = 0x5E45;

/// Training data and search space for one task, ready for the search.
pub struct PreparedTask {
    pub space: SearchSpace,
    pub train: Samples<f64>,
    pub valid: Samples<f64>,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<SstDataset> {
    let snaps = cfg.data.snapshots.as_ref().ok_or(Error::Config("data.snapshots missing".into()))?;
    let mask = cfg.data.mask.as_ref().ok_or(Error::Config("data.mask missing".into()))?;
    load_snapshots(snaps, mask)
}

pub fn to_f64(weeks: &[Vec<f32>]) -> Vec<Vec<f64>> {
    weeks.iter().map(|w| w.iter().map(|&v| v as f64).collect()).collect()
}

/// Builds the training samples and writes any fitted artifacts into `run_dir`.
pub fn prepare(cfg: &RunConfig, run_dir: &Path) -> Result<PreparedTask> {
    let (io, samples) = match cfg.task {
        TaskKind::Synthetic => {
            let n = cfg.data.train_size.unwrap_or(1000);
            let [lo, hi] = cfg.data.x_range.unwrap_or([-1.0, 1.0]);
            let (xs, ys) = heteroscedastic(n, (lo, hi), derive_seed(cfg.seed, DATA_STREAM));
            let io = IoShape {
                input_dim: 1,
                seq_len: 1,
                output_dim: 1,
            };
            (io, Samples::new(xs, ys, 1, 1)?)
        }
        TaskKind::Forecast => {
            let data = load_dataset(cfg)?;
            let (train_weeks, _) = data.split(cfg.split.train_weeks.unwrap_or(0))?;
            let train_weeks = to_f64(train_weeks);
            let basis = PodBasis::fit(&SnapshotMatrix::from_snapshots(&train_weeks)?, cfg.pod.selection())?;
            log::info!(
                "pod: {} modes retain {:.4} of the training energy",
                basis.mode_count(),
                basis.retained_energy()
            );
            let coeffs = train_weeks.iter().map(|w| basis.project(w)).collect::<Result<Vec<_>>>()?;
            let scaler = Standardizer::fit(&coeffs)?;
            let scaled: Vec<Vec<f64>> = coeffs.iter().map(|c| scaler.apply(c)).collect();
            let windows = build_forecast_windows(&scaled, cfg.split.tau)?;
            basis.save(&run_dir.join(POD_FILE))?;
            std::fs::write(run_dir.join(STANDARDIZER_FILE), serde_json::to_string_pretty(&scaler)?)?;
            let m = basis.mode_count();
            let io = IoShape {
                input_dim: m,
                seq_len: cfg.split.tau + 1,
                output_dim: cfg.split.tau * m,
            };
            (io, windows.samples)
        }
        TaskKind::Reconstruct => {
            let data = load_dataset(cfg)?;
            let sensors = sample_sensors(
                &data.mask,
                cfg.sensors.count,
                (cfg.sensors.lat_min, cfg.sensors.lat_max),
                derive_seed(cfg.seed, SENSOR_STREAM),
            )?;
            std::fs::write(run_dir.join(SENSORS_FILE), serde_json::to_string_pretty(&sensors)?)?;
            let (train_weeks, _) = data.split(cfg.split.train_weeks.unwrap_or(0))?;
            let train_weeks = to_f64(train_weeks);
            let samples = observation_samples(&sensors, &train_weeks)?;
            let io = IoShape {
                input_dim: sensors.len(),
                seq_len: 1,
                output_dim: data.mask.n_ocean(),
            };
            (io, samples)
        }
    };
    let (train, valid) = samples.split_tail(cfg.train.valid_fraction)?;
    Ok(PreparedTask {
        space: cfg.search_space(io)?,
        train,
        valid,
    })
}

/// Sensor readings as inputs, full ocean fields as targets.
pub fn observation_samples(sensors: &SensorSet, fields: &[Vec<f64>]) -> Result<Samples<f64>> {
    let n = fields.first().map_or(0, Vec::len);
    let mut inputs = Vec::with_capacity(fields.len() * sensors.len());
    let mut targets = Vec::with_capacity(fields.len() * n);
    for f in fields {
        inputs.extend(sensors.observe(f)?);
        targets.extend_from_slice(f);
    }
    Samples::new(inputs, targets, sensors.len(), n.max(1))
}

pub fn load_pod(run_dir: &Path) -> Result<PodBasis<f64>> {
    PodBasis::load(&run_dir.join(POD_FILE))
}

pub fn load_standardizer(run_dir: &Path) -> Result<Standardizer> {
    read_json(&run_dir.join(STANDARDIZER_FILE))
}

pub fn load_sensors(run_dir: &Path) -> Result<SensorSet> {
    read_json(&run_dir.join(SENSORS_FILE))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|_| Error::MissingData(path.to_path_buf()))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn checkpoint_name(id: u64) -> String {
    format!("{CHECKPOINT_DIR}/{id:06}.nnw")
}

/// Trains each candidate and writes its best checkpoint under the run directory.
pub struct TrainingEvaluator {
    pub space: Arc<SearchSpace>,
    pub train: Arc<Samples<f64>>,
    pub valid: Arc<Samples<f64>>,
    pub template: TrainingConfig,
    pub run_dir: PathBuf,
}

impl TrainingEvaluator {
    pub fn new(task: PreparedTask, cfg: &RunConfig, run_dir: &Path) -> Self {
        let t = &cfg.train;
        Self {
            space: Arc::new(task.space),
            train: Arc::new(task.train),
            valid: Arc::new(task.valid),
            template: TrainingConfig {
                lr_patience: t.lr_patience,
                lr_factor: t.lr_factor,
                early_stop_patience: t.early_stop_patience,
                max_epochs: t.max_epochs,
                ..TrainingConfig::default()
            },
            run_dir: run_dir.to_path_buf(),
        }
    }

    fn run(&self, job: &Job) -> Result<Evaluation> {
        let spec = self.space.decode(&job.arch)?;
        let net = build_network::<f64>(spec, job.seed)?;
        let cfg = TrainingConfig {
            learning_rate: job.hyper.learning_rate,
            batch_size: job.hyper.batch_size,
            optimizer: job.hyper.optimizer,
            seed: job.seed,
            ..self.template.clone()
        };
        let out = train(net, &self.train, &self.valid, &cfg)?;
        let name = checkpoint_name(job.id);
        checkpoint::save(&out.network, &self.run_dir.join(&name))?;
        if out.diverged {
            Ok(Evaluation::diverged(Some(out.best_valid_nll), Some(name)))
        } else {
            Ok(Evaluation::ok(out.best_valid_nll, Some(name)))
        }
    }
}

impl Evaluator for TrainingEvaluator {
    fn evaluate(&self, job: &Job) -> Evaluation {
        self.run(job).unwrap_or_else(|e| Evaluation::failed(e.to_string()))
    }
}

//! Aging evolution over architectures combined with asynchronous BO over
//! training hyperparameters, run by one manager over a pool of workers.

mod catalog;
mod pool;
mod population;

pub use catalog::{Catalog, CatalogRecord, Status, Timing};
pub use pool::{Finished, WorkerPool};
pub use population::{select_parent, Member, Population};

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{ArchConfig, SearchSpace};
use crate::error::{Error, Result};
use crate::hpo::{BayesOpt, BoConfig, HyperConfig, HyperSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub population_size: usize,
    pub sample_size: usize,
    pub workers: usize,
    pub max_evals: Option<usize>,
    pub max_seconds: Option<f64>,
    pub seed: u64,
    pub bo: BoConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population_size: 32,
            sample_size: 8,
            workers: 1,
            max_evals: Some(100),
            max_seconds: None,
            seed: 0,
            bo: BoConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 || self.sample_size > self.population_size {
            return Err(Error::Config(format!(
                "need 1 <= S <= P, got S={} P={}",
                self.sample_size, self.population_size
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("need at least one worker".into()));
        }
        if self.max_evals.is_none() && self.max_seconds.is_none() {
            return Err(Error::Config("no stopping criterion".into()));
        }
        if self.max_seconds.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::Config("max_seconds must be positive".into()));
        }
        self.bo.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: u64,
    pub arch: ArchConfig,
    pub hyper: HyperConfig,
    pub seed: u64,
}

/// Result of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub status: Status,
    pub valid_nll: Option<f64>,
    pub checkpoint: Option<String>,
    pub message: Option<String>,
}

impl Evaluation {
    pub fn ok(valid_nll: f64, checkpoint: Option<String>) -> Self {
        let status = if valid_nll.is_finite() { Status::Ok } else { Status::Diverged };
        Self {
            status,
            valid_nll: Some(valid_nll).filter(|v| v.is_finite()),
            checkpoint,
            message: None,
        }
    }

    pub fn diverged(best_nll: Option<f64>, checkpoint: Option<String>) -> Self {
        Self {
            status: Status::Diverged,
            valid_nll: best_nll.filter(|v| v.is_finite()),
            checkpoint,
            message: None,
        }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        Self {
            status: Status::Failed,
            valid_nll: None,
            checkpoint: None,
            message: Some(message.into()),
        }
    }
}

/// Trains one candidate. Runs on worker threads.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, job: &Job) -> Evaluation;
}

/// Per-job seed mixed from the run seed and the job id (splitmix64 finalizer).
pub fn derive_seed(base: u64, id: u64) -> u64 {
    let mut z = base ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub catalog: Catalog,
    pub population: Population,
    /// Largest population size observed after any update.
    pub max_population: usize,
    /// Completion index at which the population first reached capacity.
    pub filled_at: Option<usize>,
}

const POLL: Duration = Duration::from_millis(50);

/// Runs the manager loop until the stopping criterion, then drains in-flight jobs.
pub fn run_search(
    space: &SearchSpace,
    hyper_space: &HyperSpace,
    evaluator: Arc<dyn Evaluator>,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bo = BayesOpt::new(*hyper_space, cfg.bo)?;
    let mut pool = WorkerPool::new(cfg.workers, evaluator)?;
    let mut population = Population::new(cfg.population_size);
    let mut catalog = Catalog::default();
    let mut max_population = 0;
    let mut filled_at = None;
    let mut next_id = 1u64;
    let mut parents: Vec<Option<u64>> = Vec::new();
    let mut submitted_after: Vec<usize> = Vec::new();

    let budget_left = |submitted: u64, start: &Instant| {
        let evals = cfg.max_evals.map_or(usize::MAX, |m| m.saturating_sub(submitted as usize));
        let timed_out = cfg.max_seconds.is_some_and(|s| start.elapsed().as_secs_f64() >= s);
        if timed_out {
            0
        } else {
            evals
        }
    };

    let initial = cfg.workers.min(budget_left(0, &start));
    if initial > 0 {
        let hypers = bo.ask(initial, &mut rng)?;
        for hyper in hypers {
            let arch = space.random_sample(&mut rng);
            submit(&mut pool, &mut next_id, arch, hyper, None, 0, cfg.seed, &mut parents, &mut submitted_after)?;
        }
    }

    while pool.in_flight() > 0 {
        let results = pool.wait_finished(POLL)?;
        if results.is_empty() {
            continue;
        }
        let n = results.len();
        for f in results {
            let idx = (f.job.id - 1) as usize;
            let ev = f.evaluation;
            let rec = CatalogRecord {
                id: f.job.id,
                arch: f.job.arch,
                hyper: f.job.hyper,
                checkpoint: ev.checkpoint,
                valid_nll: ev.valid_nll,
                status: ev.status,
                completion_index: catalog.len(),
                parent: parents[idx],
                submitted_after: submitted_after[idx],
                message: ev.message,
            };
            if rec.is_ok() {
                let nll = rec.valid_nll.expect("ok record has a score");
                population.push(Member {
                    id: rec.id,
                    arch: rec.arch.clone(),
                    valid_nll: nll,
                });
                bo.tell(rec.hyper, -nll)?;
            } else {
                log::warn!("evaluation {} {:?}: {:?}", rec.id, rec.status, rec.message);
                bo.forget(&rec.hyper)?;
            }
            max_population = max_population.max(population.len());
            if filled_at.is_none() && population.is_full() {
                filled_at = Some(rec.completion_index);
            }
            catalog.timings.push(Timing {
                id: rec.id,
                train_seconds: f.wall_seconds,
                completed_at_seconds: start.elapsed().as_secs_f64(),
            });
            catalog.records.push(rec);
        }

        let q = n.min(budget_left(next_id - 1, &start));
        if q == 0 {
            continue;
        }
        let hypers = bo.ask(q, &mut rng)?;
        for hyper in hypers {
            let (arch, parent) = if population.is_full() {
                let p = select_parent(&population, cfg.sample_size, &mut rng)?;
                (space.mutate(&p.arch, &mut rng)?, Some(p.id))
            } else {
                (space.random_sample(&mut rng), None)
            };
            let after = catalog.len();
            submit(&mut pool, &mut next_id, arch, hyper, parent, after, cfg.seed, &mut parents, &mut submitted_after)?;
        }
    }
    pool.shutdown();
    Ok(SearchOutcome {
        catalog,
        population,
        max_population,
        filled_at,
    })
}

#[allow(clippy::too_many_arguments)]
fn submit(
    pool: &mut WorkerPool,
    next_id: &mut u64,
    arch: ArchConfig,
    hyper: HyperConfig,
    parent: Option<u64>,
    after: usize,
    base_seed: u64,
    parents: &mut Vec<Option<u64>>,
    submitted_after: &mut Vec<usize>,
) -> Result<()> {
    let id = *next_id;
    *next_id += 1;
    parents.push(parent);
    submitted_after.push(after);
    pool.submit(Job {
        id,
        arch,
        hyper,
        seed: derive_seed(base_seed, id),
    })?;
    Ok(())
}

/// Synthetic objective for exercising the orchestrator without training:
/// lower NLL for architectures with small decision values and learning rates
/// near 1e-2, plus seeded noise.
#[derive(Clone, Debug, Default)]
pub struct StubEvaluator {
    pub delay: Duration,
    /// Jobs whose id is a multiple of this panic.
    pub panic_every: Option<u64>,
}

impl Evaluator for StubEvaluator {
    fn evaluate(&self, job: &Job) -> Evaluation {
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        if self.panic_every.is_some_and(|k| job.id.is_multiple_of(k)) {
            panic!("stub failure for job {}", job.id);
        }
        let arch: f64 = job.arch.0.iter().map(|&v| v as f64).sum::<f64>() / job.arch.0.len().max(1) as f64;
        let lr = (job.hyper.learning_rate.log10() + 2.0).powi(2);
        let noise = ChaCha8Rng::seed_from_u64(job.seed).random_range(-0.05..0.05);
        Evaluation::ok(arch * 0.1 + lr * 0.2 + noise, None)
    }
}

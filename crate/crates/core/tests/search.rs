mod common;

use std::collections::HashSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use agebo_uq::arch::{ArchConfig, IoShape, SearchSpace};
use agebo_uq::hpo::{HyperConfig, HyperSpace};
use agebo_uq::nn::OptimizerKind;
use agebo_uq::search::{
    run_search, select_parent, Catalog, CatalogRecord, Evaluation, Evaluator, Job, Member, Population,
    SearchConfig, Status, StubEvaluator, WorkerPool,
};
use common::{check_log, rng};
use rand::Rng;

fn space() -> SearchSpace {
    SearchSpace::dense_default(IoShape {
        input_dim: 3,
        seq_len: 1,
        output_dim: 2,
    })
}

fn cfg(workers: usize, evals: usize, seed: u64) -> SearchConfig {
    SearchConfig {
        population_size: 8,
        sample_size: 3,
        workers,
        max_evals: Some(evals),
        seed,
        ..SearchConfig::default()
    }
}

fn stub() -> Arc<dyn Evaluator> {
    Arc::new(StubEvaluator::default())
}


#[test]
fn serial_counting() {
    let out = run_search(&space(), &HyperSpace::default(), stub(), &cfg(1, 5, 1)).unwrap();
    let ids: Vec<u64> = out.catalog.records.iter().map(|r| r.id).collect();
    assert_eq!(ids, vec![1, 2, 3, 4, 5]);
    assert!(out.catalog.records.iter().all(|r| r.status == Status::Ok));
}

#[test]
fn stress_many_workers() {
    let ev: Arc<dyn Evaluator> = Arc::new(StubEvaluator {
        delay: Duration::from_micros(300),
        panic_every: Some(17),
    });
    let c = cfg(8, 200, 2);
    let out = run_search(&space(), &HyperSpace::default(), ev, &c).unwrap();
    let recs = &out.catalog.records;
    assert_eq!(recs.len(), 200);
    let ids: HashSet<u64> = recs.iter().map(|r| r.id).collect();
    assert_eq!(ids, (1..=200).collect());
    assert!(out.max_population <= c.population_size);
    assert!(recs.iter().any(|r| r.status == Status::Failed));
    check_log(recs, c.population_size);
    let last_ok: Vec<u64> = recs.iter().filter(|r| r.is_ok()).map(|r| r.id).collect();
    let members: Vec<u64> = out.population.members().map(|m| m.id).collect();
    assert_eq!(members, last_ok[last_ok.len() - c.population_size..]);
    assert!(recs.iter().filter(|r| r.parent.is_some()).count() > 100);
}

#[test]
fn failures_are_recorded_and_excluded() {
    let ev: Arc<dyn Evaluator> = Arc::new(StubEvaluator {
        delay: Duration::ZERO,
        panic_every: Some(3),
    });
    let out = run_search(&space(), &HyperSpace::default(), ev, &cfg(2, 30, 3)).unwrap();
    let failed: Vec<&CatalogRecord> = out.catalog.records.iter().filter(|r| r.id % 3 == 0).collect();
    assert_eq!(failed.len(), 10);
    for f in failed {
        assert_eq!(f.status, Status::Failed);
        assert!(f.message.as_deref().unwrap().contains("stub failure"));
        assert!(out.population.members().all(|m| m.id != f.id));
        assert!(out.catalog.records.iter().all(|r| r.parent != Some(f.id)));
    }
}

#[test]
fn serial_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for k in 0..2 {
        let out = run_search(&space(), &HyperSpace::default(), stub(), &cfg(1, 40, 9)).unwrap();
        let path = dir.path().join(format!("catalog{k}.jsonl"));
        out.catalog.write_jsonl(&path).unwrap();
        files.push(std::fs::read(&path).unwrap());
        check_log(&out.catalog.records, 8);
        assert_eq!(Catalog::read_jsonl(&path).unwrap(), out.catalog.records);
    }
    assert_eq!(files[0], files[1]);
    let other = run_search(&space(), &HyperSpace::default(), stub(), &cfg(1, 40, 10)).unwrap();
    let path = dir.path().join("other.jsonl");
    other.catalog.write_jsonl(&path).unwrap();
    assert_ne!(std::fs::read(&path).unwrap(), files[0]);
}

#[test]
fn wall_clock_stop() {
    let ev: Arc<dyn Evaluator> = Arc::new(StubEvaluator {
        delay: Duration::from_millis(20),
        panic_every: None,
    });
    let c = SearchConfig {
        max_evals: None,
        max_seconds: Some(0.3),
        ..cfg(2, 0, 4)
    };
    let t = Instant::now();
    let out = run_search(&space(), &HyperSpace::default(), ev, &c).unwrap();
    assert!(t.elapsed() < Duration::from_secs(3));
    assert!(out.catalog.len() >= 2);
}

#[test]
fn invalid_configs() {
    let s = space();
    let h = HyperSpace::default();
    for bad in [
        SearchConfig { sample_size: 0, ..cfg(1, 5, 0) },
        SearchConfig { sample_size: 9, ..cfg(1, 5, 0) },
        SearchConfig { workers: 0, ..cfg(1, 5, 0) },
        SearchConfig { max_evals: None, ..cfg(1, 5, 0) },
    ] {
        assert!(run_search(&s, &h, stub(), &bad).is_err());
    }
}

fn job(id: u64) -> Job {
    Job {
        id,
        arch: ArchConfig(vec![0; 14]),
        hyper: HyperConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
        },
        seed: id,
    }
}

#[test]
fn pool_delivery_contract() {
    let ev: Arc<dyn Evaluator> = Arc::new(StubEvaluator {
        delay: Duration::from_millis(30),
        panic_every: None,
    });
    let mut pool = WorkerPool::new(4, ev).unwrap();
    let t = Instant::now();
    assert!(pool.check_finished().unwrap().is_empty());
    assert!(t.elapsed() < Duration::from_millis(10));
    let mut tickets = Vec::new();
    for id in 1..=4 {
        tickets.push(pool.submit(job(id)).unwrap());
    }
    assert!(t.elapsed() < Duration::from_millis(20), "submit blocked");
    let mut seen = Vec::new();
    while seen.len() < 4 {
        for f in pool.check_finished().unwrap() {
            assert!(f.evaluation.valid_nll.is_some());
            seen.push(f.job.id);
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    std::thread::sleep(Duration::from_millis(50));
    assert!(pool.check_finished().unwrap().is_empty());
    seen.sort();
    assert_eq!(seen, tickets);
    pool.shutdown();
    assert!(pool.submit(job(9)).is_err());
}

#[test]
fn throughput_scales_with_workers() {
    let run = |w: usize| {
        let ev: Arc<dyn Evaluator> = Arc::new(StubEvaluator {
            delay: Duration::from_millis(25),
            panic_every: None,
        });
        let t = Instant::now();
        run_search(&space(), &HyperSpace::default(), ev, &cfg(w, 24, 5)).unwrap();
        t.elapsed().as_secs_f64()
    };
    let serial = run(1);
    let parallel = run(4);
    assert!(serial / parallel > 2.0, "serial {serial:.3}s, parallel {parallel:.3}s");
}

fn synthetic_population(rng: &mut impl Rng, p: usize) -> Population {
    let mut pop = Population::new(p);
    for id in 0..p as u64 {
        pop.push(Member {
            id,
            arch: ArchConfig(vec![id as usize]),
            valid_nll: rng.random_range(0.0..10.0),
        });
    }
    pop
}

#[test]
fn tournament_extremes() {
    let mut r = rng(7);
    let pop = synthetic_population(&mut r, 16);
    let best = pop.members().min_by(|a, b| a.valid_nll.total_cmp(&b.valid_nll)).unwrap().id;
    for _ in 0..100 {
        assert_eq!(select_parent(&pop, 16, &mut r).unwrap().id, best);
    }
    let mut counts = [0usize; 16];
    let trials = 32_000;
    for _ in 0..trials {
        counts[select_parent(&pop, 1, &mut r).unwrap().id as usize] += 1;
    }
    let expect = trials as f64 / 16.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    // 15 dof, 99.9% quantile is 37.7
    assert!(chi2 < 37.7, "chi2 {chi2}");
}

#[test]
fn tournament_ties_prefer_recent() {
    let mut pop = Population::new(3);
    for id in 0..3 {
        pop.push(Member {
            id,
            arch: ArchConfig(vec![id as usize]),
            valid_nll: 1.0,
        });
    }
    assert_eq!(select_parent(&pop, 3, &mut rng(0)).unwrap().id, 2);
}

#[test]
fn tournament_pressure_monotone() {
    let mut r = rng(8);
    let p = 16;
    let pop = synthetic_population(&mut r, p);
    let mut means = Vec::new();
    for s in 1..=p {
        let total: f64 = (0..10_000).map(|_| select_parent(&pop, s, &mut r).unwrap().valid_nll).sum();
        means.push(total / 10_000.0);
    }
    for w in means.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{means:?}");
    }
}

struct Sequence;

impl Evaluator for Sequence {
    fn evaluate(&self, job: &Job) -> Evaluation {
        Evaluation::ok(job.id as f64, Some(format!("checkpoints/{}.nnw", job.id)))
    }
}

#[test]
fn custom_evaluator_fields_propagate() {
    let out = run_search(&space(), &HyperSpace::default(), Arc::new(Sequence), &cfg(1, 3, 0)).unwrap();
    assert_eq!(out.catalog.records[2].checkpoint.as_deref(), Some("checkpoints/3.nnw"));
    assert_eq!(out.catalog.records[2].valid_nll, Some(3.0));
    assert_eq!(out.catalog.timings.len(), 3);
}

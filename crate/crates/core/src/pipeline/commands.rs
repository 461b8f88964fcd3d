use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{Overrides, RunConfig};
use super::evaluate::evaluate_run;
use super::task::{prepare, read_json, TrainingEvaluator, CHECKPOINT_DIR};
use crate::arch::IoShape;
use crate::ensemble::{select_top_k, Ensemble};
use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::report::{convergence, spectrum, write_csv, MOVING_WINDOW};
use crate::search::{run_search, Catalog, CatalogRecord, Status};

/// File names inside a run directory.
pub struct RunFiles;

impl RunFiles {
    pub const ORIGINAL_CONFIG: &'static str = "config.original.toml";
    pub const CONFIG: &'static str = "config.toml";
    pub const CATALOG: &'static str = "catalog.jsonl";
    pub const TIMINGS: &'static str = "timings.csv";
    pub const SEARCH_SUMMARY: &'static str = "search_summary.json";
    pub const TASK: &'static str = "task.json";
    pub const ENSEMBLE: &'static str = "ensemble.json";
    pub const EVAL_DIR: &'static str = "eval";
    pub const REPORT_DIR: &'static str = "report";
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub run_dir: PathBuf,
    /// The run directory already held a finished search with this configuration.
    pub skipped: bool,
    pub records: usize,
    pub successes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TaskInfo {
    io: IoShape,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SearchSummary {
    records: usize,
    successes: usize,
    diverged: usize,
    failed: usize,
    population_size: usize,
    max_population: usize,
    population_filled_at: Option<usize>,
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

fn clear_outputs(run_dir: &Path) -> Result<()> {
    for f in [
        RunFiles::CATALOG,
        RunFiles::TIMINGS,
        RunFiles::SEARCH_SUMMARY,
        RunFiles::ENSEMBLE,
        RunFiles::TASK,
    ] {
        let p = run_dir.join(f);
        if p.exists() {
            std::fs::remove_file(p)?;
        }
    }
    for d in [CHECKPOINT_DIR, RunFiles::EVAL_DIR, RunFiles::REPORT_DIR] {
        let p = run_dir.join(d);
        if p.exists() {
            std::fs::remove_dir_all(p)?;
        }
    }
    Ok(())
}

/// Runs the search described by `config_path` into its run directory.
pub fn cmd_search(config_path: &Path, overrides: &Overrides, force: bool) -> Result<SearchReport> {
    let (cfg, original) = RunConfig::load(config_path, overrides)?;
    let run_dir = cfg.output_dir.clone();
    let resolved = cfg.to_toml()?;
    let catalog_path = run_dir.join(RunFiles::CATALOG);
    if catalog_path.exists() && !force {
        let previous = std::fs::read_to_string(run_dir.join(RunFiles::CONFIG)).unwrap_or_default();
        if previous != resolved {
            return Err(Error::Config(format!(
                "{} holds a search with a different configuration; pass --force to overwrite",
                run_dir.display()
            )));
        }
        let records = Catalog::read_jsonl(&catalog_path)?;
        return Ok(SearchReport {
            run_dir,
            skipped: true,
            successes: records.iter().filter(|r| r.is_ok()).count(),
            records: records.len(),
        });
    }
    std::fs::create_dir_all(&run_dir)?;
    clear_outputs(&run_dir)?;
    std::fs::create_dir_all(run_dir.join(CHECKPOINT_DIR))?;
    std::fs::write(run_dir.join(RunFiles::ORIGINAL_CONFIG), original)?;
    std::fs::write(run_dir.join(RunFiles::CONFIG), &resolved)?;

    let task = prepare(&cfg, &run_dir)?;
    let io = task.space.io();
    std::fs::write(run_dir.join(RunFiles::TASK), serde_json::to_string_pretty(&TaskInfo { io })?)?;
    log::info!(
        "search space: {} decisions, {} architectures; {} training / {} validation samples",
        task.space.decisions().len(),
        task.space.cardinality(),
        task.train.len(),
        task.valid.len()
    );
    let hyper = cfg.hyper;
    let evaluator = TrainingEvaluator::new(task, &cfg, &run_dir);
    let space = Arc::clone(&evaluator.space);
    let outcome = run_search(&space, &hyper, Arc::new(evaluator), &cfg.search_config())?;

    let recs = &outcome.catalog.records;
    let count = |s: Status| recs.iter().filter(|r| r.status == s).count();
    let summary = SearchSummary {
        records: recs.len(),
        successes: recs.iter().filter(|r| r.is_ok()).count(),
        diverged: count(Status::Diverged),
        failed: count(Status::Failed),
        population_size: cfg.search.population_size,
        max_population: outcome.max_population,
        population_filled_at: outcome.filled_at,
    };
    std::fs::write(run_dir.join(RunFiles::SEARCH_SUMMARY), serde_json::to_string_pretty(&summary)?)?;
    outcome.catalog.write_timings(&run_dir.join(RunFiles::TIMINGS))?;
    let tmp = run_dir.join("catalog.jsonl.tmp");
    outcome.catalog.write_jsonl(&tmp)?;
    std::fs::rename(tmp, &catalog_path)?;
    Ok(SearchReport {
        run_dir,
        skipped: false,
        records: summary.records,
        successes: summary.successes,
    })
}

/// The resolved configuration stored in a run directory.
pub fn load_run_config(run_dir: &Path) -> Result<RunConfig> {
    let path = run_dir.join(RunFiles::CONFIG);
    let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingData(path.clone()))?;
    RunConfig::parse(&text)
}

fn load_catalog(run_dir: &Path) -> Result<Vec<CatalogRecord>> {
    Catalog::read_jsonl(&run_dir.join(RunFiles::CATALOG))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestMember {
    pub id: u64,
    pub valid_nll: f64,
    pub checkpoint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub k: usize,
    pub members: Vec<ManifestMember>,
}

/// Selects the top-K catalog models and writes the ensemble manifest.
pub fn cmd_ensemble(run_dir: &Path, k: Option<usize>, force: bool) -> Result<EnsembleManifest> {
    let cfg = load_run_config(run_dir)?;
    let k = k.unwrap_or(cfg.ensemble.k);
    let path = run_dir.join(RunFiles::ENSEMBLE);
    if path.exists() && !force {
        let existing: EnsembleManifest = read_json(&path)?;
        if existing.k == k {
            return Ok(existing);
        }
        return Err(Error::Config(format!(
            "ensemble of size {} already exists; pass --force to replace it with size {k}",
            existing.k
        )));
    }
    let records = load_catalog(run_dir)?;
    let top = select_top_k(&records, k)?;
    let members = top
        .into_iter()
        .map(|r| {
            let checkpoint = r
                .checkpoint
                .clone()
                .ok_or_else(|| Error::Contract(format!("record {} has no checkpoint", r.id)))?;
            Ok(ManifestMember {
                id: r.id,
                valid_nll: r.valid_nll.expect("selected records are successful"),
                checkpoint,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = EnsembleManifest { k, members };
    write_atomic(&path, &serde_json::to_string_pretty(&manifest)?)?;
    let eval = run_dir.join(RunFiles::EVAL_DIR);
    if eval.exists() {
        std::fs::remove_dir_all(eval)?;
    }
    Ok(manifest)
}

/// Loads the manifest members with their trained weights.
pub fn load_ensemble(run_dir: &Path) -> Result<Ensemble<f64>> {
    let cfg = load_run_config(run_dir)?;
    let manifest: EnsembleManifest = read_json(&run_dir.join(RunFiles::ENSEMBLE))?;
    let info: TaskInfo = read_json(&run_dir.join(RunFiles::TASK))?;
    let space = cfg.search_space(info.io)?;
    let catalog = load_catalog(run_dir)?;
    let mut records = Vec::new();
    let mut networks = Vec::new();
    for m in &manifest.members {
        let rec = catalog
            .iter()
            .find(|r| r.id == m.id)
            .ok_or_else(|| Error::Contract(format!("manifest member {} missing from catalog", m.id)))?;
        let spec = space.decode(&rec.arch)?;
        networks.push(checkpoint::load(spec, &run_dir.join(&m.checkpoint))?);
        records.push(rec.clone());
    }
    Ensemble::new(records, networks)
}

/// Writes metric tables and heatmaps for the ensemble into `eval/`; returns the summary.
pub fn cmd_evaluate(run_dir: &Path, force: bool) -> Result<serde_json::Value> {
    let out = run_dir.join(RunFiles::EVAL_DIR);
    let summary_path = out.join("summary.json");
    if summary_path.exists() && !force {
        return read_json(&summary_path);
    }
    if out.exists() {
        std::fs::remove_dir_all(&out)?;
    }
    let cfg = load_run_config(run_dir)?;
    let ensemble = load_ensemble(run_dir)?;
    let tmp = run_dir.join("eval.partial");
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp)?;
    }
    std::fs::create_dir_all(&tmp)?;
    let summary = evaluate_run(&cfg, run_dir, &ensemble, &tmp)?;
    std::fs::write(tmp.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    std::fs::rename(&tmp, &out)?;
    Ok(summary)
}

/// Writes the convergence moving average and the sorted model spectrum into `report/`.
pub fn cmd_report(run_dir: &Path, force: bool) -> Result<PathBuf> {
    let out = run_dir.join(RunFiles::REPORT_DIR);
    if out.join("spectrum.csv").exists() && !force {
        return Ok(out);
    }
    let records = load_catalog(run_dir)?;
    std::fs::create_dir_all(&out)?;
    write_csv(&out.join("convergence.csv"), &convergence(&records, MOVING_WINDOW))?;
    let summary: Option<serde_json::Value> = read_json(&run_dir.join(RunFiles::SEARCH_SUMMARY)).ok();
    let filled = summary
        .as_ref()
        .and_then(|s| s.get("population_filled_at").cloned())
        .unwrap_or(serde_json::Value::Null);
    std::fs::write(
        out.join("exploration.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "moving_window": MOVING_WINDOW,
            "population_filled_at": filled,
        }))?,
    )?;
    write_csv(&out.join("spectrum.csv"), &spectrum(&records))?;
    Ok(out)
}

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::ArchConfig;
use crate::error::{Error, Result};
use crate::hpo::HyperConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Diverged,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogRecord {
    pub id: u64,
    pub arch: ArchConfig,
    pub hyper: HyperConfig,
    /// Relative to the run directory.
    pub checkpoint: Option<String>,
    pub valid_nll: Option<f64>,
    pub status: Status,
    pub completion_index: usize,
    /// Population member the architecture was mutated from, if any.
    pub parent: Option<u64>,
    /// Catalog length when the job was submitted.
    pub submitted_after: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl CatalogRecord {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok && self.valid_nll.is_some_and(f64::is_finite)
    }
}

/// Nondeterministic per-record timings, kept apart from the catalog so seeded
/// serial runs reproduce the catalog file exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Timing {
    pub id: u64,
    pub train_seconds: f64,
    pub completed_at_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Catalog {
    pub records: Vec<CatalogRecord>,
    pub timings: Vec<Timing>,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn successes(&self) -> impl Iterator<Item = &CatalogRecord> {
        self.records.iter().filter(|r| r.is_ok())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Vec<CatalogRecord>> {
        let file = File::open(path).map_err(|_| Error::MissingData(path.to_path_buf()))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
            out.push(rec);
        }
        Ok(out)
    }

    pub fn write_timings(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "id,train_seconds,completed_at_seconds")?;
        for t in &self.timings {
            writeln!(out, "{},{:.6},{:.6}", t.id, t.train_seconds, t.completed_at_seconds)?;
        }
        out.flush()?;
        Ok(())
    }
}

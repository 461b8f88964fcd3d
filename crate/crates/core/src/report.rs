//! Convergence summaries, CSV tables and 16-bit grayscale heatmaps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::CatalogRecord;
use crate::sst::GridGeometry;

pub const MOVING_WINDOW: usize = 25;

/// Trailing mean over at most `window` values (fewer at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub completion_index: usize,
    pub id: u64,
    pub objective: f64,
    pub moving_average: f64,
}

/// Objective (negative validation NLL) of successful records in completion order.
pub fn convergence(records: &[CatalogRecord], window: usize) -> Vec<ConvergenceRow> {
    let mut ok: Vec<&CatalogRecord> = records.iter().filter(|r| r.is_ok()).collect();
    ok.sort_by_key(|r| r.completion_index);
    let obj: Vec<f64> = ok.iter().map(|r| -r.valid_nll.unwrap()).collect();
    let ma = moving_average(&obj, window);
    ok.iter()
        .zip(obj.iter().zip(ma))
        .map(|(r, (&o, m))| ConvergenceRow {
            completion_index: r.completion_index,
            id: r.id,
            objective: o,
            moving_average: m,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub rank: usize,
    pub id: u64,
    pub valid_nll: f64,
}

/// Successful records sorted by validation NLL, best first.
pub fn spectrum(records: &[CatalogRecord]) -> Vec<SpectrumRow> {
    let mut ok: Vec<&CatalogRecord> = records.iter().filter(|r| r.is_ok()).collect();
    ok.sort_by(|a, b| a.valid_nll.unwrap().total_cmp(&b.valid_nll.unwrap()).then(a.id.cmp(&b.id)));
    ok.iter()
        .enumerate()
        .map(|(i, r)| SpectrumRow {
            rank: i + 1,
            id: r.id,
            valid_nll: r.valid_nll.unwrap(),
        })
        .collect()
}

pub fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header row and then raw string rows.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

/// Linear map from field values to 16-bit levels; land and non-finite cells are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapScale {
    pub width: usize,
    pub height: usize,
    pub min: f64,
    pub max: f64,
    pub level_min: u16,
    pub level_max: u16,
    pub land_level: u16,
    pub units: String,
}

impl HeatmapScale {
    pub fn value(&self, level: u16) -> Option<f64> {
        if level == self.land_level {
            return None;
        }
        let span = (self.level_max - self.level_min) as f64;
        Some(self.min + (level - self.level_min) as f64 / span * (self.max - self.min))
    }
}

/// Binary PGM (P5, maxval 65535, big-endian) plus a JSON sidecar with the scale.
pub fn write_heatmap(path: &Path, geometry: GridGeometry, field: &[f64], units: &str) -> Result<HeatmapScale> {
    if field.len() != geometry.len() {
        return Err(Error::dims(geometry.len(), field.len(), "heatmap field"));
    }
    let finite = field.iter().copied().filter(|v| v.is_finite());
    let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (min, max) = if min.is_finite() { (min, max) } else { (0.0, 0.0) };
    let scale = HeatmapScale {
        width: geometry.width,
        height: geometry.height,
        min,
        max,
        level_min: 1,
        level_max: u16::MAX,
        land_level: 0,
        units: units.to_string(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{} {}\n65535\n", geometry.width, geometry.height)?;
    let span = (scale.level_max - scale.level_min) as f64;
    for &v in field {
        let level = if !v.is_finite() {
            0
        } else if max > min {
            scale.level_min + ((v - min) / (max - min) * span).round() as u16
        } else {
            scale.level_min
        };
        out.write_all(&level.to_be_bytes())?;
    }
    out.flush()?;
    std::fs::write(path.with_extension("scale.json"), serde_json::to_string_pretty(&scale)?)?;
    Ok(scale)
}

/// Reads a heatmap written by `write_heatmap` back into levels.
pub fn read_heatmap(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = std::fs::read(path).map_err(|_| Error::MissingData(path.to_path_buf()))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(Error::format(path, "not a 16-bit P5 file"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format(path, "bad PGM size"));
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = &bytes[pos.min(bytes.len())..];
    if body.len() != 2 * w * h {
        return Err(Error::format(path, "PGM payload size"));
    }
    Ok((w, h, body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()))
}

/// Pearson correlation over pairs where both values are finite.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x, y))
        .collect();
    let n = pairs.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let (ma, mb) = pairs.iter().fold((0.0, 0.0), |(s, t), (x, y)| (s + x / n, t + y / n));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

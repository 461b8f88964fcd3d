use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::grid::{GridGeometry, LandMask};
use crate::error::{Error, Result};

pub const SST_MAGIC: &[u8; 4] = b"SST1";
pub const MASK_MAGIC: &[u8; 4] = b"MSK1";

/// Weekly fields flattened to ocean points, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct SstDataset {
    pub mask: LandMask,
    pub weeks: Vec<Vec<f32>>,
}

impl SstDataset {
    pub fn len(&self) -> usize {
        self.weeks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weeks.is_empty()
    }

    /// `(train, test)` with the first `train_len` weeks in the training split.
    pub fn split(&self, train_len: usize) -> Result<(&[Vec<f32>], &[Vec<f32>])> {
        if train_len > self.weeks.len() {
            return Err(Error::InsufficientRecords {
                needed: train_len,
                available: self.weeks.len(),
            });
        }
        Ok(self.weeks.split_at(train_len))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|_| Error::MissingData(path.to_path_buf()))
}

fn read_header(input: &mut impl Read, path: &Path, magic: &[u8; 4], words: usize) -> Result<Vec<usize>> {
    let mut m = [0u8; 4];
    input
        .read_exact(&mut m)
        .map_err(|_| Error::format(path, "truncated header"))?;
    if &m != magic {
        return Err(Error::format(path, format!("expected magic {:?}", std::str::from_utf8(magic).unwrap())));
    }
    let mut out = Vec::with_capacity(words);
    for _ in 0..words {
        let mut w = [0u8; 4];
        input
            .read_exact(&mut w)
            .map_err(|_| Error::format(path, "truncated header"))?;
        out.push(u32::from_le_bytes(w) as usize);
    }
    Ok(out)
}

fn expect_eof(input: &mut impl Read, path: &Path) -> Result<()> {
    let mut probe = [0u8; 1];
    if input.read(&mut probe)? != 0 {
        return Err(Error::format(path, "trailing bytes after declared payload"));
    }
    Ok(())
}

pub fn read_mask(path: &Path) -> Result<LandMask> {
    let mut input = open(path)?;
    let hw = read_header(&mut input, path, MASK_MAGIC, 2)?;
    let geometry = GridGeometry::new(hw[0], hw[1]).map_err(|e| Error::format(path, e.to_string()))?;
    let mut bytes = vec![0u8; geometry.len()];
    input
        .read_exact(&mut bytes)
        .map_err(|_| Error::format(path, "mask payload shorter than H*W"))?;
    expect_eof(&mut input, path)?;
    if let Some(b) = bytes.iter().find(|&&b| b > 1) {
        return Err(Error::format(path, format!("mask byte {b} is neither 0 nor 1")));
    }
    LandMask::new(geometry, bytes.into_iter().map(|b| b == 1).collect())
}

pub fn write_mask(path: &Path, mask: &LandMask) -> Result<()> {
    let g = mask.geometry();
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MASK_MAGIC)?;
    out.write_all(&(g.height as u32).to_le_bytes())?;
    out.write_all(&(g.width as u32).to_le_bytes())?;
    out.write_all(&mask.ocean().iter().map(|&o| o as u8).collect::<Vec<_>>())?;
    out.flush()?;
    Ok(())
}

/// Streams full grids from an SST1 file to `visit`; returns the geometry.
pub fn read_grids(path: &Path, mut visit: impl FnMut(usize, Vec<f32>) -> Result<()>) -> Result<(usize, GridGeometry)> {
    let mut input = open(path)?;
    let h = read_header(&mut input, path, SST_MAGIC, 3)?;
    let (t, geometry) = (h[0], GridGeometry::new(h[1], h[2]).map_err(|e| Error::format(path, e.to_string()))?);
    let mut buf = vec![0u8; geometry.len() * 4];
    for week in 0..t {
        input
            .read_exact(&mut buf)
            .map_err(|_| Error::format(path, format!("payload ends inside snapshot {week} of {t}")))?;
        let grid = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        visit(week, grid)?;
    }
    expect_eof(&mut input, path)?;
    Ok((t, geometry))
}

pub fn write_grids<'a>(path: &Path, geometry: GridGeometry, grids: impl ExactSizeIterator<Item = &'a [f32]>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(SST_MAGIC)?;
    for v in [grids.len(), geometry.height, geometry.width] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }
    for g in grids {
        if g.len() != geometry.len() {
            return Err(Error::dims(geometry.len(), g.len(), "grid size"));
        }
        for v in g {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Loads snapshots and mask, checking that shapes agree and ocean values are finite.
pub fn load_snapshots(path: &Path, mask_path: &Path) -> Result<SstDataset> {
    let mask = read_mask(mask_path)?;
    let mut weeks = Vec::new();
    let (_, geometry) = read_grids(path, |week, grid| {
        if grid.len() != mask.geometry().len() {
            return Err(Error::format(path, "grid shape differs from mask"));
        }
        let flat: Vec<f32> = mask.ocean_indices().iter().map(|&i| grid[i]).collect();
        if let Some(p) = flat.iter().position(|v| !v.is_finite()) {
            let (r, c) = mask.geometry().row_col(mask.ocean_indices()[p]);
            return Err(Error::format(path, format!("non-finite value at ocean point ({r}, {c}) in week {week}")));
        }
        weeks.push(flat);
        Ok(())
    })?;
    if geometry != mask.geometry() {
        return Err(Error::format(path, format!("grid {geometry:?} differs from mask {:?}", mask.geometry())));
    }
    Ok(SstDataset { mask, weeks })
}

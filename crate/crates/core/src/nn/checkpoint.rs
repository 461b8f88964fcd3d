//! Binary weight files: `b"NNW1"`, spec fingerprint (u64 LE), parameter
//! count (u64 LE), then the parameters as f64 LE in layout order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::network::Network;
use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::real::Real;

pub const MAGIC: &[u8; 4] = b"NNW1";

pub fn write_weights<T: Real, W: Write>(net: &Network<T>, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&net.spec().fingerprint().to_le_bytes())?;
    out.write_all(&(net.param_count() as u64).to_le_bytes())?;
    for w in net.weights() {
        out.write_all(&w.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn save<T: Real>(net: &Network<T>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_weights(net, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Reads weights for `spec`, rejecting files written for another topology.
pub fn load<T: Real>(spec: NetworkSpec, path: &Path) -> Result<Network<T>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingData(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_weights(spec, BufReader::new(file), path)
}

pub fn read_weights<T: Real, R: Read>(spec: NetworkSpec, mut input: R, path: &Path) -> Result<Network<T>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format(path, "bad magic"));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    if u64::from_le_bytes(word) != spec.fingerprint() {
        return Err(Error::format(path, "spec fingerprint mismatch"));
    }
    input.read_exact(&mut word)?;
    let count = u64::from_le_bytes(word) as usize;
    let mut weights = Vec::with_capacity(count);
    for _ in 0..count {
        input
            .read_exact(&mut word)
            .map_err(|_| Error::format(path, "truncated parameter block"))?;
        weights.push(T::lit(f64::from_le_bytes(word)));
    }
    if input.read(&mut word)? != 0 {
        return Err(Error::format(path, "trailing bytes"));
    }
    Network::from_weights(spec, weights)
}

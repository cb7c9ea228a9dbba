//! The `CZL1` binary grid format.
//!
//! Layout (all integers little-endian `u32`, samples little-endian `f64`):
//! magic `CZL1`, parameter count `t`, `t` dimensions `d_s`, one axis length
//! per axis, then interleaved `(re, im)` pairs in lattice order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{GridFunction, ProductLattice};

pub const MAGIC: &[u8; 4] = b"CZL1";

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn write_grid<W: Write>(mut w: W, f: &GridFunction) -> Result<()> {
    let lat = f.lattice();
    w.write_all(MAGIC)?;
    w.write_all(&(lat.params() as u32).to_le_bytes())?;
    for &d in lat.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &n in lat.n_axis() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for v in f.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|e| format_err(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_grid<R: Read>(mut r: R) -> Result<GridFunction> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| format_err(format!("missing magic: {e}")))?;
    if &magic != MAGIC {
        return Err(format_err(format!("bad magic {magic:?}")));
    }
    let t = read_u32(&mut r)? as usize;
    if t == 0 || t > 16 {
        return Err(format_err(format!("implausible parameter count {t}")));
    }
    let dims = (0..t)
        .map(|_| read_u32(&mut r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let axes: usize = dims.iter().sum();
    if axes == 0 || axes > 32 {
        return Err(format_err(format!("implausible axis count {axes}")));
    }
    let n_axis = (0..axes)
        .map(|_| read_u32(&mut r).map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    if let Some(n) = n_axis.iter().find(|n| !n.is_power_of_two()) {
        return Err(format_err(format!("axis length {n} is not a power of two")));
    }
    let lattice = ProductLattice::new(dims, n_axis)?;
    let mut raw = vec![0u8; lattice.len() * 16];
    r.read_exact(&mut raw)
        .map_err(|e| format_err(format!("truncated samples: {e}")))?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(format_err("trailing bytes after samples"));
    }
    GridFunction::new(lattice, values)
}

pub fn save(path: impl AsRef<Path>, f: &GridFunction) -> Result<()> {
    write_grid(BufWriter::new(File::create(path)?), f)
}

pub fn load(path: impl AsRef<Path>) -> Result<GridFunction> {
    read_grid(BufReader::new(File::open(path)?))
}

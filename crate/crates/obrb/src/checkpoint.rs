//! Binary snapshots of a [`SimState`].
//!
//! Layout, all little-endian: the 8 magic bytes `OBRB0001`; `nx`, `ny` as
//! `u64`; `lx`, `ly`, `t` as `f64`; `step` as `u64`; then `Theta` (`nx*ny`),
//! `ux` (`(nx+1)*ny`) and `uy` (`nx*(ny+1)`) as row-major `f64`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use obrb_core::{Grid, ScalarField, SimState, VectorField};

pub const MAGIC: &[u8; 8] = b"OBRB0001";
const HEADER: usize = 8 + 6 * 8;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: not an obrb checkpoint (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: truncated checkpoint, {have} bytes where {need} are required")]
    Truncated { path: PathBuf, have: usize, need: usize },
    #[error("{path}: invalid stored grid: {reason}")]
    BadGrid { path: PathBuf, reason: String },
    #[error("{path}: checkpoint grid {found} does not match run grid {expected}")]
    GridMismatch { path: PathBuf, found: String, expected: String },
}

pub fn describe(g: &Grid) -> String {
    format!("{}x{} on [0,{}]x[0,{}]", g.nx(), g.ny(), g.lx(), g.ly())
}

pub fn encode(s: &SimState) -> Vec<u8> {
    let g = s.grid();
    let mut out = Vec::with_capacity(HEADER + 8 * (s.theta.values().len() + s.u.ux().len() + s.u.uy().len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.nx() as u64).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u64).to_le_bytes());
    for v in [g.lx(), g.ly(), s.t] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&s.step.to_le_bytes());
    for v in s.theta.values().iter().chain(s.u.ux()).chain(s.u.uy()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<SimState, CheckpointError> {
    let path = path.to_path_buf();
    if bytes.len() < MAGIC.len() || &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic { path });
    }
    if bytes.len() < HEADER {
        return Err(CheckpointError::Truncated {
            path,
            have: bytes.len(),
            need: HEADER,
        });
    }
    let word = |k: usize| <[u8; 8]>::try_from(&bytes[8 + 8 * k..16 + 8 * k]).expect("8 bytes");
    let (nx, ny) = (u64::from_le_bytes(word(0)), u64::from_le_bytes(word(1)));
    let (lx, ly, t) = (f64::from_le_bytes(word(2)), f64::from_le_bytes(word(3)), f64::from_le_bytes(word(4)));
    let step = u64::from_le_bytes(word(5));
    let bad = |reason: String| CheckpointError::BadGrid {
        path: path.clone(),
        reason,
    };
    let (nx, ny) = (usize::try_from(nx).map_err(|e| bad(e.to_string()))?, usize::try_from(ny).map_err(|e| bad(e.to_string()))?);
    let grid = Grid::new(nx, ny, lx, ly).map_err(|e| bad(e.to_string()))?;
    let counts = [nx * ny, (nx + 1) * ny, nx * (ny + 1)];
    let need = HEADER + 8 * counts.iter().sum::<usize>();
    if bytes.len() != need {
        return Err(CheckpointError::Truncated {
            path,
            have: bytes.len(),
            need,
        });
    }
    let mut at = HEADER;
    let mut take = |n: usize| {
        let v: Vec<f64> = bytes[at..at + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        at += 8 * n;
        v
    };
    let theta = take(counts[0]);
    let ux = take(counts[1]);
    let uy = take(counts[2]);
    let theta = ScalarField::from_values(grid, theta).map_err(|e| bad(e.to_string()))?;
    let u = VectorField::from_components(grid, ux, uy).map_err(|e| bad(e.to_string()))?;
    Ok(SimState { t, step, u, theta })
}

pub fn write(state: &SimState, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, encode(state)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read(path: &Path) -> Result<SimState, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes, path)
}

/// Reads a checkpoint that must live on `expected`.
pub fn read_on(path: &Path, expected: &Grid) -> Result<SimState, CheckpointError> {
    let s = read(path)?;
    if s.grid() != expected {
        return Err(CheckpointError::GridMismatch {
            path: path.to_path_buf(),
            found: describe(s.grid()),
            expected: describe(expected),
        });
    }
    Ok(s)
}

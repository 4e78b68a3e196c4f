//! Binary snapshots of states and trajectories.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic     8 bytes   "DSMCFSNP" (state) or "DSMCFTRJ" (trajectory)
//! version   u32
//! payload   state: one state block
//!           trajectory: u64 count, then per snapshot a state block, u64 step index
//!           and the diagnostics (4 × f64, u64); then u64 count and the dt history
//! checksum  first 8 bytes of SHA-256 over everything before it
//!
//! state block:
//!   u32 dimension, u8 mode (0 cartesian, 1 radial), u64 resolution, f64 extent,
//!   f64 s, u8 bc kind (0 pinned, 1 slicing, 2 frozen),
//!   pinned: f64 value; slicing/frozen: u64 count + f64 base values,
//!   u64 count + f64 u values in row-major order
//! ```
//!
//! The failure marker of a trajectory is not stored.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use crate::discrete::{Field, Grid, GridMode};
use crate::flow::{BoundaryCondition, GraphState, SnapshotDiagnostics, Trajectory};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const STATE_MAGIC: &[u8; 8] = b"DSMCFSNP";
const TRAJECTORY_MAGIC: &[u8; 8] = b"DSMCFTRJ";
const CHECKSUM_LEN: usize = 8;

fn checksum(bytes: &[u8]) -> [u8; CHECKSUM_LEN] {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; CHECKSUM_LEN];
    out.copy_from_slice(&digest[..CHECKSUM_LEN]);
    out
}

fn corrupt(what: &str) -> Error {
    Error::CorruptFile(what.to_string())
}

fn write_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    buf.write_u64::<LE>(values.len() as u64).unwrap();
    for &v in values {
        buf.write_f64::<LE>(v).unwrap();
    }
}

fn read_f64s(cur: &mut Cursor<&[u8]>) -> Result<Vec<f64>> {
    let count = cur.read_u64::<LE>().map_err(|_| corrupt("truncated array length"))? as usize;
    let remaining = cur.get_ref().len() - cur.position() as usize;
    if count.checked_mul(8).is_none_or(|b| b > remaining) {
        return Err(corrupt("array length exceeds file size"));
    }
    (0..count)
        .map(|_| cur.read_f64::<LE>().map_err(|_| corrupt("truncated array")))
        .collect()
}

fn write_state(buf: &mut Vec<u8>, state: &GraphState) {
    let g = state.grid();
    buf.write_u32::<LE>(g.dimension as u32).unwrap();
    buf.write_u8(match g.mode {
        GridMode::Cartesian => 0,
        GridMode::Radial => 1,
    })
    .unwrap();
    buf.write_u64::<LE>(g.resolution as u64).unwrap();
    buf.write_f64::<LE>(g.extent).unwrap();
    buf.write_f64::<LE>(state.s).unwrap();
    match &state.bc {
        BoundaryCondition::Pinned { value } => {
            buf.write_u8(0).unwrap();
            buf.write_f64::<LE>(*value).unwrap();
        }
        BoundaryCondition::Slicing { base } => {
            buf.write_u8(1).unwrap();
            write_f64s(buf, base);
        }
        BoundaryCondition::Frozen { base } => {
            buf.write_u8(2).unwrap();
            write_f64s(buf, base);
        }
    }
    write_f64s(buf, state.u.values());
}

fn read_state(cur: &mut Cursor<&[u8]>) -> Result<GraphState> {
    let t = |_| corrupt("truncated state header");
    let dimension = cur.read_u32::<LE>().map_err(t)? as usize;
    let mode = match cur.read_u8().map_err(t)? {
        0 => GridMode::Cartesian,
        1 => GridMode::Radial,
        m => return Err(corrupt(&format!("unknown grid mode {m}"))),
    };
    let resolution = cur.read_u64::<LE>().map_err(t)? as usize;
    let extent = cur.read_f64::<LE>().map_err(t)?;
    let s = cur.read_f64::<LE>().map_err(t)?;
    let grid = Grid::new(dimension, mode, extent, resolution)
        .map_err(|e| corrupt(&format!("bad grid descriptor: {e}")))?;
    let bc = match cur.read_u8().map_err(t)? {
        0 => BoundaryCondition::Pinned {
            value: cur.read_f64::<LE>().map_err(t)?,
        },
        1 => BoundaryCondition::Slicing {
            base: read_f64s(cur)?,
        },
        2 => BoundaryCondition::Frozen {
            base: read_f64s(cur)?,
        },
        k => return Err(corrupt(&format!("unknown boundary kind {k}"))),
    };
    let values = read_f64s(cur)?;
    let u = Field::new(grid, values).map_err(|e| corrupt(&e.to_string()))?;
    // no spacelike re-validation: a stored state is restored as written
    Ok(GraphState { u, s, bc })
}

fn seal(mut buf: Vec<u8>) -> Vec<u8> {
    let sum = checksum(&buf);
    buf.extend_from_slice(&sum);
    buf
}

/// Checks magic, version and checksum; returns the payload.
fn open<'a>(bytes: &'a [u8], magic: &[u8; 8]) -> Result<&'a [u8]> {
    if bytes.len() < magic.len() + 4 {
        return Err(corrupt("file shorter than its header"));
    }
    if &bytes[..8] != magic {
        return Err(corrupt("bad magic"));
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if found != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < 12 + CHECKSUM_LEN {
        return Err(corrupt("missing checksum"));
    }
    let (body, sum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if checksum(body) != sum {
        return Err(corrupt("checksum mismatch"));
    }
    Ok(&body[12..])
}

fn header(magic: &[u8; 8]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(magic);
    buf.write_u32::<LE>(FORMAT_VERSION).unwrap();
    buf
}

fn finish(cur: &Cursor<&[u8]>) -> Result<()> {
    if cur.position() as usize != cur.get_ref().len() {
        return Err(corrupt("trailing bytes after payload"));
    }
    Ok(())
}

pub fn encode_state(state: &GraphState) -> Vec<u8> {
    let mut buf = header(STATE_MAGIC);
    write_state(&mut buf, state);
    seal(buf)
}

pub fn decode_state(bytes: &[u8]) -> Result<GraphState> {
    let payload = open(bytes, STATE_MAGIC)?;
    let mut cur = Cursor::new(payload);
    let state = read_state(&mut cur)?;
    finish(&cur)?;
    Ok(state)
}

pub fn encode_trajectory(traj: &Trajectory) -> Vec<u8> {
    let mut buf = header(TRAJECTORY_MAGIC);
    buf.write_u64::<LE>(traj.snapshots.len() as u64).unwrap();
    for ((st, step), d) in traj.snapshots.iter().zip(&traj.steps).zip(&traj.diagnostics) {
        write_state(&mut buf, st);
        buf.write_u64::<LE>(*step as u64).unwrap();
        for x in [d.min_margin, d.max_v, d.min_h, d.max_h] {
            buf.write_f64::<LE>(x).unwrap();
        }
        buf.write_u64::<LE>(d.mean_convexity_violations as u64).unwrap();
    }
    write_f64s(&mut buf, &traj.dt_history);
    seal(buf)
}

pub fn decode_trajectory(bytes: &[u8]) -> Result<Trajectory> {
    let payload = open(bytes, TRAJECTORY_MAGIC)?;
    let mut cur = Cursor::new(payload);
    let t = |_| corrupt("truncated trajectory");
    let count = cur.read_u64::<LE>().map_err(t)? as usize;
    if count == 0 {
        return Err(corrupt("trajectory without snapshots"));
    }
    let mut snapshots = Vec::new();
    let mut steps = Vec::new();
    let mut diagnostics = Vec::new();
    for _ in 0..count {
        snapshots.push(read_state(&mut cur)?);
        steps.push(cur.read_u64::<LE>().map_err(t)? as usize);
        let mut f = [0.0; 4];
        for x in &mut f {
            *x = cur.read_f64::<LE>().map_err(t)?;
        }
        diagnostics.push(SnapshotDiagnostics {
            min_margin: f[0],
            max_v: f[1],
            min_h: f[2],
            max_h: f[3],
            mean_convexity_violations: cur.read_u64::<LE>().map_err(t)? as usize,
        });
    }
    let dt_history = read_f64s(&mut cur)?;
    finish(&cur)?;
    if snapshots.windows(2).any(|w| w[0].grid() != w[1].grid()) {
        return Err(corrupt("snapshots on different grids"));
    }
    Ok(Trajectory {
        snapshots,
        steps,
        diagnostics,
        dt_history,
        failure: None,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Ok(bytes)
}

pub fn save_state(state: &GraphState, path: &Path) -> Result<()> {
    write_file(path, &encode_state(state))
}

pub fn load_state(path: &Path) -> Result<GraphState> {
    decode_state(&read_file(path)?)
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    write_file(path, &encode_trajectory(traj))
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    decode_trajectory(&read_file(path)?)
}

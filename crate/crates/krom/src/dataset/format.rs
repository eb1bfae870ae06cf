//! Binary trajectory files (extension `.mste`), little-endian:
//!
//! ```text
//! magic "MSTE" | version u32 | nx u32 | ny u32 | n_snapshots u32
//! | n_controls u32 (vector dim) | n_steps u32
//! | times f64[n_snapshots]
//! | pressure f64[n_snapshots * ny * nx]
//! | saturation f64[n_snapshots * ny * nx]
//! | controls f64[n_steps * n_controls]
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::sim::{SimState, Trajectory};

pub const TRAJECTORY_MAGIC: &[u8; 4] = b"MSTE";
pub const TRAJECTORY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error("file truncated or trailing bytes: {0}")]
    Truncated(String),
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), FormatError> {
    traj.validate()
        .map_err(|e| FormatError::Dimensions(e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    let n_snap = traj.snapshots.len();
    let n_steps = traj.controls.len();
    let n_controls = traj.n_controls_dim();

    w.write_all(TRAJECTORY_MAGIC)?;
    w.write_u32::<LittleEndian>(TRAJECTORY_VERSION)?;
    w.write_u32::<LittleEndian>(traj.nx as u32)?;
    w.write_u32::<LittleEndian>(traj.ny as u32)?;
    w.write_u32::<LittleEndian>(n_snap as u32)?;
    w.write_u32::<LittleEndian>(n_controls as u32)?;
    w.write_u32::<LittleEndian>(n_steps as u32)?;
    for s in &traj.snapshots {
        w.write_f64::<LittleEndian>(s.time)?;
    }
    for s in &traj.snapshots {
        for &v in &s.pressure {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    for s in &traj.snapshots {
        for &v in &s.sw {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    for u in &traj.controls {
        for &v in u {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, FormatError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| FormatError::Truncated("missing magic".into()))?;
    if &magic != TRAJECTORY_MAGIC {
        return Err(FormatError::BadMagic {
            expected: *TRAJECTORY_MAGIC,
            found: magic,
        });
    }
    let version = read_u32(&mut r, "version")?;
    if version != TRAJECTORY_VERSION {
        return Err(FormatError::Version {
            expected: TRAJECTORY_VERSION,
            found: version,
        });
    }
    let nx = read_u32(&mut r, "nx")? as usize;
    let ny = read_u32(&mut r, "ny")? as usize;
    let n_snap = read_u32(&mut r, "n_snapshots")? as usize;
    let n_controls = read_u32(&mut r, "n_controls")? as usize;
    let n_steps = read_u32(&mut r, "n_steps")? as usize;
    if n_snap != n_steps + 1 {
        return Err(FormatError::Dimensions(format!(
            "{n_snap} snapshots with {n_steps} steps; want snapshots = steps + 1"
        )));
    }

    let times = read_f64s(&mut r, n_snap, "times")?;
    let cells = nx * ny;
    let pressure = read_f64s(&mut r, n_snap * cells, "pressure")?;
    let saturation = read_f64s(&mut r, n_snap * cells, "saturation")?;
    let controls_flat = read_f64s(&mut r, n_steps * n_controls, "controls")?;

    let mut trailing = Vec::new();
    r.read_to_end(&mut trailing)?;
    if !trailing.is_empty() {
        return Err(FormatError::Truncated(format!(
            "{} unexpected trailing bytes",
            trailing.len()
        )));
    }

    let snapshots = (0..n_snap)
        .map(|t| SimState {
            pressure: pressure[t * cells..(t + 1) * cells].to_vec(),
            sw: saturation[t * cells..(t + 1) * cells].to_vec(),
            time: times[t],
        })
        .collect();
    let controls = (0..n_steps)
        .map(|t| controls_flat[t * n_controls..(t + 1) * n_controls].to_vec())
        .collect();

    let traj = Trajectory {
        nx,
        ny,
        snapshots,
        controls,
    };
    traj.validate()
        .map_err(|e| FormatError::Dimensions(e.to_string()))?;
    Ok(traj)
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, FormatError> {
    r.read_u32::<LittleEndian>()
        .map_err(|_| FormatError::Truncated(format!("while reading {what}")))
}

fn read_f64s<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<f64>, FormatError> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)
        .map_err(|_| FormatError::Truncated(format!("while reading {what}")))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn toy_trajectory() -> Trajectory {
        let state = |t: f64, bump: f64| SimState {
            pressure: (0..16).map(|c| 24e6 + c as f64 * 1e4 + bump).collect(),
            sw: (0..16).map(|c| 0.2 + 0.01 * c as f64 + bump * 1e-9).collect(),
            time: t,
        };
        Trajectory {
            nx: 4,
            ny: 4,
            snapshots: vec![state(0.0, 0.0), state(8.64e6, 0.5)],
            controls: vec![vec![1e-3, 2e-3, 18e6]],
        }
    }

    #[test]
    fn roundtrip_is_bitwise_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.mste");
        let traj = toy_trajectory();
        write_trajectory(&path, &traj).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert_eq!(traj, back);
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.mste");
        write_trajectory(&path, &toy_trajectory()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_trajectory(&path),
            Err(FormatError::BadMagic { .. })
        ));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.mste");
        write_trajectory(&path, &toy_trajectory()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 9;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_trajectory(&path),
            Err(FormatError::Version { .. })
        ));
    }

    #[test]
    fn truncation_and_trailing_bytes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.mste");
        write_trajectory(&path, &toy_trajectory()).unwrap();
        let bytes = fs::read(&path).unwrap();

        fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            read_trajectory(&path),
            Err(FormatError::Truncated(_))
        ));

        let mut extended = bytes.clone();
        extended.extend_from_slice(&[0u8; 4]);
        fs::write(&path, &extended).unwrap();
        assert!(matches!(
            read_trajectory(&path),
            Err(FormatError::Truncated(_))
        ));
    }
}

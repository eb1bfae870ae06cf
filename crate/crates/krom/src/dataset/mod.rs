//! Trajectory persistence, min-max normalization, k-step windowing and
//! train/test splitting.

mod format;

pub use format::{read_trajectory, write_trajectory, FormatError, TRAJECTORY_MAGIC, TRAJECTORY_VERSION};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numerics::Tensor;
use crate::sim::{SimState, Trajectory};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    Empty,
    #[error("need at least 2 trajectories to split, got {0}")]
    TooFewTrajectories(usize),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
}

/// Per-channel and per-control-component min/max from the training
/// trajectories. Channels that never vary keep scale 1 and are flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub p_min: f64,
    pub p_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub control_min: Vec<f64>,
    pub control_max: Vec<f64>,
    pub p_const: bool,
    pub s_const: bool,
    pub control_const: Vec<bool>,
}

fn scale_of(min: f64, max: f64) -> f64 {
    if max > min {
        max - min
    } else {
        1.0
    }
}

pub fn compute_norm_stats(trajs: &[Trajectory]) -> Result<NormStats, DatasetError> {
    if trajs.is_empty() {
        return Err(DatasetError::Empty);
    }
    let n_u = trajs[0].n_controls_dim();
    let mut p = (f64::INFINITY, f64::NEG_INFINITY);
    let mut s = (f64::INFINITY, f64::NEG_INFINITY);
    let mut u_min = vec![f64::INFINITY; n_u];
    let mut u_max = vec![f64::NEG_INFINITY; n_u];
    for t in trajs {
        if t.n_controls_dim() != n_u {
            return Err(DatasetError::Inconsistent(
                "control dimension varies across trajectories".into(),
            ));
        }
        for snap in &t.snapshots {
            for &v in &snap.pressure {
                p = (p.0.min(v), p.1.max(v));
            }
            for &v in &snap.sw {
                s = (s.0.min(v), s.1.max(v));
            }
        }
        for u in &t.controls {
            for (c, &v) in u.iter().enumerate() {
                u_min[c] = u_min[c].min(v);
                u_max[c] = u_max[c].max(v);
            }
        }
    }
    Ok(NormStats {
        p_min: p.0,
        p_max: p.1,
        s_min: s.0,
        s_max: s.1,
        p_const: p.1 <= p.0,
        s_const: s.1 <= s.0,
        control_const: u_min.iter().zip(&u_max).map(|(a, b)| b <= a).collect(),
        control_min: u_min,
        control_max: u_max,
    })
}

impl NormStats {
    pub fn n_controls(&self) -> usize {
        self.control_min.len()
    }

    /// Pressure + saturation snapshot as a normalized `(2, ny, nx)` tensor.
    pub fn normalize_state(&self, state: &SimState, nx: usize, ny: usize) -> Tensor {
        let ps = scale_of(self.p_min, self.p_max);
        let ss = scale_of(self.s_min, self.s_max);
        let mut data = Vec::with_capacity(2 * nx * ny);
        data.extend(state.pressure.iter().map(|v| (v - self.p_min) / ps));
        data.extend(state.sw.iter().map(|v| (v - self.s_min) / ss));
        Tensor::new(vec![2, ny, nx], data).expect("state matches grid")
    }

    /// Inverse of [`NormStats::normalize_state`]; returns (pressure, sw).
    pub fn denormalize_state(&self, t: &Tensor) -> (Vec<f64>, Vec<f64>) {
        let plane = t.len() / 2;
        let ps = scale_of(self.p_min, self.p_max);
        let ss = scale_of(self.s_min, self.s_max);
        let pressure = t.data()[..plane].iter().map(|v| v * ps + self.p_min).collect();
        let sw = t.data()[plane..].iter().map(|v| v * ss + self.s_min).collect();
        (pressure, sw)
    }

    pub fn normalize_control(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(c, &v)| (v - self.control_min[c]) / scale_of(self.control_min[c], self.control_max[c]))
            .collect()
    }

    pub fn denormalize_control(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(c, &v)| v * scale_of(self.control_min[c], self.control_max[c]) + self.control_min[c])
            .collect()
    }
}

/// Index view of one k-step training tuple: `k+1` states and `k` controls
/// starting at snapshot `start` of trajectory `traj`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub traj: usize,
    pub start: usize,
}

/// All k-step windows, trajectory order then start order. A trajectory
/// with `n` snapshots contributes `n - k` windows; shorter ones are
/// skipped and counted.
pub fn window_trajectories(trajs: &[Trajectory], k: usize) -> (Vec<Window>, usize) {
    assert!(k >= 1, "window length k must be >= 1");
    let mut windows = Vec::new();
    let mut skipped = 0;
    for (t, traj) in trajs.iter().enumerate() {
        let n = traj.n_snapshots();
        if n < k + 1 {
            skipped += 1;
            continue;
        }
        windows.extend((0..n - k).map(|start| Window { traj: t, start }));
    }
    (windows, skipped)
}

/// Whole-trajectory train/test split: seeded shuffle, then prefix split
/// by `ratio = (train, test)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_train_test(n_traj: usize, ratio: (u32, u32), seed: u64) -> Result<DatasetSplit, DatasetError> {
    if n_traj < 2 {
        return Err(DatasetError::TooFewTrajectories(n_traj));
    }
    if ratio.0 == 0 || ratio.1 == 0 {
        return Err(DatasetError::Inconsistent(format!(
            "split ratio {}:{} must have positive parts",
            ratio.0, ratio.1
        )));
    }
    let mut ids: Vec<usize> = (0..n_traj).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = (n_traj * ratio.0 as usize / (ratio.0 + ratio.1) as usize).clamp(1, n_traj - 1);
    let test = ids.split_off(n_train);
    Ok(DatasetSplit { train: ids, test })
}

/// Normalized in-memory dataset; windows index into it without copying.
#[derive(Debug, Clone)]
pub struct NormalizedDataset {
    pub states: Vec<Vec<Tensor>>,
    pub controls: Vec<Vec<Vec<f64>>>,
    pub stats: NormStats,
    pub nx: usize,
    pub ny: usize,
}

impl NormalizedDataset {
    pub fn from_trajectories(trajs: &[Trajectory], stats: NormStats) -> Result<Self, DatasetError> {
        let first = trajs.first().ok_or(DatasetError::Empty)?;
        let (nx, ny) = (first.nx, first.ny);
        let mut states = Vec::with_capacity(trajs.len());
        let mut controls = Vec::with_capacity(trajs.len());
        for t in trajs {
            if t.nx != nx || t.ny != ny {
                return Err(DatasetError::Inconsistent("grid size varies across trajectories".into()));
            }
            states.push(
                t.snapshots
                    .iter()
                    .map(|s| stats.normalize_state(s, nx, ny))
                    .collect(),
            );
            controls.push(t.controls.iter().map(|u| stats.normalize_control(u)).collect());
        }
        Ok(Self { states, controls, stats, nx, ny })
    }

    /// The `k+1` states of a window.
    pub fn window_states(&self, w: Window, k: usize) -> &[Tensor] {
        &self.states[w.traj][w.start..=w.start + k]
    }

    /// The `k` controls of a window.
    pub fn window_controls(&self, w: Window, k: usize) -> &[Vec<f64>] {
        &self.controls[w.traj][w.start..w.start + k]
    }
}

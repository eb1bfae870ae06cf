//! Incompressible two-phase (water/oil) finite-volume simulator for a
//! 2-D waterflood: implicit pressure, explicit CFL-limited saturation
//! transport, rate-controlled injectors and BHP-controlled producers.

mod fracflow;
mod perm;
mod pressure;
mod run;
mod transport;
mod wells;

pub use fracflow::{frac_flow, max_fw_derivative, rel_perms};
pub use perm::generate_perm_field;
pub use pressure::{solve_pressure, PressureSolution};
pub use run::{run_simulation, sample_schedules, MassBalance, SimOptions};
pub use transport::{update_saturation, TransportResult};
pub use wells::peaceman_wi;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("saturation {sw} outside [{lo}, {hi}] at cell {cell}")]
    SaturationBounds { sw: f64, lo: f64, hi: f64, cell: usize },
    #[error("pressure system is singular: injection without any BHP-controlled well")]
    SingularSystem,
    #[error("pressure solver did not converge in {iters} iterations (relative residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("transport needs {needed} CFL substeps, cap is {cap}")]
    CflExceeded { needed: usize, cap: usize },
    #[error("wellbore radius {rw} must be below the Peaceman equivalent radius {r_eq}")]
    WellRadius { rw: f64, r_eq: f64 },
    #[error("period {period}: {source}")]
    Period { period: usize, source: Box<SimError> },
}

/// Uniform rectangular cell grid; porosity may vary per cell.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub porosity: Vec<f64>,
}

impl GridSpec {
    pub fn uniform(nx: usize, ny: usize, dx: f64, dy: f64, dz: f64, porosity: f64) -> Result<Self, SimError> {
        Self::new(nx, ny, dx, dy, dz, vec![porosity; nx * ny])
    }

    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, dz: f64, porosity: Vec<f64>) -> Result<Self, SimError> {
        if nx < 4 || ny < 4 {
            return Err(SimError::InvalidConfig(format!("grid must be at least 4x4, got {nx}x{ny}")));
        }
        if dx <= 0.0 || dy <= 0.0 || dz <= 0.0 {
            return Err(SimError::InvalidConfig("cell dimensions must be positive".into()));
        }
        if porosity.len() != nx * ny {
            return Err(SimError::InvalidConfig(format!(
                "porosity has {} entries for {} cells",
                porosity.len(),
                nx * ny
            )));
        }
        if porosity.iter().any(|&p| p <= 0.0 || p >= 1.0) {
            return Err(SimError::InvalidConfig("porosity must lie in (0, 1)".into()));
        }
        Ok(Self { nx, ny, dx, dy, dz, porosity })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Linear cell index for column `i`, row `j`.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    pub fn pore_volume(&self, cell: usize) -> f64 {
        self.cell_volume() * self.porosity[cell]
    }

    pub fn total_pore_volume(&self) -> f64 {
        self.porosity.iter().sum::<f64>() * self.cell_volume()
    }
}

/// Rock and fluid description: per-cell isotropic permeability plus a
/// Corey relative-permeability model.
#[derive(Debug, Clone)]
pub struct RockFluidProps {
    pub perm: Vec<f64>,
    pub mu_w: f64,
    pub mu_o: f64,
    pub swc: f64,
    pub sor: f64,
    pub nw: f64,
    pub no: f64,
    pub krw0: f64,
    pub kro0: f64,
}

impl RockFluidProps {
    /// Favorable-displacement defaults with the given permeability field.
    pub fn with_perm(perm: Vec<f64>) -> Self {
        Self {
            perm,
            mu_w: 5e-4,
            mu_o: 3e-3,
            swc: 0.2,
            sor: 0.2,
            nw: 2.0,
            no: 2.0,
            krw0: 1.0,
            kro0: 1.0,
        }
    }

    pub fn validate(&self, n_cells: usize) -> Result<(), SimError> {
        if self.perm.len() != n_cells {
            return Err(SimError::InvalidConfig(format!(
                "permeability has {} entries for {n_cells} cells",
                self.perm.len()
            )));
        }
        if self.perm.iter().any(|&k| k <= 0.0) {
            return Err(SimError::InvalidConfig("permeability must be positive".into()));
        }
        if self.mu_w <= 0.0 || self.mu_o <= 0.0 {
            return Err(SimError::InvalidConfig("viscosities must be positive".into()));
        }
        if self.swc < 0.0 || self.sor < 0.0 || self.swc + self.sor >= 1.0 {
            return Err(SimError::InvalidConfig("need swc, sor >= 0 and swc + sor < 1".into()));
        }
        if self.nw < 1.0 || self.no < 1.0 {
            return Err(SimError::InvalidConfig("Corey exponents must be >= 1".into()));
        }
        if self.krw0 <= 0.0 || self.kro0 <= 0.0 {
            return Err(SimError::InvalidConfig("endpoint relative permeabilities must be positive".into()));
        }
        Ok(())
    }

    pub fn sw_max(&self) -> f64 {
        1.0 - self.sor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WellKind {
    Injector,
    Producer,
}

#[derive(Debug, Clone)]
pub struct WellSpec {
    pub id: String,
    pub i: usize,
    pub j: usize,
    pub kind: WellKind,
    pub radius: f64,
}

impl WellSpec {
    pub fn new(id: impl Into<String>, i: usize, j: usize, kind: WellKind) -> Self {
        Self {
            id: id.into(),
            i,
            j,
            kind,
            radius: 0.1,
        }
    }
}

/// Ordered well list; the control-vector layout is all injector rates in
/// listing order followed by all producer BHPs in listing order.
#[derive(Debug, Clone)]
pub struct WellSet {
    wells: Vec<WellSpec>,
}

impl WellSet {
    pub fn new(wells: Vec<WellSpec>, grid: &GridSpec) -> Result<Self, SimError> {
        let mut seen = std::collections::BTreeSet::new();
        for w in &wells {
            if w.i >= grid.nx || w.j >= grid.ny {
                return Err(SimError::InvalidConfig(format!(
                    "well `{}` at ({}, {}) outside {}x{} grid",
                    w.id, w.i, w.j, grid.nx, grid.ny
                )));
            }
            if !seen.insert((w.i, w.j)) {
                return Err(SimError::InvalidConfig(format!(
                    "well `{}` shares cell ({}, {}) with another well",
                    w.id, w.i, w.j
                )));
            }
            if w.radius <= 0.0 {
                return Err(SimError::InvalidConfig(format!("well `{}` has non-positive radius", w.id)));
            }
        }
        Ok(Self { wells })
    }

    /// 4 injectors at the quadrant midpoints and 5 producers in a quincunx
    /// (corners inset by an eighth of the grid, plus the center). Small
    /// grids fall back to producers at the literal corners.
    pub fn default_pattern(grid: &GridSpec) -> Result<Self, SimError> {
        let (nx, ny) = (grid.nx, grid.ny);
        let q = |f: usize, n: usize| (n * f) / 4;
        let mk = |inset_x: usize, inset_y: usize| {
            vec![
                WellSpec::new("I1", q(1, nx), q(1, ny), WellKind::Injector),
                WellSpec::new("I2", q(3, nx), q(1, ny), WellKind::Injector),
                WellSpec::new("I3", q(1, nx), q(3, ny), WellKind::Injector),
                WellSpec::new("I4", q(3, nx), q(3, ny), WellKind::Injector),
                WellSpec::new("P1", inset_x, inset_y, WellKind::Producer),
                WellSpec::new("P2", nx - 1 - inset_x, inset_y, WellKind::Producer),
                WellSpec::new("P3", inset_x, ny - 1 - inset_y, WellKind::Producer),
                WellSpec::new("P4", nx - 1 - inset_x, ny - 1 - inset_y, WellKind::Producer),
                WellSpec::new("P5", nx / 2, ny / 2, WellKind::Producer),
            ]
        };
        Self::new(mk(nx / 8, ny / 8), grid).or_else(|_| Self::new(mk(0, 0), grid))
    }

    pub fn all(&self) -> &[WellSpec] {
        &self.wells
    }

    pub fn injectors(&self) -> impl Iterator<Item = &WellSpec> {
        self.wells.iter().filter(|w| w.kind == WellKind::Injector)
    }

    pub fn producers(&self) -> impl Iterator<Item = &WellSpec> {
        self.wells.iter().filter(|w| w.kind == WellKind::Producer)
    }

    pub fn n_injectors(&self) -> usize {
        self.injectors().count()
    }

    pub fn n_producers(&self) -> usize {
        self.producers().count()
    }

    /// Control-vector dimension.
    pub fn n_controls(&self) -> usize {
        self.wells.len()
    }

    /// Splits a control vector into (injector rates, producer BHPs).
    pub fn split_control<'a>(&self, control: &'a [f64]) -> Result<(&'a [f64], &'a [f64]), SimError> {
        let (ni, np) = (self.n_injectors(), self.n_producers());
        if control.len() != ni + np {
            return Err(SimError::InvalidConfig(format!(
                "control vector has {} entries for {} wells",
                control.len(),
                ni + np
            )));
        }
        Ok(control.split_at(ni))
    }
}

/// Piecewise-constant schedule: one control vector per period.
#[derive(Debug, Clone)]
pub struct ControlSchedule {
    pub period_length: f64,
    pub controls: Vec<Vec<f64>>,
}

impl ControlSchedule {
    pub fn n_periods(&self) -> usize {
        self.controls.len()
    }

    pub fn validate(&self, wells: &WellSet) -> Result<(), SimError> {
        if self.period_length <= 0.0 {
            return Err(SimError::InvalidConfig("period length must be positive".into()));
        }
        for (p, c) in self.controls.iter().enumerate() {
            let (rates, bhps) = wells.split_control(c)?;
            if rates.iter().any(|&r| r < 0.0 || !r.is_finite()) {
                return Err(SimError::InvalidConfig(format!("period {p}: negative or non-finite rate")));
            }
            if bhps.iter().any(|&b| b <= 0.0 || !b.is_finite()) {
                return Err(SimError::InvalidConfig(format!("period {p}: non-positive BHP")));
            }
        }
        Ok(())
    }
}

/// Pressure and water saturation on the grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub pressure: Vec<f64>,
    pub sw: Vec<f64>,
    pub time: f64,
}

/// One simulation run: snapshots at report times plus the controls that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub nx: usize,
    pub ny: usize,
    pub snapshots: Vec<SimState>,
    pub controls: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.snapshots.len() != self.controls.len() + 1 {
            return Err(SimError::InvalidConfig(format!(
                "{} snapshots with {} controls; want snapshots = controls + 1",
                self.snapshots.len(),
                self.controls.len()
            )));
        }
        let n = self.nx * self.ny;
        for s in &self.snapshots {
            if s.pressure.len() != n || s.sw.len() != n {
                return Err(SimError::InvalidConfig("snapshot size does not match grid".into()));
            }
        }
        if self.snapshots.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(SimError::InvalidConfig("snapshot times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn n_snapshots(&self) -> usize {
        self.snapshots.len()
    }

    pub fn n_controls_dim(&self) -> usize {
        self.controls.first().map_or(0, Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_tiny_or_degenerate_configs() {
        assert!(GridSpec::uniform(3, 8, 1.0, 1.0, 1.0, 0.2).is_err());
        assert!(GridSpec::uniform(8, 8, 0.0, 1.0, 1.0, 0.2).is_err());
        assert!(GridSpec::uniform(8, 8, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(GridSpec::uniform(8, 8, 1.0, 1.0, 1.0, 0.2).is_ok());
    }

    #[test]
    fn default_pattern_has_nine_distinct_wells() {
        for n in [16usize, 32, 64] {
            let grid = GridSpec::uniform(n, n, 20.0, 20.0, 20.0, 0.2).unwrap();
            let wells = WellSet::default_pattern(&grid).unwrap();
            assert_eq!(wells.n_injectors(), 4);
            assert_eq!(wells.n_producers(), 5);
            assert_eq!(wells.n_controls(), 9);
        }
    }

    #[test]
    fn wells_must_occupy_distinct_cells() {
        let grid = GridSpec::uniform(8, 8, 1.0, 1.0, 1.0, 0.2).unwrap();
        let dup = vec![
            WellSpec::new("a", 2, 2, WellKind::Injector),
            WellSpec::new("b", 2, 2, WellKind::Producer),
        ];
        assert!(WellSet::new(dup, &grid).is_err());
    }

    #[test]
    fn trajectory_validation_checks_counts_and_times() {
        let state = |t: f64| SimState {
            pressure: vec![1.0; 16],
            sw: vec![0.2; 16],
            time: t,
        };
        let good = Trajectory {
            nx: 4,
            ny: 4,
            snapshots: vec![state(0.0), state(1.0)],
            controls: vec![vec![1.0]],
        };
        assert!(good.validate().is_ok());
        let bad_counts = Trajectory {
            controls: vec![],
            ..good.clone()
        };
        assert!(bad_counts.validate().is_err());
        let bad_times = Trajectory {
            snapshots: vec![state(1.0), state(1.0)],
            ..good
        };
        assert!(bad_times.validate().is_err());
    }
}

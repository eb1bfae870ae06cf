use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::pressure::solve_pressure;
use super::transport::update_saturation;
use super::{ControlSchedule, GridSpec, RockFluidProps, SimError, SimState, Trajectory, WellSet};

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Initial uniform reservoir pressure (Pa).
    pub p_init: f64,
    /// Pressure solves per control period; saturation transport between
    /// solves is CFL-substepped on a frozen flux field.
    pub pressure_steps_per_period: usize,
    pub max_substeps: usize,
    /// Snapshot every this many periods.
    pub report_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            p_init: 25e6,
            pressure_steps_per_period: 10,
            max_substeps: 100_000,
            report_every: 1,
        }
    }
}

/// Water volumes (m³) accumulated over a run.
#[derive(Debug, Clone, Copy)]
pub struct MassBalance {
    pub injected: f64,
    pub produced_water: f64,
    pub pore_water_initial: f64,
    pub pore_water_final: f64,
}

impl MassBalance {
    /// |Δ(pore water) − (injected − produced)| relative to injection.
    pub fn relative_error(&self) -> f64 {
        let gain = self.pore_water_final - self.pore_water_initial;
        let net = self.injected - self.produced_water;
        (gain - net).abs() / self.injected.abs().max(1e-300)
    }
}

/// Runs the waterflood from uniform initial pressure and connate water,
/// reporting snapshots at period boundaries (t = 0 plus every
/// `report_every`-th period end). Deterministic for fixed inputs.
pub fn run_simulation(
    grid: &GridSpec,
    props: &RockFluidProps,
    wells: &WellSet,
    schedule: &ControlSchedule,
    opts: &SimOptions,
) -> Result<(Trajectory, MassBalance), SimError> {
    props.validate(grid.n_cells())?;
    schedule.validate(wells)?;
    if opts.pressure_steps_per_period == 0 || opts.report_every == 0 {
        return Err(SimError::InvalidConfig("pressure steps and report interval must be >= 1".into()));
    }
    if schedule.n_periods() % opts.report_every != 0 {
        return Err(SimError::InvalidConfig(format!(
            "{} periods not divisible by report_every {}",
            schedule.n_periods(),
            opts.report_every
        )));
    }

    let n = grid.n_cells();
    let mut state = SimState {
        pressure: vec![opts.p_init; n],
        sw: vec![props.swc; n],
        time: 0.0,
    };
    let pore_water = |sw: &[f64]| -> f64 { (0..n).map(|c| grid.pore_volume(c) * sw[c]).sum() };

    let mut balance = MassBalance {
        injected: 0.0,
        produced_water: 0.0,
        pore_water_initial: pore_water(&state.sw),
        pore_water_final: 0.0,
    };

    let mut snapshots = vec![state.clone()];
    let mut controls = Vec::new();
    let dt_step = schedule.period_length / opts.pressure_steps_per_period as f64;

    for period in 0..schedule.n_periods() {
        let control = &schedule.controls[period];
        let mut step = |state: &mut SimState, dt: f64| -> Result<(), SimError> {
            let sol = solve_pressure(grid, props, wells, control, state)?;
            let res = update_saturation(grid, props, wells, &sol, &state.sw, dt, opts.max_substeps)?;
            state.pressure = sol.pressure;
            state.sw = res.sw;
            state.time += dt;
            balance.injected += res.injected_water;
            balance.produced_water += res.produced_water;
            Ok(())
        };
        let wrap = |e: SimError| SimError::Period { period, source: Box::new(e) };
        for _ in 0..opts.pressure_steps_per_period {
            step(&mut state, dt_step).map_err(wrap)?;
        }
        if (period + 1) % opts.report_every == 0 {
            // report the pressure consistent with end-of-period saturations
            let sol = solve_pressure(grid, props, wells, control, &state).map_err(wrap)?;
            state.pressure = sol.pressure;
            snapshots.push(state.clone());
            controls.push(control.clone());
        }
    }

    balance.pore_water_final = pore_water(&state.sw);
    let traj = Trajectory {
        nx: grid.nx,
        ny: grid.ny,
        snapshots,
        controls,
    };
    traj.validate()?;
    Ok((traj, balance))
}

/// Independent uniform draws of each period's injector rates and producer
/// BHPs; deterministic per seed.
#[allow(clippy::too_many_arguments)]
pub fn sample_schedules(
    n: usize,
    seed: u64,
    n_injectors: usize,
    n_producers: usize,
    rate_range: (f64, f64),
    bhp_range: (f64, f64),
    period_length: f64,
    n_periods: usize,
) -> Result<Vec<ControlSchedule>, SimError> {
    for (name, (lo, hi)) in [("rate", rate_range), ("bhp", bhp_range)] {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
            return Err(SimError::InvalidConfig(format!("bad {name} range [{lo}, {hi}]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: f64, hi: f64| -> f64 {
        if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let controls = (0..n_periods)
            .map(|_| {
                let mut u = Vec::with_capacity(n_injectors + n_producers);
                for _ in 0..n_injectors {
                    u.push(draw(rate_range.0, rate_range.1));
                }
                for _ in 0..n_producers {
                    u.push(draw(bhp_range.0, bhp_range.1));
                }
                u
            })
            .collect();
        out.push(ControlSchedule {
            period_length,
            controls,
        });
    }
    Ok(out)
}

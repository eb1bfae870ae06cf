use super::fracflow::{frac_flow, max_fw_derivative};
use super::pressure::PressureSolution;
use super::{GridSpec, RockFluidProps, WellKind, WellSet, SimError};

const CFL: f64 = 0.5;

/// Saturation change over one pressure step plus the water volumes that
/// crossed the wells during it.
#[derive(Debug, Clone)]
pub struct TransportResult {
    pub sw: Vec<f64>,
    pub injected_water: f64,
    pub produced_water: f64,
    pub substeps: usize,
}

/// Explicit upwind transport of water saturation over `dt` seconds on the
/// fixed total-flux field of `sol`, internally sub-stepped to CFL <= 0.5.
pub fn update_saturation(
    grid: &GridSpec,
    props: &RockFluidProps,
    wells: &WellSet,
    sol: &PressureSolution,
    sw0: &[f64],
    dt: f64,
    max_substeps: usize,
) -> Result<TransportResult, SimError> {
    let n = grid.n_cells();
    let (nx, ny) = (grid.nx, grid.ny);
    if sw0.len() != n {
        return Err(SimError::InvalidConfig("saturation size does not match grid".into()));
    }
    if dt <= 0.0 {
        return Err(SimError::InvalidConfig("transport step must be positive".into()));
    }

    // Per-well cell and signed total rate (positive into the reservoir).
    let mut inj_cells: Vec<(usize, f64)> = Vec::new();
    let mut prod_cells: Vec<(usize, f64)> = Vec::new();
    for (w, &q) in wells.all().iter().zip(&sol.well_rates) {
        let c = grid.idx(w.i, w.j);
        match w.kind {
            WellKind::Injector => inj_cells.push((c, q)),
            WellKind::Producer => {
                if q > 0.0 {
                    // backflow: the well feeds the reservoir; treat the
                    // in-stream as water so volume stays balanced
                    inj_cells.push((c, q));
                } else {
                    prod_cells.push((c, -q));
                }
            }
        }
    }

    // CFL bound from total outflow per cell and the steepest slope of fw.
    let mut outflow = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx - 1 {
            let f = sol.flux_x[j * (nx - 1) + i];
            if f > 0.0 {
                outflow[j * nx + i] += f;
            } else {
                outflow[j * nx + i + 1] -= f;
            }
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let f = sol.flux_y[j * nx + i];
            if f > 0.0 {
                outflow[j * nx + i] += f;
            } else {
                outflow[(j + 1) * nx + i] -= f;
            }
        }
    }
    for &(c, q) in &prod_cells {
        outflow[c] += q;
    }
    let dfw = max_fw_derivative(props);
    let mut dt_stable = f64::INFINITY;
    for c in 0..n {
        if outflow[c] > 0.0 {
            dt_stable = dt_stable.min(CFL * grid.pore_volume(c) / (outflow[c] * dfw));
        }
    }
    let n_sub = if dt_stable.is_finite() {
        (dt / dt_stable).ceil() as usize
    } else {
        1
    }
    .max(1);
    if n_sub > max_substeps {
        return Err(SimError::CflExceeded { needed: n_sub, cap: max_substeps });
    }
    let dt_s = dt / n_sub as f64;

    let mut sw = sw0.to_vec();
    let mut delta = vec![0.0; n];
    let mut injected = 0.0;
    let mut produced = 0.0;
    let (lo, hi) = (props.swc, props.sw_max());
    for _ in 0..n_sub {
        delta.fill(0.0);
        // face water fluxes, fractional flow upwinded by flow direction
        for j in 0..ny {
            for i in 0..nx - 1 {
                let f = sol.flux_x[j * (nx - 1) + i];
                if f == 0.0 {
                    continue;
                }
                let (c0, c1) = (j * nx + i, j * nx + i + 1);
                let donor = if f > 0.0 { c0 } else { c1 };
                let fwf = frac_flow(sw[donor], props)?.0 * f;
                delta[c0] -= fwf;
                delta[c1] += fwf;
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let f = sol.flux_y[j * nx + i];
                if f == 0.0 {
                    continue;
                }
                let (c0, c1) = (j * nx + i, (j + 1) * nx + i);
                let donor = if f > 0.0 { c0 } else { c1 };
                let fwf = frac_flow(sw[donor], props)?.0 * f;
                delta[c0] -= fwf;
                delta[c1] += fwf;
            }
        }
        for &(c, q) in &inj_cells {
            delta[c] += q;
            injected += q * dt_s;
        }
        for &(c, q) in &prod_cells {
            let fw = frac_flow(sw[c], props)?.0;
            delta[c] -= fw * q;
            produced += fw * q * dt_s;
        }
        for c in 0..n {
            sw[c] = (sw[c] + dt_s * delta[c] / grid.pore_volume(c)).clamp(lo, hi);
        }
    }

    Ok(TransportResult { sw, injected_water: injected, produced_water: produced, substeps: n_sub })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{solve_pressure, SimState, WellSpec};

    #[test]
    fn zero_flux_leaves_saturation_unchanged() {
        let grid = GridSpec::uniform(5, 5, 20.0, 20.0, 20.0, 0.2).unwrap();
        let props = RockFluidProps::with_perm(vec![1e-13; 25]);
        let wells = WellSet::new(vec![], &grid).unwrap();
        let sol = PressureSolution {
            pressure: vec![25e6; 25],
            flux_x: vec![0.0; 20],
            flux_y: vec![0.0; 20],
            well_rates: vec![],
        };
        let sw0: Vec<f64> = (0..25).map(|c| 0.2 + 0.6 * (c % 5) as f64 / 4.0).collect();
        let res = update_saturation(&grid, &props, &wells, &sol, &sw0, 1e6, 1000).unwrap();
        assert_eq!(res.sw, sw0);
        assert_eq!(res.injected_water, 0.0);
        assert_eq!(res.produced_water, 0.0);
    }

    #[test]
    fn water_spreads_only_downstream_of_the_injector() {
        let grid = GridSpec::uniform(8, 8, 20.0, 20.0, 20.0, 0.2).unwrap();
        let props = RockFluidProps::with_perm(vec![1e-13; 64]);
        let wells = WellSet::new(
            vec![
                WellSpec::new("i", 0, 0, WellKind::Injector),
                WellSpec::new("p", 7, 7, WellKind::Producer),
            ],
            &grid,
        )
        .unwrap();
        let state = SimState {
            pressure: vec![25e6; 64],
            sw: vec![0.2; 64],
            time: 0.0,
        };
        let sol = solve_pressure(&grid, &props, &wells, &[1e-3, 18e6], &state).unwrap();
        // 30 days: a few cells swept, the far corner still untouched
        let res = update_saturation(&grid, &props, &wells, &sol, &state.sw, 30.0 * 86400.0, 100_000).unwrap();
        assert!(res.sw[grid.idx(0, 0)] > 0.2);
        assert!(res.sw[grid.idx(7, 7)] == 0.2);
        let near = res.sw[grid.idx(1, 0)] + res.sw[grid.idx(0, 1)];
        let far = res.sw[grid.idx(6, 7)] + res.sw[grid.idx(7, 6)];
        assert!(near > far);
    }

    #[test]
    fn water_volume_balances_over_the_step() {
        let grid = GridSpec::uniform(10, 10, 20.0, 20.0, 20.0, 0.2).unwrap();
        let props = RockFluidProps::with_perm(vec![2e-13; 100]);
        let wells = WellSet::new(
            vec![
                WellSpec::new("i", 1, 1, WellKind::Injector),
                WellSpec::new("p", 8, 8, WellKind::Producer),
            ],
            &grid,
        )
        .unwrap();
        let state = SimState {
            pressure: vec![25e6; 100],
            sw: vec![0.35; 100],
            time: 0.0,
        };
        let sol = solve_pressure(&grid, &props, &wells, &[2e-3, 17e6], &state).unwrap();
        let res = update_saturation(&grid, &props, &wells, &sol, &state.sw, 30.0 * 86400.0, 100_000).unwrap();
        let pore0: f64 = (0..100).map(|c| grid.pore_volume(c) * state.sw[c]).sum();
        let pore1: f64 = (0..100).map(|c| grid.pore_volume(c) * res.sw[c]).sum();
        let err = ((pore1 - pore0) - (res.injected_water - res.produced_water)).abs();
        assert!(err < 1e-8 * res.injected_water, "imbalance {err:e}");
    }

    #[test]
    fn substep_cap_is_enforced() {
        let grid = GridSpec::uniform(5, 5, 20.0, 20.0, 20.0, 0.2).unwrap();
        let props = RockFluidProps::with_perm(vec![1e-13; 25]);
        let wells = WellSet::new(
            vec![
                WellSpec::new("i", 0, 0, WellKind::Injector),
                WellSpec::new("p", 4, 4, WellKind::Producer),
            ],
            &grid,
        )
        .unwrap();
        let state = SimState {
            pressure: vec![25e6; 25],
            sw: vec![0.2; 25],
            time: 0.0,
        };
        let sol = solve_pressure(&grid, &props, &wells, &[1e-2, 18e6], &state).unwrap();
        let got = update_saturation(&grid, &props, &wells, &sol, &state.sw, 1e9, 3);
        assert!(matches!(got, Err(SimError::CflExceeded { .. })));
    }
}

use super::fracflow::frac_flow;
use super::wells::peaceman_wi;
use super::{GridSpec, RockFluidProps, SimState, WellKind, WellSet, SimError};

const CG_REL_TOL: f64 = 1e-12;

/// Solved pressure field plus the face fluxes and well rates implied by it.
///
/// `flux_x[j*(nx-1)+i]` is the total volumetric flux (m³/s) from cell
/// `(i, j)` into `(i+1, j)`, positive in +x; `flux_y` likewise in +y.
/// `well_rates` follow well listing order, positive into the reservoir.
#[derive(Debug, Clone)]
pub struct PressureSolution {
    pub pressure: Vec<f64>,
    pub flux_x: Vec<f64>,
    pub flux_y: Vec<f64>,
    pub well_rates: Vec<f64>,
}

/// Implicit incompressible pressure solve for one IMPES step.
///
/// Face total mobility is upwinded by the previous-step pressure in
/// `state` (arithmetic mean on ties). Injectors are fixed sources;
/// producers couple through the Peaceman index,
/// `q = WI * lambda_t * (p_bhp - p_cell)`.
pub fn solve_pressure(
    grid: &GridSpec,
    props: &RockFluidProps,
    wells: &WellSet,
    control: &[f64],
    state: &SimState,
) -> Result<PressureSolution, SimError> {
    props.validate(grid.n_cells())?;
    let (rates, bhps) = wells.split_control(control)?;
    let n = grid.n_cells();
    if state.pressure.len() != n || state.sw.len() != n {
        return Err(SimError::InvalidConfig("state size does not match grid".into()));
    }

    // Pressure is defined only up to a constant unless a BHP well pins it.
    if wells.n_producers() == 0 {
        if rates.iter().any(|&r| r > 0.0) {
            return Err(SimError::SingularSystem);
        }
        return Ok(PressureSolution {
            pressure: state.pressure.clone(),
            flux_x: vec![0.0; grid.ny * (grid.nx - 1)],
            flux_y: vec![0.0; (grid.ny - 1) * grid.nx],
            well_rates: vec![0.0; wells.n_controls()],
        });
    }

    let lam: Vec<f64> = state
        .sw
        .iter()
        .map(|&sw| frac_flow(sw, props).map(|(_, l)| l))
        .collect::<Result<_, _>>()?;

    // Face coefficients: harmonic permeability average times the donor
    // cell's total mobility (donor by previous pressure).
    let (nx, ny) = (grid.nx, grid.ny);
    let geo_x = grid.dy * grid.dz / grid.dx;
    let geo_y = grid.dx * grid.dz / grid.dy;
    let harm = |a: f64, b: f64| 2.0 * a * b / (a + b);
    let face_lambda = |c0: usize, c1: usize| -> f64 {
        if state.pressure[c0] > state.pressure[c1] {
            lam[c0]
        } else if state.pressure[c1] > state.pressure[c0] {
            lam[c1]
        } else {
            0.5 * (lam[c0] + lam[c1])
        }
    };
    let mut tx = vec![0.0; ny * (nx - 1)];
    for j in 0..ny {
        for i in 0..nx - 1 {
            let (c0, c1) = (grid.idx(i, j), grid.idx(i + 1, j));
            tx[j * (nx - 1) + i] = geo_x * harm(props.perm[c0], props.perm[c1]) * face_lambda(c0, c1);
        }
    }
    let mut ty = vec![0.0; (ny - 1) * nx];
    for j in 0..ny - 1 {
        for i in 0..nx {
            let (c0, c1) = (grid.idx(i, j), grid.idx(i, j + 1));
            ty[j * nx + i] = geo_y * harm(props.perm[c0], props.perm[c1]) * face_lambda(c0, c1);
        }
    }

    let mut diag = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx - 1 {
            let t = tx[j * (nx - 1) + i];
            diag[grid.idx(i, j)] += t;
            diag[grid.idx(i + 1, j)] += t;
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let t = ty[j * nx + i];
            diag[grid.idx(i, j)] += t;
            diag[grid.idx(i, j + 1)] += t;
        }
    }

    let mut rhs = vec![0.0; n];
    for (w, &rate) in wells.injectors().zip(rates) {
        rhs[grid.idx(w.i, w.j)] += rate;
    }
    // producer coupling: WI * lambda_t(cell) against the BHP
    let mut prod_coupling = Vec::with_capacity(wells.n_producers());
    for (w, &bhp) in wells.producers().zip(bhps) {
        let c = grid.idx(w.i, w.j);
        let wi = peaceman_wi(grid, props.perm[c], w.radius)?;
        let coeff = wi * lam[c];
        diag[c] += coeff;
        rhs[c] += coeff * bhp;
        prod_coupling.push((c, coeff, bhp));
    }

    let sys = System { nx, ny, tx: &tx, ty: &ty, diag: &diag };
    let pressure = conjugate_gradient(&sys, &rhs, &state.pressure)?;

    let mut flux_x = vec![0.0; ny * (nx - 1)];
    for j in 0..ny {
        for i in 0..nx - 1 {
            flux_x[j * (nx - 1) + i] =
                tx[j * (nx - 1) + i] * (pressure[grid.idx(i, j)] - pressure[grid.idx(i + 1, j)]);
        }
    }
    let mut flux_y = vec![0.0; (ny - 1) * nx];
    for j in 0..ny - 1 {
        for i in 0..nx {
            flux_y[j * nx + i] =
                ty[j * nx + i] * (pressure[grid.idx(i, j)] - pressure[grid.idx(i, j + 1)]);
        }
    }

    let mut well_rates = Vec::with_capacity(wells.n_controls());
    well_rates.extend_from_slice(rates);
    for &(c, coeff, bhp) in &prod_coupling {
        well_rates.push(coeff * (bhp - pressure[c]));
    }

    Ok(PressureSolution { pressure, flux_x, flux_y, well_rates })
}

struct System<'a> {
    nx: usize,
    ny: usize,
    tx: &'a [f64],
    ty: &'a [f64],
    diag: &'a [f64],
}

impl System<'_> {
    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for c in 0..p.len() {
            out[c] = self.diag[c] * p[c];
        }
        for j in 0..ny {
            for i in 0..nx - 1 {
                let t = self.tx[j * (nx - 1) + i];
                let (c0, c1) = (j * nx + i, j * nx + i + 1);
                out[c0] -= t * p[c1];
                out[c1] -= t * p[c0];
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let t = self.ty[j * nx + i];
                let (c0, c1) = (j * nx + i, (j + 1) * nx + i);
                out[c0] -= t * p[c1];
                out[c1] -= t * p[c0];
            }
        }
    }
}

/// Jacobi-preconditioned conjugate gradients, warm-started from the
/// previous pressure.
fn conjugate_gradient(sys: &System, b: &[f64], x0: &[f64]) -> Result<Vec<f64>, SimError> {
    let n = b.len();
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok(x0.to_vec());
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    sys.apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(sys.diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let max_iters = 40 * n;
    for _ in 0..max_iters {
        let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_r <= CG_REL_TOL * norm_b {
            return Ok(x);
        }
        sys.apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / sys.diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(SimError::NoConvergence { iters: max_iters, residual: norm_r / norm_b })
}

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SimError;

/// Log-normal permeability field: seeded white noise smoothed by a
/// periodic isotropic Gaussian of the given correlation length (cells),
/// rescaled to unit variance, then exponentiated with the requested
/// log-mean and log-std. Deterministic per seed.
pub fn generate_perm_field(
    seed: u64,
    nx: usize,
    ny: usize,
    log_mean: f64,
    log_std: f64,
    corr_len_cells: f64,
) -> Result<Vec<f64>, SimError> {
    if nx == 0 || ny == 0 {
        return Err(SimError::InvalidConfig("empty grid".into()));
    }
    if corr_len_cells < 1.0 {
        return Err(SimError::InvalidConfig(format!(
            "correlation length {corr_len_cells} must be >= 1 cell"
        )));
    }
    if log_std < 0.0 {
        return Err(SimError::InvalidConfig("log-std must be non-negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise: Vec<f64> = (0..nx * ny)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();

    let kernel = gaussian_kernel(corr_len_cells);
    let smoothed_rows = smooth_axis(&noise, nx, ny, &kernel, true);
    noise = smooth_axis(&smoothed_rows, nx, ny, &kernel, false);

    // Periodic separable smoothing of unit white noise has per-cell
    // variance (sum g^2)^2; divide it back out so log_std means what it says.
    let g2: f64 = kernel.iter().map(|g| g * g).sum();
    let inv_std = 1.0 / g2;
    Ok(noise
        .iter()
        .map(|&v| (log_mean + log_std * v * inv_std).exp())
        .collect())
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-half..=half)
        .map(|d| (-(d as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Wrap-around 1-D convolution along rows (`along_x`) or columns.
fn smooth_axis(field: &[f64], nx: usize, ny: usize, kernel: &[f64], along_x: bool) -> Vec<f64> {
    let half = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; field.len()];
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = 0.0;
            for (t, &g) in kernel.iter().enumerate() {
                let d = t as i64 - half;
                let (ii, jj) = if along_x {
                    ((i as i64 + d).rem_euclid(nx as i64) as usize, j)
                } else {
                    (i, (j as i64 + d).rem_euclid(ny as i64) as usize)
                };
                acc += g * field[jj * nx + ii];
            }
            out[j * nx + i] = acc;
        }
    }
    out
}

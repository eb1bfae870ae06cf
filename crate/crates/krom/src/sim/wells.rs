use super::{GridSpec, SimError};

/// Peaceman well index for an isotropic square-ish cell,
/// `WI = 2 pi k dz / ln(r_eq / r_w)` with `r_eq = 0.14 sqrt(dx^2 + dy^2)`.
pub fn peaceman_wi(grid: &GridSpec, perm_cell: f64, radius: f64) -> Result<f64, SimError> {
    let r_eq = 0.14 * (grid.dx * grid.dx + grid.dy * grid.dy).sqrt();
    if radius >= r_eq {
        return Err(SimError::WellRadius { rw: radius, r_eq });
    }
    if radius <= 0.0 || perm_cell <= 0.0 {
        return Err(SimError::InvalidConfig("well radius and permeability must be positive".into()));
    }
    Ok(2.0 * std::f64::consts::PI * perm_cell * grid.dz / (r_eq / radius).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::uniform(8, 8, 20.0, 20.0, 20.0, 0.2).unwrap()
    }

    #[test]
    fn matches_hand_evaluated_formula() {
        let wi = peaceman_wi(&grid(), 1e-13, 0.1).unwrap();
        let r_eq = 0.14 * (800.0f64).sqrt();
        let want = 2.0 * std::f64::consts::PI * 1e-13 * 20.0 / (r_eq / 0.1).ln();
        assert!((wi - want).abs() <= 1e-18);
        assert!(wi > 0.0);
    }

    #[test]
    fn linear_in_permeability() {
        let g = grid();
        let wi1 = peaceman_wi(&g, 1e-13, 0.1).unwrap();
        let wi2 = peaceman_wi(&g, 2e-13, 0.1).unwrap();
        assert!((wi2 - 2.0 * wi1).abs() < 1e-24);
    }

    #[test]
    fn radius_at_or_beyond_equivalent_radius_errors() {
        let g = grid();
        let r_eq = 0.14 * (800.0f64).sqrt();
        assert!(matches!(
            peaceman_wi(&g, 1e-13, r_eq),
            Err(SimError::WellRadius { .. })
        ));
        assert!(matches!(
            peaceman_wi(&g, 1e-13, r_eq * 1.5),
            Err(SimError::WellRadius { .. })
        ));
        // approaching from below stays finite and positive
        let wi = peaceman_wi(&g, 1e-13, r_eq * 0.999).unwrap();
        assert!(wi.is_finite() && wi > 0.0);
    }
}

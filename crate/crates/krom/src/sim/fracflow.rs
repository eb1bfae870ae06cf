use super::{RockFluidProps, SimError};

const SAT_EPS: f64 = 1e-12;

/// Corey relative permeabilities at water saturation `sw`.
pub fn rel_perms(sw: f64, props: &RockFluidProps) -> Result<(f64, f64), SimError> {
    let lo = props.swc;
    let hi = props.sw_max();
    if sw < lo - SAT_EPS || sw > hi + SAT_EPS {
        return Err(SimError::SaturationBounds { sw, lo, hi, cell: 0 });
    }
    let s = ((sw - lo) / (1.0 - props.swc - props.sor)).clamp(0.0, 1.0);
    let krw = props.krw0 * s.powf(props.nw);
    let kro = props.kro0 * (1.0 - s).powf(props.no);
    Ok((krw, kro))
}

/// Water fractional flow and total mobility at `sw`.
pub fn frac_flow(sw: f64, props: &RockFluidProps) -> Result<(f64, f64), SimError> {
    let (krw, kro) = rel_perms(sw, props)?;
    let lam_w = krw / props.mu_w;
    let lam_o = kro / props.mu_o;
    let lam_t = lam_w + lam_o;
    Ok((lam_w / lam_t, lam_t))
}

/// Largest slope of the fractional-flow curve, from a fine sweep; bounds
/// the transport CFL step.
pub fn max_fw_derivative(props: &RockFluidProps) -> f64 {
    let n = 4000;
    let lo = props.swc;
    let hi = props.sw_max();
    let dsw = (hi - lo) / n as f64;
    let mut prev = frac_flow(lo, props).expect("swc in range").0;
    let mut max_slope = 0.0f64;
    for i in 1..=n {
        let fw = frac_flow(lo + i as f64 * dsw, props).expect("in range").0;
        max_slope = max_slope.max((fw - prev) / dsw);
        prev = fw;
    }
    max_slope
}

#[cfg(test)]
mod tests {
    use super::*;

    fn props() -> RockFluidProps {
        RockFluidProps::with_perm(vec![1e-13])
    }

    #[test]
    fn connate_water_is_immobile() {
        let (fw, lam) = frac_flow(0.2, &props()).unwrap();
        assert_eq!(fw, 0.0);
        assert!(lam > 0.0);
    }

    #[test]
    fn residual_oil_means_pure_water_flow() {
        let (fw, _) = frac_flow(0.8, &props()).unwrap();
        assert_eq!(fw, 1.0);
    }

    #[test]
    fn fractional_flow_is_strictly_increasing() {
        let p = props();
        let n = 1000;
        let mut prev = -1.0;
        for i in 0..=n {
            let sw = 0.2 + 0.6 * i as f64 / n as f64;
            let (fw, _) = frac_flow(sw, &p).unwrap();
            assert!(fw > prev, "fw not increasing at sw={sw}");
            prev = fw;
        }
    }

    #[test]
    fn saturation_outside_bounds_is_a_domain_error() {
        assert!(matches!(
            frac_flow(0.1, &props()),
            Err(SimError::SaturationBounds { .. })
        ));
        assert!(matches!(
            frac_flow(0.9, &props()),
            Err(SimError::SaturationBounds { .. })
        ));
    }

    #[test]
    fn max_slope_bounds_every_sweep_increment() {
        let p = props();
        let m = max_fw_derivative(&p);
        assert!(m > 1.0 && m.is_finite());
        for i in 0..600 {
            let a = 0.2 + 0.001 * i as f64;
            let fa = frac_flow(a, &p).unwrap().0;
            let fb = frac_flow(a + 0.0005, &p).unwrap().0;
            assert!((fb - fa) / 0.0005 <= m * 1.001);
        }
    }
}

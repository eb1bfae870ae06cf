//! Independent test oracles. Everything here re-derives its answer from
//! first principles (its own fractional-flow curve, its own closed forms)
//! rather than calling the code under test.

/// Welge tangent construction for 1-D two-phase displacement from connate
/// water: front saturation and dimensionless front speed (dx_D per pore
/// volume injected).
pub struct WelgeFront {
    pub sw_front: f64,
    pub speed_per_pvi: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn welge_front(
    mu_w: f64,
    mu_o: f64,
    swc: f64,
    sor: f64,
    nw: f64,
    no: f64,
    krw0: f64,
    kro0: f64,
) -> WelgeFront {
    let fw = |sw: f64| -> f64 {
        let s = (sw - swc) / (1.0 - swc - sor);
        let lw = krw0 * s.powf(nw) / mu_w;
        let lo = kro0 * (1.0 - s).powf(no) / mu_o;
        lw / (lw + lo)
    };
    // tangent from (swc, 0): maximize fw(sw) / (sw - swc)
    let n = 200_000;
    let mut best_sw = swc;
    let mut best_slope = 0.0;
    for i in 1..=n {
        let sw = swc + (1.0 - swc - sor) * i as f64 / n as f64;
        let slope = fw(sw) / (sw - swc);
        if slope > best_slope {
            best_slope = slope;
            best_sw = sw;
        }
    }
    WelgeFront {
        sw_front: best_sw,
        speed_per_pvi: best_slope,
    }
}

/// Location (m, from the inlet face) where a monotone-decreasing
/// saturation profile crosses `sw_front`, linearly interpolated between
/// cell centers.
pub fn front_position(profile: &[f64], sw_front: f64, dx: f64) -> f64 {
    let center = |i: usize| (i as f64 + 0.5) * dx;
    if profile[0] <= sw_front {
        return 0.0;
    }
    for i in 1..profile.len() {
        if profile[i] <= sw_front {
            let (a, b) = (profile[i - 1], profile[i]);
            let frac = (a - sw_front) / (a - b);
            return center(i - 1) + frac * dx;
        }
    }
    profile.len() as f64 * dx
}

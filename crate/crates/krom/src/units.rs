//! Fixed unit-conversion constants. Everything internal is SI
//! (meters, pascals, cubic meters per second, seconds).

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const FT_TO_M: f64 = 0.3048;
pub const PSI_TO_PA: f64 = 6_894.757;
pub const STB_PER_DAY_TO_M3_PER_S: f64 = 1.8401e-6;

/// Millidarcy in square meters, handy for readable permeability configs.
pub const MDARCY_TO_M2: f64 = 9.869_233e-16;

pub fn days_to_seconds(days: f64) -> f64 {
    days * SECONDS_PER_DAY
}

pub fn m3_per_day_to_m3_per_s(q: f64) -> f64 {
    q / SECONDS_PER_DAY
}

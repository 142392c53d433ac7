//! Degree-valued phase helpers shared by the modulator, demodulator and the
//! phase statistics.

/// Wraps an angle in degrees into the half-open interval (-180, 180].
pub fn wrap_deg(x: f64) -> f64 {
    let r = x.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Magnitude of the shortest signed rotation from `b` to `a`, in [0, 180].
pub fn angular_distance_deg(a: f64, b: f64) -> f64 {
    wrap_deg(a - b).abs()
}

pub fn db_to_linear_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_power_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear_power(dbm)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_power_to_db(w / 1e-3)
}

//! Lower bound on the probability that a sector-constrained object is
//! determined by one coded pattern.

/// `1 - n |(beta + alpha) / 2|^floor(S/2)` for an object with `n` pixels and
/// `S` pixels in its support. The value is not clamped and may be negative.
pub fn prob_lower_bound(n: u64, s: u64, alpha: f64, beta: f64) -> f64 {
    let base = ((beta + alpha) / 2.0).abs();
    let exponent = s / 2;
    let power = match i32::try_from(exponent) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(exponent as f64),
    };
    1.0 - n as f64 * power
}

//! Probabilists' Hermite polynomials He_k by three-term recurrence.

use crate::error::{Error, Result};

/// Highest order supported. Beyond this the expansion coefficients grow
/// faster than the factorial damping can tame in f64.
pub const MAX_HERMITE_ORDER: usize = 24;

/// He_k(z).
pub fn hermite(k: usize, z: f64) -> Result<f64> {
    if k > MAX_HERMITE_ORDER {
        return Err(Error::OrderOverflow { order: k, max: MAX_HERMITE_ORDER });
    }
    let mut prev = 1.0;
    if k == 0 {
        return Ok(prev);
    }
    let mut cur = z;
    for j in 1..k {
        let next = z * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Fill `out[k] = He_k(z)` for k = 0..out.len().
pub fn hermite_upto(z: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = z;
    }
    for k in 2..out.len() {
        out[k] = z * out[k - 1] - (k - 1) as f64 * out[k - 2];
    }
}

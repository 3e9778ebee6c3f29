//! Hermite expansion coefficients I(k) of the summand transform, with a
//! process-wide cache keyed by degrees, sidedness and quadrature settings.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::numkernels::{
    gamma_p_inv, hermite_upto, integrate_gauss_weight_vec, integrate_gauss_weight_with, norm_cdf, QuadConfig,
    MAX_HERMITE_ORDER,
};
use crate::stat::Side;

/// g(z) = F⁻¹_d(F(z)) where F is the null CDF of the input p-value's
/// underlying z-score: Φ for one-sided, the folded normal for two-sided.
pub fn summand_of_z(d: f64, side: Side, z: f64) -> f64 {
    let (p, q) = match side {
        Side::OneSided => (norm_cdf(z), norm_cdf(-z)),
        Side::TwoSided => {
            let a = z.abs() * FRAC_1_SQRT_2;
            (libm::erf(a), libm::erfc(a))
        }
    };
    2.0 * gamma_p_inv(0.5 * d, p, q)
}

/// I(0..=kstar) for one degrees-of-freedom value. I(0) is the mean d.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteCoeffTable {
    pub d: f64,
    pub side: Side,
    pub kstar: usize,
    pub coeffs: Vec<f64>,
}

impl HermiteCoeffTable {
    pub fn get(&self, k: usize) -> f64 {
        self.coeffs[k]
    }
}

type Key = (u64, Side, u64, u64);

fn cache() -> &'static RwLock<HashMap<Key, Arc<Vec<f64>>>> {
    static C: OnceLock<RwLock<HashMap<Key, Arc<Vec<f64>>>>> = OnceLock::new();
    C.get_or_init(|| RwLock::new(HashMap::new()))
}

fn pair_cache() -> &'static RwLock<HashMap<(u64, u64, Side, u64), f64>> {
    static C: OnceLock<RwLock<HashMap<(u64, u64, Side, u64), f64>>> = OnceLock::new();
    C.get_or_init(|| RwLock::new(HashMap::new()))
}

/// All coefficients up to the maximum supported order, computed in one
/// quadrature pass so that the value of I(k) never depends on the kstar
/// a caller happens to ask for first.
fn full_row(d: f64, side: Side, cfg: &QuadConfig) -> Result<Arc<Vec<f64>>> {
    let key = (d.to_bits(), side, cfg.tol.to_bits(), cfg.half_width.to_bits());
    if let Some(v) = cache().read().expect("coefficient cache poisoned").get(&key) {
        return Ok(v.clone());
    }
    let m = MAX_HERMITE_ORDER + 1;
    let mut he = vec![0.0; m];
    let est = integrate_gauss_weight_vec(
        |z, out| {
            let g = summand_of_z(d, side, z);
            hermite_upto(z, &mut he);
            for k in 0..m {
                out[k] = g * he[k];
            }
        },
        m,
        cfg,
    )?;
    let mut row: Vec<f64> = est.iter().map(|e| e.value).collect();
    if side == Side::TwoSided {
        for k in (1..m).step_by(2) {
            row[k] = 0.0;
        }
    }
    if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
        return Err(Error::Quadrature { value: *bad, achieved: f64::INFINITY });
    }
    let row = Arc::new(row);
    cache().write().expect("coefficient cache poisoned").insert(key, row.clone());
    Ok(row)
}

/// Coefficient table for orders 0..=kstar.
pub fn coeff_table(d: f64, side: Side, kstar: usize, cfg: &QuadConfig) -> Result<HermiteCoeffTable> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("degrees of freedom must be positive, got {d}")));
    }
    if kstar > MAX_HERMITE_ORDER {
        return Err(Error::OrderOverflow { order: kstar, max: MAX_HERMITE_ORDER });
    }
    let row = full_row(d, side, cfg)?;
    Ok(HermiteCoeffTable { d, side, kstar, coeffs: row[..=kstar].to_vec() })
}

/// I(k) = ∫ g(z) He_k(z) φ(z) dz.
pub fn hermite_coeff(d: f64, k: usize, side: Side, cfg: &QuadConfig) -> Result<f64> {
    if side == Side::TwoSided && k % 2 == 1 {
        if !(d > 0.0) {
            return Err(Error::Domain(format!("degrees of freedom must be positive, got {d}")));
        }
        return Ok(0.0);
    }
    Ok(coeff_table(d, side, k, cfg)?.coeffs[k])
}

/// E[g_a(Z) g_b(Z)] − d_a d_b: the covariance of two summands built from the
/// same z-score. Computed directly since the Hermite series converges slowly
/// at correlation one.
pub fn same_input_cov(da: f64, db: f64, side: Side, cfg: &QuadConfig) -> Result<f64> {
    if da == db {
        return Ok(2.0 * da);
    }
    let (lo, hi) = if da < db { (da, db) } else { (db, da) };
    let key = (lo.to_bits(), hi.to_bits(), side, cfg.tol.to_bits());
    if let Some(v) = pair_cache().read().expect("pair cache poisoned").get(&key) {
        return Ok(*v);
    }
    let e = integrate_gauss_weight_with(
        |z| summand_of_z(lo, side, z) * summand_of_z(hi, side, z),
        &QuadConfig { tol: cfg.tol * (lo * hi).max(1.0), ..*cfg },
    )?;
    let v = e.value - lo * hi;
    pair_cache().write().expect("pair cache poisoned").insert(key, v);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn summand_mean_is_degrees() {
        for side in [Side::OneSided, Side::TwoSided] {
            for d in [0.5, 1.0, 2.0, 3.7] {
                let t = coeff_table(d, side, 2, &cfg()).unwrap();
                assert!((t.get(0) - d).abs() < 1e-9, "d={d} side={side:?} I0={}", t.get(0));
            }
        }
    }

    #[test]
    fn two_sided_d1_is_z_squared() {
        // g(z) = z², so I(2) = E[z²(z²−1)] = 2 and I(4) = E[z² He_4] = 0.
        let t = coeff_table(1.0, Side::TwoSided, 4, &cfg()).unwrap();
        assert!((t.get(2) - 2.0).abs() < 1e-8);
        assert!(t.get(4).abs() < 1e-8);
        assert_eq!(t.get(1), 0.0);
        assert_eq!(t.get(3), 0.0);
    }

    #[test]
    fn one_sided_d2_reference() {
        // Independent scipy quadrature of F⁻¹_2(Φ(z)) He_k(z) φ(z).
        let want = [1.806394571137251, 1.191271193694716, 0.40054164399334435];
        for (k, w) in want.iter().enumerate() {
            let v = hermite_coeff(2.0, k + 1, Side::OneSided, &cfg()).unwrap();
            assert!((v - w).abs() < 1e-8, "k={} got {v}", k + 1);
        }
    }

    #[test]
    fn two_sided_d2_reference() {
        let want = [
            (2, 2.795280984958839),
            (4, -1.1021752368387259),
            (6, 3.534330461765512),
            (8, -18.139881665389638),
            (10, 128.69614402522745),
        ];
        for (k, w) in want {
            let v = hermite_coeff(2.0, k, Side::TwoSided, &cfg()).unwrap();
            assert!((v - w).abs() < 1e-7 * w.abs().max(1.0), "k={k} got {v}");
        }
    }

    #[test]
    fn same_input_cov_diagonal() {
        assert_eq!(same_input_cov(3.0, 3.0, Side::OneSided, &cfg()).unwrap(), 6.0);
        // Symmetric in its arguments and bounded by Cauchy–Schwarz.
        let a = same_input_cov(1.0, 2.0, Side::TwoSided, &cfg()).unwrap();
        let b = same_input_cov(2.0, 1.0, Side::TwoSided, &cfg()).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0 && a <= (2.0f64 * 4.0).sqrt());
    }
}

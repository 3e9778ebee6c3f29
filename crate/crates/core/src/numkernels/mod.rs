//! Scalar special functions, Hermite polynomials and φ-weighted quadrature.

pub mod gamma;
pub mod hermite;
pub mod normal;
pub mod quadrature;

pub use gamma::{chisq_cdf, chisq_inv, chisq_inv_upper, chisq_sf, gamma_cdf, gamma_p, gamma_p_inv, gamma_q, ln_gamma};
pub use hermite::{hermite, hermite_upto, MAX_HERMITE_ORDER};
pub use normal::{norm_cdf, norm_pdf, norm_quantile, norm_quantile_upper, norm_sf, norm_two_sided};
pub use quadrature::{
    integrate_gauss_weight, integrate_gauss_weight_vec, integrate_gauss_weight_with, integrate_interval, QuadConfig, QuadEstimate,
    QuadratureRule,
};

/// Smallest probability passed to an inverse CDF.
pub const PROB_FLOOR: f64 = 1e-300;
/// Largest probability passed to an inverse CDF.
pub const PROB_CEIL: f64 = 1.0 - 1e-16;

/// Clamp into [PROB_FLOOR, PROB_CEIL]; the flag reports whether clamping happened.
#[inline]
pub fn clamp_probability(p: f64) -> (f64, bool) {
    if p < PROB_FLOOR {
        (PROB_FLOOR, true)
    } else if p > PROB_CEIL {
        (PROB_CEIL, true)
    } else {
        (p, false)
    }
}

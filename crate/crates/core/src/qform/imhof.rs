//! Imhof's inversion formula for P(Σ λ_j χ²₁ > x), used when the Davies
//! routine cannot certify its bound.

use std::f64::consts::PI;

use crate::numkernels::integrate_interval;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImhofResult {
    pub sf: f64,
    /// Quadrature error estimate plus the truncation bound.
    pub error_bound: f64,
}

/// Upper tail of a positive-weight χ²₁ mixture.
pub fn imhof_sf(lambdas: &[f64], x: f64, tol: f64) -> ImhofResult {
    let r = lambdas.len() as f64;
    let integrand = |u: f64| {
        if u == 0.0 {
            return 0.5 * (lambdas.iter().sum::<f64>() - x);
        }
        let mut theta = -0.5 * x * u;
        let mut log_rho = 0.0;
        for &l in lambdas {
            theta += 0.5 * (l * u).atan();
            log_rho += 0.25 * (l * l * u * u).ln_1p();
        }
        theta.sin() / (u * log_rho.exp())
    };
    // |tail| ≤ 2 / (π r U^{r/2} Π λ^{1/2}); choose U so this is tol/2.
    let log_prod: f64 = lambdas.iter().map(|l| 0.5 * l.ln()).sum();
    let log_u = (2.0 / r) * ((4.0 / (PI * r * tol)).ln() - log_prod);
    let upper = log_u.exp().min(1e6);
    let trunc = 2.0 / (PI * r * upper.powf(0.5 * r) * log_prod.exp());

    // Integrate period by period so the adaptive rule sees few oscillations.
    let period = 2.0 * PI / (0.5 * x.max(lambdas.iter().sum::<f64>())).max(1e-3);
    let mut total = 0.0;
    let mut err = 0.0;
    let mut a = 0.0;
    while a < upper {
        let b = (a + period).min(upper);
        match integrate_interval(integrand, a, b, 1e-3 * tol, 200) {
            Ok(e) => {
                total += e.value;
                err += e.abs_err;
            }
            Err(crate::Error::Quadrature { value, achieved }) => {
                total += value;
                err += achieved;
            }
            Err(_) => unreachable!("integrate_interval only fails with a quadrature error"),
        }
        a = b;
    }
    ImhofResult { sf: (0.5 + total / PI).clamp(0.0, 1.0), error_bound: err / PI + trunc }
}

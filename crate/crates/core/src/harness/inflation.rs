use crate::error::{Error, Result};
use crate::numkernels::{chisq_inv_upper, PROB_FLOOR};

use super::survival::quantile_sorted;

/// λ(p) = F₁⁻¹(1 − pval_p) / F₁⁻¹(1 − p), where pval_p is the type-7
/// p-quantile of the observed p-values and F₁ the χ²₁ CDF.
pub fn inflation_factor(pvalues: &[f64], p_grid: &[f64]) -> Result<Vec<f64>> {
    if pvalues.is_empty() {
        return Err(Error::InvalidInput("no p-values given".into()));
    }
    if let Some(v) = pvalues.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(Error::Domain(format!("p-value {v} outside [0, 1]")));
    }
    if let Some(p) = p_grid.iter().find(|p| !(**p > 0.0 && **p <= 0.5)) {
        return Err(Error::Domain(format!("grid point {p} outside (0, 0.5]")));
    }
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    p_grid
        .iter()
        .map(|&p| {
            let obs = quantile_sorted(&sorted, p);
            let num = if obs >= 1.0 { 0.0 } else { chisq_inv_upper(obs.max(PROB_FLOOR), 1.0)? };
            Ok(num / chisq_inv_upper(p, 1.0)?)
        })
        .collect()
}

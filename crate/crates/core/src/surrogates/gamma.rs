//! Gamma surrogates fitted by two moments (GB) or by the skewness to excess
//! kurtosis ratio (MR), evaluated in the location-scale standardized form.

use serde::{Deserialize, Serialize};

use super::moments::MomentSummary;
use crate::error::{Error, Result};
use crate::numkernels::gamma_q;

/// Shape below which the moment ratio counts as degenerate.
pub const MR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSurrogate {
    pub shape: f64,
    /// Evaluated through (T − μ)/σ · √a + a rather than with a fitted scale.
    pub standardized: bool,
}

/// Shape μ²/σ².
pub fn fit_gb(m: &MomentSummary) -> Result<GammaSurrogate> {
    if !(m.mu > 0.0) {
        return Err(Error::Domain(format!("two-moment fit needs a positive mean, got {}", m.mu)));
    }
    Ok(GammaSurrogate { shape: m.mu * m.mu / m.var, standardized: true })
}

/// Shape 9γ²/(κ − 3)², the gamma whose skewness/excess-kurtosis ratio matches.
pub fn fit_mr(m: &MomentSummary) -> Result<GammaSurrogate> {
    let (skew, exkurt) = m.require_higher()?;
    if !(exkurt > MR_EPS) || !(skew > 0.0) {
        return Err(Error::MrDegenerate { skew, exkurt });
    }
    Ok(GammaSurrogate { shape: 9.0 * skew * skew / (exkurt * exkurt), standardized: true })
}

/// Survival probability and whether the standardized argument fell outside
/// the gamma support (in which case p = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaTail {
    pub pvalue: f64,
    pub support_clamped: bool,
}

/// P(G > (t − μ)/σ · √a + a) with G ~ Gamma(a, 1).
pub fn pvalue_gamma(s: &GammaSurrogate, m: &MomentSummary, t_obs: f64) -> GammaTail {
    let a = s.shape;
    let x = (t_obs - m.mu) / m.sd() * a.sqrt() + a;
    if !(x > 0.0) {
        return GammaTail { pvalue: 1.0, support_clamped: true };
    }
    GammaTail { pvalue: gamma_q(a, x), support_clamped: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::MomentSource;

    #[test]
    fn gb_examples() {
        let m = MomentSummary::two(20.0, 40.0, MomentSource::Analytic).unwrap();
        assert_eq!(fit_gb(&m).unwrap().shape, 10.0);
        let m = MomentSummary::two(7.0, 7.0, MomentSource::Analytic).unwrap();
        assert_eq!(fit_gb(&m).unwrap().shape, 7.0);
        let m = MomentSummary::two(20.0, 58.6, MomentSource::Analytic).unwrap();
        assert!((fit_gb(&m).unwrap().shape - 6.826).abs() < 1e-3);
        let m = MomentSummary::two(-1.0, 1.0, MomentSource::Analytic).unwrap();
        assert!(fit_gb(&m).is_err());
    }

    #[test]
    fn mr_examples() {
        assert!((fit_mr(&MomentSummary::chisq(20.0, 1.0)).unwrap().shape - 10.0).abs() < 1e-12);
        for k in [1.0, 3.0, 17.0] {
            assert!((fit_mr(&MomentSummary::chisq(k, 2.5)).unwrap().shape - k / 2.0).abs() < 1e-12);
        }
        let flat = MomentSummary::full(1.0, 1.0, 0.5, 0.0, MomentSource::Supplied).unwrap();
        assert!(matches!(fit_mr(&flat), Err(Error::MrDegenerate { .. })));
        let neg = MomentSummary::full(1.0, 1.0, -0.5, 1.0, MomentSource::Supplied).unwrap();
        assert!(matches!(fit_mr(&neg), Err(Error::MrDegenerate { .. })));
        assert!(fit_mr(&MomentSummary::two(1.0, 1.0, MomentSource::Supplied).unwrap()).is_err());
    }

    #[test]
    fn mr_is_location_scale_invariant() {
        let m = MomentSummary::full(13.0, 30.0, 0.8, 1.1, MomentSource::Empirical).unwrap();
        assert_eq!(fit_mr(&m).unwrap(), fit_mr(&m.affine(-4.0, 3.5)).unwrap());
    }

    #[test]
    fn gamma_pvalue_examples() {
        let m = MomentSummary::chisq(20.0, 1.0);
        let s = fit_gb(&m).unwrap();
        // Upper tail at the mean: scipy.special.gammaincc(10, 10). The CDF there is 0.542.
        assert!((pvalue_gamma(&s, &m, 20.0).pvalue - 0.4579297144718523).abs() < 1e-12);
        // scipy.stats.chi2.isf(0.05, 20) = 31.41043284423092
        assert!((pvalue_gamma(&s, &m, 31.41043284423092).pvalue - 0.05).abs() < 1e-12);
        assert!((pvalue_gamma(&s, &m, 31.410).pvalue - 0.05).abs() < 1e-4);
        let tail = pvalue_gamma(&s, &m, 0.0);
        assert_eq!(tail.pvalue, 1.0);
        assert!(tail.support_clamped);
    }
}

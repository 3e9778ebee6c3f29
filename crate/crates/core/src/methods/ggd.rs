use super::{check_t, full_moments, moment_diagnostics, two_moments, Normalized, NullSetting, PValueMethod, PreparedPValue};
use crate::diagnostics::{Diagnostics, PValueResult};
use crate::error::Result;
use crate::surrogates::{fit_ggd, pvalue_ggd, GgdSurrogate, GgdVariant, MomentSummary};

/// Generalized gamma surrogate fitted by one of the moment systems.
pub struct GgdMethod(pub GgdVariant);

struct PreparedGgd {
    name: &'static str,
    scale: f64,
    moments: MomentSummary,
    surrogate: GgdSurrogate,
    base: Diagnostics,
}

impl PreparedPValue for PreparedGgd {
    fn method(&self) -> &str {
        self.name
    }

    fn pvalue(&self, t: f64) -> Result<PValueResult> {
        check_t(t)?;
        let (p, clamped) = pvalue_ggd(&self.surrogate, t / self.scale);
        let mut d = self.base.clone();
        d.support_clamped = clamped;
        Ok(PValueResult::new(p, self.name, d))
    }

    fn moments(&self) -> Option<MomentSummary> {
        Some(self.moments.affine(0.0, self.scale))
    }
}

impl PValueMethod for GgdMethod {
    fn name(&self) -> &'static str {
        self.0.name()
    }
    fn description(&self) -> &'static str {
        match self.0 {
            GgdVariant::M123 => "generalized gamma matching the first three raw moments",
            GgdVariant::M234 => "generalized gamma matching variance, skewness and kurtosis, shifted to the mean",
            GgdVariant::MR => "generalized gamma matching mean, variance and the skewness/excess-kurtosis ratio",
        }
    }
    fn prepare(&self, null: &NullSetting) -> Result<Box<dyn PreparedPValue>> {
        let nd = Normalized::of(&null.def);
        let (exact, last) = two_moments(&nd.def, &null.sigma, &null.series)?;
        let m = full_moments(null, &nd.def, &exact)?;
        let fit = fit_ggd(&m, self.0)?;
        let mut base = Diagnostics {
            kstar: Some(null.series.kstar),
            series_last_term: Some(last),
            weight_scale: Some(nd.scale),
            ggd: Some(fit.surrogate.params()),
            solver_residual: Some(fit.residual),
            solver_iterations: Some(fit.iterations),
            ..Default::default()
        };
        moment_diagnostics(&mut base, &m);
        Ok(Box::new(PreparedGgd { name: self.0.name(), scale: nd.scale, moments: m, surrogate: fit.surrogate, base }))
    }
}

use super::{check_t, full_moments, moment_diagnostics, two_moments, Normalized, NullSetting, PValueMethod, PreparedPValue};
use crate::diagnostics::{Diagnostics, PValueResult};
use crate::error::{Error, Result};
use crate::qform::{check_q_inputs, hybrid_shape, prepare_spec};
use crate::surrogates::{fit_gb, fit_mr, pvalue_gamma, GammaSurrogate, MomentSummary};

/// Gamma surrogate in standardized form, shared by GB, MR and HYB.
struct PreparedGamma {
    name: &'static str,
    scale: f64,
    moments: MomentSummary,
    surrogate: GammaSurrogate,
    base: Diagnostics,
}

impl PreparedPValue for PreparedGamma {
    fn method(&self) -> &str {
        self.name
    }

    fn pvalue(&self, t: f64) -> Result<PValueResult> {
        check_t(t)?;
        let tail = pvalue_gamma(&self.surrogate, &self.moments, t / self.scale);
        let mut d = self.base.clone();
        d.support_clamped = tail.support_clamped;
        Ok(PValueResult::new(tail.pvalue, self.name, d))
    }

    fn moments(&self) -> Option<MomentSummary> {
        Some(self.moments.affine(0.0, self.scale))
    }
}

fn base_diagnostics(null: &NullSetting, scale: f64, last_term: f64) -> Diagnostics {
    Diagnostics {
        kstar: Some(null.series.kstar),
        series_last_term: Some(last_term),
        weight_scale: Some(scale),
        ..Default::default()
    }
}

/// Two-moment gamma matching.
pub struct GbMethod;

impl PValueMethod for GbMethod {
    fn name(&self) -> &'static str {
        "gb"
    }
    fn description(&self) -> &'static str {
        "gamma surrogate matching mean and variance"
    }
    fn prepare(&self, null: &NullSetting) -> Result<Box<dyn PreparedPValue>> {
        let nd = Normalized::of(&null.def);
        let (m, last) = two_moments(&nd.def, &null.sigma, &null.series)?;
        let surrogate = fit_gb(&m)?;
        let mut base = base_diagnostics(null, nd.scale, last);
        moment_diagnostics(&mut base, &m);
        base.shape = Some(surrogate.shape);
        Ok(Box::new(PreparedGamma { name: "gb", scale: nd.scale, moments: m, surrogate, base }))
    }
}

/// Gamma shape from the skewness to excess kurtosis ratio, standardized by
/// the exact mean and variance. Falls back to GB when the ratio is degenerate.
pub struct MrMethod;

impl PValueMethod for MrMethod {
    fn name(&self) -> &'static str {
        "mr"
    }
    fn description(&self) -> &'static str {
        "gamma surrogate matching the skewness/excess-kurtosis ratio"
    }
    fn prepare(&self, null: &NullSetting) -> Result<Box<dyn PreparedPValue>> {
        let nd = Normalized::of(&null.def);
        let (exact, last) = two_moments(&nd.def, &null.sigma, &null.series)?;
        let m = full_moments(null, &nd.def, &exact)?;
        let mut base = base_diagnostics(null, nd.scale, last);
        moment_diagnostics(&mut base, &m);
        let surrogate = match fit_mr(&m) {
            Ok(s) => s,
            Err(Error::MrDegenerate { skew, exkurt }) => {
                base.fallback_to_gb = true;
                base.warnings.push(format!("moment ratio degenerate (skew {skew}, excess kurtosis {exkurt}); used two-moment fit"));
                fit_gb(&m)?
            }
            Err(e) => return Err(e),
        };
        base.shape = Some(surrogate.shape);
        Ok(Box::new(PreparedGamma { name: "mr", scale: nd.scale, moments: m, surrogate, base }))
    }
}

/// Moment-ratio gamma shape taken from the quadratic-form spectrum, with the
/// exact mean and variance. Fully analytic.
pub struct HybMethod;

impl PValueMethod for HybMethod {
    fn name(&self) -> &'static str {
        "hyb"
    }
    fn description(&self) -> &'static str {
        "gamma surrogate with shape from the quadratic-form cumulants"
    }
    fn prepare(&self, null: &NullSetting) -> Result<Box<dyn PreparedPValue>> {
        check_q_inputs(&null.def, "hyb")?;
        let nd = Normalized::of(&null.def);
        let (m, last) = two_moments(&nd.def, &null.sigma, &null.series)?;
        let (sc, spec) = prepare_spec(&nd.def, &null.sigma, &null.series)?;
        let surrogate = GammaSurrogate { shape: hybrid_shape(&spec)?, standardized: true };
        let mut base = base_diagnostics(null, nd.scale, last);
        moment_diagnostics(&mut base, &m);
        base.shape = Some(surrogate.shape);
        base.clamp_count = Some(sc.clamp_count);
        base.repair_applied = sc.repair_applied;
        if sc.repair_applied {
            base.repair_distance = Some(sc.repair_distance);
        }
        base.trace_deviation = Some(spec.trace - crate::dependence::mean_t(&nd.def));
        base.n_eigenvalues = Some(spec.lambdas.len());
        Ok(Box::new(PreparedGamma { name: "hyb", scale: nd.scale, moments: m, surrogate, base }))
    }
}

use super::{check_t, Normalized, NullSetting, PValueMethod, PreparedPValue};
use crate::dependence::mean_t;
use crate::diagnostics::{Diagnostics, PValueResult};
use crate::error::Result;
use crate::qform::{check_q_inputs, hybrid_moments, prepare_spec, qform_cdf, QuadFormSpec};
use crate::surrogates::MomentSummary;

/// Survival function of the quadratic-form surrogate Q.
pub struct QMethod;

struct PreparedQ {
    scale: f64,
    spec: QuadFormSpec,
    acc: f64,
    base: Diagnostics,
}

impl PreparedQ {
    pub fn spec(&self) -> &QuadFormSpec {
        &self.spec
    }
}

impl PreparedPValue for PreparedQ {
    fn method(&self) -> &str {
        "q"
    }

    fn pvalue(&self, t: f64) -> Result<PValueResult> {
        check_t(t)?;
        let c = qform_cdf(self.spec(), t / self.scale, self.acc)?;
        let mut d = self.base.clone();
        d.cdf_error_bound = Some(c.error_bound);
        if c.fault != 0 {
            d.cdf_fault = Some(c.fault);
        }
        d.cdf_fallback = c.fallback;
        Ok(PValueResult::new(c.sf(), "q", d))
    }

    fn moments(&self) -> Option<MomentSummary> {
        hybrid_moments(&self.spec).ok().map(|m| m.affine(0.0, self.scale))
    }
}

impl PValueMethod for QMethod {
    fn name(&self) -> &'static str {
        "q"
    }
    fn description(&self) -> &'static str {
        "weighted chi-square quadratic form inverted by characteristic function"
    }
    fn prepare(&self, null: &NullSetting) -> Result<Box<dyn PreparedPValue>> {
        check_q_inputs(&null.def, "q")?;
        let nd = Normalized::of(&null.def);
        let (sc, spec) = prepare_spec(&nd.def, &null.sigma, &null.series)?;
        let base = Diagnostics {
            kstar: Some(null.series.kstar),
            weight_scale: Some(nd.scale),
            clamp_count: Some(sc.clamp_count),
            repair_applied: sc.repair_applied,
            repair_distance: sc.repair_applied.then_some(sc.repair_distance),
            trace_deviation: Some(spec.trace - mean_t(&nd.def)),
            dropped_eigen_mass: Some(spec.dropped_mass),
            n_eigenvalues: Some(spec.lambdas.len()),
            ..Default::default()
        };
        Ok(Box::new(PreparedQ { scale: nd.scale, spec, acc: null.cdf_acc, base }))
    }
}

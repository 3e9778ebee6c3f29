//! Omnibus tests over several GFisher statistics on the same inputs: the
//! minimum p-value (through the joint normal limit of the statistics) and
//! the Cauchy combination.

pub mod mvn;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use mvn::{mvn_upper_complement, MvnConfig, MvnTail};

use crate::dependence::{cross_cov, mean_t, SeriesConfig};
use crate::diagnostics::{Diagnostics, PValueResult};
use crate::error::{Error, Result};
use crate::harness::ReplicateTest;
use crate::linalg::CorrMatrix;
use crate::methods::{MethodRegistry, MomentStrategy, NullSetting, PreparedPValue};
use crate::numkernels::{clamp_probability, norm_quantile_upper};
use crate::qform::DEFAULT_CDF_ACC;
use crate::stat::{evaluate_detailed, to_pvalues, GFisherDef, InputPanel, Side};

/// Default component method: MR for one-sided inputs, HYB for two-sided
/// inputs with integer degrees, MR otherwise.
pub fn default_method(def: &GFisherDef) -> &'static str {
    if def.side == Side::TwoSided && def.has_integer_degrees() {
        "hyb"
    } else {
        "mr"
    }
}

#[derive(Debug, Clone)]
pub struct OmnibusOptions {
    /// One method per statistic; `None` picks the default per statistic.
    pub methods: Option<Vec<String>>,
    pub series: SeriesConfig,
    pub moments: MomentStrategy,
    pub cdf_acc: f64,
    pub mvn: MvnConfig,
}

impl Default for OmnibusOptions {
    fn default() -> Self {
        OmnibusOptions {
            methods: None,
            series: SeriesConfig::default(),
            moments: MomentStrategy::Auto,
            cdf_acc: DEFAULT_CDF_ACC,
            mvn: MvnConfig::default(),
        }
    }
}

/// Statistics T(1..m), their prepared p-value methods, and the joint
/// covariance Ω with its correlation R.
pub struct OmnibusPanel {
    pub defs: Vec<GFisherDef>,
    pub methods: Vec<String>,
    pub cross: DMatrix<f64>,
    pub means: Vec<f64>,
    pub corr: DMatrix<f64>,
    pub mvn: MvnConfig,
    prepared: Vec<Box<dyn PreparedPValue>>,
}

impl OmnibusPanel {
    pub fn new(defs: Vec<GFisherDef>, sigma: &CorrMatrix, opts: &OmnibusOptions) -> Result<Self> {
        if defs.is_empty() {
            return Err(Error::InvalidInput("omnibus test needs at least one statistic".into()));
        }
        let n = defs[0].n();
        let side = defs[0].side;
        for d in &defs {
            d.validate()?;
            if d.n() != n {
                return Err(Error::Dimension("omnibus statistics must share the number of inputs".into()));
            }
            if d.side != side {
                return Err(Error::InvalidInput("omnibus statistics must share sidedness".into()));
            }
        }
        let methods: Vec<String> = match &opts.methods {
            Some(m) if m.len() == 1 => vec![m[0].clone(); defs.len()],
            Some(m) if m.len() == defs.len() => m.clone(),
            Some(m) => {
                return Err(Error::Dimension(format!("{} methods for {} statistics", m.len(), defs.len())));
            }
            None => defs.iter().map(|d| default_method(d).to_string()).collect(),
        };
        let reg = MethodRegistry::default();
        let prepared = defs
            .iter()
            .zip(&methods)
            .map(|(d, m)| {
                let null = NullSetting::new(d.clone(), sigma.clone())?
                    .with_series(opts.series)
                    .with_moments(opts.moments.clone())
                    .with_cdf_acc(opts.cdf_acc);
                reg.prepare(m, &null)
            })
            .collect::<Result<Vec<_>>>()?;
        let cross = cross_cov(&defs, sigma, &opts.series)?;
        let m = defs.len();
        for j in 0..m {
            if !(cross[(j, j)] > 0.0) {
                return Err(Error::NotPsd { min_eig: cross[(j, j)] });
            }
        }
        let corr = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                1.0
            } else {
                (cross[(i, j)] / (cross[(i, i)] * cross[(j, j)]).sqrt()).clamp(-1.0, 1.0)
            }
        });
        Ok(OmnibusPanel { means: defs.iter().map(mean_t).collect(), defs, methods, cross, corr, mvn: opts.mvn, prepared })
    }

    pub fn m(&self) -> usize {
        self.defs.len()
    }

    pub fn n(&self) -> usize {
        self.defs[0].n()
    }

    pub fn side(&self) -> Side {
        self.defs[0].side
    }

    pub fn prepared(&self) -> &[Box<dyn PreparedPValue>] {
        &self.prepared
    }
}

/// Statistics and component p-values for one input panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub statistics: Vec<f64>,
    pub results: Vec<PValueResult>,
}

impl Components {
    pub fn pvalues(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.pvalue).collect()
    }
}

/// P(j) for every statistic.
pub fn component_pvalues(panel: &OmnibusPanel, input: &InputPanel) -> Result<Components> {
    let p = to_pvalues(input, panel.side())?;
    let mut statistics = Vec::with_capacity(panel.m());
    let mut results = Vec::with_capacity(panel.m());
    for (def, prep) in panel.defs.iter().zip(&panel.prepared) {
        let (t, tr) = evaluate_detailed(def, &p)?;
        let mut r = prep.pvalue(t)?;
        if !tr.clamped.is_empty() {
            r.diagnostics.clamped_inputs = Some(tr.clamped.len());
        }
        statistics.push(t);
        results.push(r);
    }
    Ok(Components { statistics, results })
}

/// minP p-value at an observed minimum component p-value.
pub fn pvalue_minp_at(panel: &OmnibusPanel, minp: f64) -> Result<PValueResult> {
    if !(minp >= 0.0 && minp <= 1.0) {
        return Err(Error::Domain(format!("minimum p-value {minp} outside [0, 1]")));
    }
    let mut d = Diagnostics::default();
    if panel.m() == 1 {
        return Ok(PValueResult::new(minp, "minp", d));
    }
    if minp >= 1.0 {
        return Ok(PValueResult::new(1.0, "minp", d));
    }
    let (mc, clamped) = clamp_probability(minp);
    if clamped {
        d.clamped_inputs = Some(1);
    }
    let c = norm_quantile_upper(mc);
    let b = vec![c; panel.m()];
    let (tail, repaired) = mvn_upper_complement(&panel.corr, &b, &panel.mvn)?;
    d.repair_applied = repaired;
    d.mc_error = Some(tail.error);
    d.mc_points = Some(tail.points);
    if tail.error > panel.mvn.tol {
        d.warnings.push(format!("rectangle probability error {:.2e} above target {:.0e}", tail.error, panel.mvn.tol));
    }
    Ok(PValueResult::new(tail.tail, "minp", d))
}

pub fn pvalue_minp(panel: &OmnibusPanel, input: &InputPanel) -> Result<PValueResult> {
    let c = component_pvalues(panel, input)?;
    let minp = c.pvalues().into_iter().fold(1.0, f64::min);
    pvalue_minp_at(panel, minp)
}

/// cot(πP) = tan((1/2 − P)π), evaluated without cancellation near 0 and 1.
fn cauchy_score(p: f64) -> f64 {
    if p <= 0.5 {
        1.0 / (std::f64::consts::PI * p).tan()
    } else {
        -1.0 / (std::f64::consts::PI * (1.0 - p)).tan()
    }
}

/// Standard Cauchy survival 1/2 − atan(x)/π.
fn cauchy_sf(x: f64) -> f64 {
    if x > 0.0 {
        (1.0 / x).atan() / std::f64::consts::PI
    } else {
        0.5 - x.atan() / std::f64::consts::PI
    }
}

/// Cauchy combination statistic with the count of clamped inputs.
pub fn cc_statistic(ps: &[f64]) -> Result<(f64, usize)> {
    if ps.is_empty() {
        return Err(Error::InvalidInput("no component p-values".into()));
    }
    let mut clamped = 0;
    let mut s = 0.0;
    for &p in ps {
        if !(p >= 0.0 && p <= 1.0) {
            return Err(Error::Domain(format!("component p-value {p} outside [0, 1]")));
        }
        let (pc, was) = clamp_probability(p);
        clamped += was as usize;
        s += cauchy_score(pc);
    }
    Ok((s / ps.len() as f64, clamped))
}

pub fn pvalue_cc(ps: &[f64]) -> Result<PValueResult> {
    let (x, clamped) = cc_statistic(ps)?;
    let mut d = Diagnostics::default();
    if clamped > 0 {
        d.clamped_inputs = Some(clamped);
        d.warnings.push(format!("{clamped} component p-values clamped away from 0 or 1"));
    }
    Ok(PValueResult::new(cauchy_sf(x), "ccp", d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmnibusResult {
    pub statistics: Vec<f64>,
    pub components: Vec<PValueResult>,
    pub minp: PValueResult,
    pub cc: PValueResult,
}

pub fn omnibus(panel: &OmnibusPanel, input: &InputPanel) -> Result<OmnibusResult> {
    let c = component_pvalues(panel, input)?;
    let ps = c.pvalues();
    let minp = pvalue_minp_at(panel, ps.iter().cloned().fold(1.0, f64::min))?;
    let cc = pvalue_cc(&ps)?;
    Ok(OmnibusResult { statistics: c.statistics, components: c.results, minp, cc })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmnibusKind {
    MinP,
    Cc,
}

/// An omnibus test replayed on simulated z-vectors.
pub struct OmnibusReplicate {
    pub panel: OmnibusPanel,
    pub kind: OmnibusKind,
}

impl OmnibusReplicate {
    fn component(&self, z: &[f64], scratch: &mut Vec<f64>) {
        scratch.clear();
        for (def, prep) in self.panel.defs.iter().zip(&self.panel.prepared) {
            let t = def.statistic_from_z(z);
            scratch.push(prep.pvalue(t).map_or(f64::NAN, |r| r.pvalue));
        }
    }
}

impl ReplicateTest for OmnibusReplicate {
    fn name(&self) -> String {
        match self.kind {
            OmnibusKind::MinP => "minp".into(),
            OmnibusKind::Cc => "ccp".into(),
        }
    }
    fn n(&self) -> usize {
        self.panel.n()
    }
    fn side(&self) -> Side {
        self.panel.side()
    }
    fn statistic(&self, z: &[f64], scratch: &mut Vec<f64>) -> f64 {
        self.component(z, scratch);
        if scratch.iter().any(|p| p.is_nan()) {
            return f64::NAN;
        }
        match self.kind {
            OmnibusKind::MinP => {
                let m = scratch.iter().cloned().fold(1.0, f64::min);
                -clamp_probability(m).0.ln()
            }
            OmnibusKind::Cc => cc_statistic(scratch).map_or(f64::NAN, |s| s.0),
        }
    }
    fn pvalue(&self, stat: f64) -> Result<f64> {
        if stat.is_nan() {
            return Err(Error::InvalidInput("component p-value failed".into()));
        }
        match self.kind {
            OmnibusKind::MinP => Ok(pvalue_minp_at(&self.panel, (-stat).exp().min(1.0))?.pvalue),
            OmnibusKind::Cc => Ok(cauchy_sf(stat)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::{gen_structure, BlockLayout, StructureKind};

    #[test]
    fn cc_examples() {
        assert!((pvalue_cc(&[0.5]).unwrap().pvalue - 0.5).abs() < 1e-15);
        for q in [1e-12, 1e-5, 0.037, 0.3, 0.77, 0.999999] {
            assert!((pvalue_cc(&[q]).unwrap().pvalue - q).abs() < 1e-12 * q.max(1e-3), "{q}");
        }
        // Independent trig evaluation in Python: statistic 9.580944138866199.
        let (x, _) = cc_statistic(&[0.01, 0.5, 0.9]).unwrap();
        assert!((x - 9.580944138866199).abs() < 1e-9);
        assert!((pvalue_cc(&[0.01, 0.5, 0.9]).unwrap().pvalue - 0.033103366413410995).abs() < 1e-12);
        let r = pvalue_cc(&[0.0, 0.2]).unwrap();
        assert_eq!(r.diagnostics.clamped_inputs, Some(1));
    }

    fn panel_with_corr(r12: f64) -> OmnibusPanel {
        let defs = vec![GFisherDef::fisher(2, Side::TwoSided).unwrap(); 2];
        let mut p = OmnibusPanel::new(defs, &CorrMatrix::identity(2), &OmnibusOptions::default()).unwrap();
        p.corr = DMatrix::from_row_slice(2, 2, &[1.0, r12, r12, 1.0]);
        p
    }

    #[test]
    fn minp_closed_forms() {
        let p = panel_with_corr(0.0);
        let r = pvalue_minp_at(&p, 0.01).unwrap();
        assert!((r.pvalue - 0.0199).abs() < 2e-4, "{}", r.pvalue);
        let p = panel_with_corr(1.0);
        assert!((pvalue_minp_at(&p, 0.01).unwrap().pvalue - 0.01).abs() < 1e-9);
        let one = OmnibusPanel::new(vec![GFisherDef::fisher(3, Side::OneSided).unwrap()], &CorrMatrix::identity(3), &OmnibusOptions::default()).unwrap();
        assert_eq!(pvalue_minp_at(&one, 0.037).unwrap().pvalue, 0.037);
    }

    #[test]
    fn single_statistic_reduces_to_component() {
        let sigma = gen_structure(StructureKind::Equal, BlockLayout::III, 5, 0.3).unwrap().sigma;
        let panel = OmnibusPanel::new(vec![GFisherDef::fisher(5, Side::TwoSided).unwrap()], &sigma, &OmnibusOptions::default()).unwrap();
        let input = InputPanel::zscores(vec![1.1, -2.0, 0.3, 2.5, -0.7]);
        let r = omnibus(&panel, &input).unwrap();
        let c = r.components[0].pvalue;
        assert!((r.minp.pvalue - c).abs() < 1e-6);
        assert!((r.cc.pvalue - c).abs() < 1e-6);
    }

    #[test]
    fn repeated_defs_give_identical_components() {
        let sigma = CorrMatrix::exchangeable(4, 0.2).unwrap();
        let d = GFisherDef::uniform(4, 1.0, Side::OneSided).unwrap();
        let panel = OmnibusPanel::new(vec![d.clone(), d], &sigma, &OmnibusOptions::default()).unwrap();
        let c = component_pvalues(&panel, &InputPanel::zscores(vec![0.4, 1.9, -0.2, 1.0])).unwrap();
        assert_eq!(c.results[0].pvalue, c.results[1].pvalue);
        assert!((panel.corr[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minp_decreases_with_dependence() {
        let mut last = f64::INFINITY;
        for r in [0.0, 0.3, 0.6, 0.9, 0.99] {
            let p = pvalue_minp_at(&panel_with_corr(r), 0.02).unwrap().pvalue;
            assert!(p <= last + 1e-6, "{r}: {p} > {last}");
            last = p;
        }
    }
}

//! GFisher statistic definitions: input conversion, summand transform, evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernels::{chisq_inv_upper, clamp_probability, norm_sf, norm_two_sided};

/// Sidedness of the input p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "one", alias = "one-sided", alias = "OneSided")]
    OneSided,
    #[serde(rename = "two", alias = "two-sided", alias = "TwoSided")]
    TwoSided,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::OneSided => "one",
            Side::TwoSided => "two",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "one" | "one-sided" | "onesided" | "1" => Ok(Side::OneSided),
            "two" | "two-sided" | "twosided" | "2" => Ok(Side::TwoSided),
            _ => Err(Error::Parse(format!("unknown side {s:?}; expected one or two"))),
        }
    }
}

/// One GFisher statistic T = Σ w_i F⁻¹_{d_i}(1 − P_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GFisherDef {
    pub degrees: Vec<f64>,
    pub weights: Vec<f64>,
    pub side: Side,
}

impl GFisherDef {
    pub fn new(degrees: Vec<f64>, weights: Vec<f64>, side: Side) -> Result<Self> {
        let def = GFisherDef { degrees, weights, side };
        def.validate()?;
        Ok(def)
    }

    /// Equal degrees and unit weights over n inputs.
    pub fn uniform(n: usize, d: f64, side: Side) -> Result<Self> {
        Self::new(vec![d; n], vec![1.0; n], side)
    }

    /// Fisher's combination: d = 2, w = 1.
    pub fn fisher(n: usize, side: Side) -> Result<Self> {
        Self::uniform(n, 2.0, side)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degrees.len() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "{} degrees but {} weights",
                self.degrees.len(),
                self.weights.len()
            )));
        }
        if self.degrees.is_empty() {
            return Err(Error::InvalidInput("statistic needs at least one input".into()));
        }
        if let Some(d) = self.degrees.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::Domain(format!("degrees of freedom must be positive, got {d}")));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::Domain(format!("weights must be nonnegative, got {w}")));
        }
        if !self.weights.iter().any(|&w| w > 0.0) {
            return Err(Error::Domain("at least one weight must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Mean of the weights.
    pub fn weight_scale(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.n() as f64
    }

    /// Copy with weights rescaled to mean 1. P-values are unchanged by this.
    pub fn normalized(&self) -> GFisherDef {
        let s = self.weight_scale();
        GFisherDef {
            degrees: self.degrees.clone(),
            weights: self.weights.iter().map(|w| w / s).collect(),
            side: self.side,
        }
    }

    pub fn has_integer_degrees(&self) -> bool {
        self.degrees.iter().all(|d| d.fract() == 0.0)
    }

    /// Distinct degrees of freedom in first-seen order.
    pub fn distinct_degrees(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &d in &self.degrees {
            if !out.iter().any(|&x| x == d) {
                out.push(d);
            }
        }
        out
    }
}

/// What the input values are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    ZScores,
    PValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPanel {
    pub values: Vec<f64>,
    pub kind: InputKind,
}

impl InputPanel {
    pub fn zscores(values: Vec<f64>) -> Self {
        InputPanel { values, kind: InputKind::ZScores }
    }

    pub fn pvalues(values: Vec<f64>) -> Result<Self> {
        check_pvalues(&values)?;
        Ok(InputPanel { values, kind: InputKind::PValues })
    }
}

fn check_pvalues(p: &[f64]) -> Result<()> {
    if let Some(v) = p.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::Domain(format!("p-value {v} outside (0, 1]")));
    }
    Ok(())
}

/// Convert a panel to p-values; p-value panels pass through.
pub fn to_pvalues(panel: &InputPanel, side: Side) -> Result<Vec<f64>> {
    match panel.kind {
        InputKind::PValues => {
            check_pvalues(&panel.values)?;
            Ok(panel.values.clone())
        }
        InputKind::ZScores => panel
            .values
            .iter()
            .map(|&z| {
                if !z.is_finite() {
                    return Err(Error::Domain(format!("z-score {z} is not finite")));
                }
                Ok(match side {
                    Side::OneSided => norm_sf(z),
                    Side::TwoSided => norm_two_sided(z),
                })
            })
            .collect(),
    }
}

/// Transformed summands plus the indices whose p-value had to be clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    pub values: Vec<f64>,
    pub clamped: Vec<usize>,
}

/// T_i = F⁻¹_{d_i}(1 − P_i).
///
/// P_i = 1 maps to 0 exactly. P-values below the floor (including exact
/// zeros that underflowed upstream) are clamped and reported.
pub fn transform(def: &GFisherDef, pvalues: &[f64]) -> Result<Transformed> {
    if pvalues.len() != def.n() {
        return Err(Error::Dimension(format!("{} p-values for {} inputs", pvalues.len(), def.n())));
    }
    let mut values = Vec::with_capacity(def.n());
    let mut clamped = Vec::new();
    for (i, (&p, &d)) in pvalues.iter().zip(&def.degrees).enumerate() {
        if !(p >= 0.0 && p <= 1.0) {
            return Err(Error::Domain(format!("p-value {p} outside [0, 1]")));
        }
        if p == 1.0 {
            values.push(0.0);
            continue;
        }
        let (pc, was) = clamp_probability(p);
        if was {
            clamped.push(i);
        }
        values.push(chisq_inv_upper(pc, d)?);
    }
    Ok(Transformed { values, clamped })
}

/// T = Σ w_i T_i.
pub fn evaluate(def: &GFisherDef, pvalues: &[f64]) -> Result<f64> {
    Ok(evaluate_detailed(def, pvalues)?.0)
}

/// T together with the transform details.
pub fn evaluate_detailed(def: &GFisherDef, pvalues: &[f64]) -> Result<(f64, Transformed)> {
    let tr = transform(def, pvalues)?;
    let t = tr.values.iter().zip(&def.weights).map(|(t, w)| t * w).sum();
    Ok((t, tr))
}

/// One summand F⁻¹_d(1 − P) straight from its z-score, skipping the
/// quantile inversion where a closed form exists.
#[inline]
pub fn summand_from_z(d: f64, side: Side, z: f64) -> f64 {
    if d == 1.0 && side == Side::TwoSided {
        return z * z;
    }
    let p = match side {
        Side::OneSided => norm_sf(z),
        Side::TwoSided => norm_two_sided(z),
    };
    if p >= 1.0 {
        return 0.0;
    }
    let (p, _) = clamp_probability(p);
    if d == 2.0 {
        return -2.0 * p.ln();
    }
    chisq_inv_upper(p, d).unwrap_or(f64::NAN)
}

impl GFisherDef {
    /// T for a vector of finite z-scores. Used in simulation loops.
    pub fn statistic_from_z(&self, z: &[f64]) -> f64 {
        let mut t = 0.0;
        for i in 0..self.n() {
            let w = self.weights[i];
            if w != 0.0 {
                t += w * summand_from_z(self.degrees[i], self.side, z[i]);
            }
        }
        t
    }
}

/// T from z-scores, with sidedness taken from the definition.
pub fn evaluate_z(def: &GFisherDef, z: &[f64]) -> Result<f64> {
    let p = to_pvalues(&InputPanel::zscores(z.to_vec()), def.side)?;
    evaluate(def, &p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pvalue_conversion() {
        let z = InputPanel::zscores(vec![0.0, 1.959964]);
        let two = to_pvalues(&z, Side::TwoSided).unwrap();
        assert_eq!(two[0], 1.0);
        assert!((two[1] - 0.05).abs() < 1e-6);
        let one = to_pvalues(&z, Side::OneSided).unwrap();
        assert_eq!(one[0], 0.5);
        assert!(to_pvalues(&InputPanel::zscores(vec![f64::NAN]), Side::OneSided).is_err());
        assert!(InputPanel::pvalues(vec![0.0]).is_err());
    }

    #[test]
    fn transform_examples() {
        let def = GFisherDef::new(vec![2.0], vec![1.0], Side::OneSided).unwrap();
        let t = transform(&def, &[(-1.0f64).exp()]).unwrap();
        assert!((t.values[0] - 2.0).abs() < 1e-13);

        let def1 = GFisherDef::new(vec![1.0], vec![1.0], Side::TwoSided).unwrap();
        let t = evaluate_z(&def1, &[1.3]).unwrap();
        assert!((t - 1.69).abs() < 1e-9);

        let def3 = GFisherDef::new(vec![3.0], vec![1.0], Side::OneSided).unwrap();
        // scipy.stats.chi2.ppf(0.5, 3)
        assert!((transform(&def3, &[0.5]).unwrap().values[0] - 2.3659738843753377).abs() < 1e-4);
    }

    #[test]
    fn transform_clamps_zero() {
        let def = GFisherDef::fisher(2, Side::OneSided).unwrap();
        let t = transform(&def, &[0.0, 0.5]).unwrap();
        assert_eq!(t.clamped, vec![0]);
        assert!(t.values[0].is_finite());
    }

    #[test]
    fn evaluate_examples() {
        let def = GFisherDef::fisher(2, Side::OneSided).unwrap();
        assert_eq!(evaluate(&def, &[1.0, 1.0]).unwrap(), 0.0);
        let t = evaluate(&def, &[(-1.0f64).exp(), (-2.0f64).exp()]).unwrap();
        assert!((t - 6.0).abs() < 1e-12);
        assert!(evaluate(&def, &[0.5]).is_err());

        let def = GFisherDef::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], Side::OneSided).unwrap();
        // medians of chi2_1, chi2_2, chi2_3 from scipy.stats.chi2.ppf(0.5, d)
        let want = 0.454936423119572 + 2.0 * 1.3862943611198906 + 3.0 * 2.3659738843753377;
        assert!((evaluate(&def, &[0.5; 3]).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn fast_statistic_matches_general_path() {
        let z = [0.3, -1.7, 2.4, -0.01, 5.5, -9.0];
        for side in [Side::OneSided, Side::TwoSided] {
            let def = GFisherDef::new(vec![1.0, 2.0, 3.0, 0.5, 2.0, 1.0], vec![1.0, 0.5, 2.0, 1.0, 1.0, 3.0], side).unwrap();
            let a = def.statistic_from_z(&z);
            let b = evaluate_z(&def, &z).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{side:?} {a} {b}");
        }
    }

    #[test]
    fn definition_validation() {
        assert!(GFisherDef::new(vec![1.0], vec![1.0, 2.0], Side::OneSided).is_err());
        assert!(GFisherDef::new(vec![0.0], vec![1.0], Side::OneSided).is_err());
        assert!(GFisherDef::new(vec![1.0], vec![-1.0], Side::OneSided).is_err());
        assert!(GFisherDef::new(vec![1.0, 1.0], vec![0.0, 0.0], Side::OneSided).is_err());
        let d = GFisherDef::new(vec![1.0, 2.0], vec![2.0, 4.0], Side::TwoSided).unwrap();
        assert_eq!(d.normalized().weights, vec![2.0 / 3.0, 4.0 / 3.0]);
        assert_eq!(d.weight_scale(), 3.0);
    }
}

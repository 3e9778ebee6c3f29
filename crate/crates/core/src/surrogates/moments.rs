use serde::{Deserialize, Serialize};

use crate::diagnostics::MomentSource;
use crate::error::{Error, Result};

/// Null mean, variance, skewness and excess kurtosis of a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mu: f64,
    pub var: f64,
    pub skew: Option<f64>,
    pub exkurt: Option<f64>,
    pub source: MomentSource,
}

impl MomentSummary {
    pub fn new(mu: f64, var: f64, skew: Option<f64>, exkurt: Option<f64>, source: MomentSource) -> Result<Self> {
        if !(var > 0.0 && var.is_finite()) || !mu.is_finite() {
            return Err(Error::Domain(format!("moment summary needs finite mean and positive variance, got ({mu}, {var})")));
        }
        Ok(MomentSummary { mu, var, skew, exkurt, source })
    }

    /// Mean and variance only.
    pub fn two(mu: f64, var: f64, source: MomentSource) -> Result<Self> {
        Self::new(mu, var, None, None, source)
    }

    pub fn full(mu: f64, var: f64, skew: f64, exkurt: f64, source: MomentSource) -> Result<Self> {
        Self::new(mu, var, Some(skew), Some(exkurt), source)
    }

    /// Moments of a scaled chi-square c·χ²_k.
    pub fn chisq(k: f64, c: f64) -> Self {
        MomentSummary {
            mu: c * k,
            var: 2.0 * c * c * k,
            skew: Some((8.0 / k).sqrt()),
            exkurt: Some(12.0 / k),
            source: MomentSource::Analytic,
        }
    }

    /// Moments of a gamma(shape a, scale θ).
    pub fn gamma(a: f64, theta: f64) -> Self {
        MomentSummary {
            mu: a * theta,
            var: a * theta * theta,
            skew: Some(2.0 / a.sqrt()),
            exkurt: Some(6.0 / a),
            source: MomentSource::Analytic,
        }
    }

    /// Build from the first four cumulants.
    pub fn from_cumulants(k1: f64, k2: f64, k3: f64, k4: f64, source: MomentSource) -> Result<Self> {
        Self::full(k1, k2, k3 / k2.powf(1.5), k4 / (k2 * k2), source)
    }

    #[inline]
    pub fn sd(&self) -> f64 {
        self.var.sqrt()
    }

    /// Location-scale image: moments of α + βT with β > 0.
    pub fn affine(&self, alpha: f64, beta: f64) -> Self {
        MomentSummary { mu: alpha + beta * self.mu, var: beta * beta * self.var, ..*self }
    }

    pub fn require_higher(&self) -> Result<(f64, f64)> {
        match (self.skew, self.exkurt) {
            (Some(s), Some(k)) if s.is_finite() && k.is_finite() => Ok((s, k)),
            _ => Err(Error::InvalidInput("skewness and excess kurtosis are required".into())),
        }
    }

    /// Raw moments E T, E T², E T³, E T⁴.
    pub fn raw_moments(&self) -> Result<[f64; 4]> {
        let (g, k) = self.require_higher()?;
        let (m, v) = (self.mu, self.var);
        let s = v.sqrt();
        let c3 = g * s * s * s;
        let c4 = (k + 3.0) * v * v;
        Ok([
            m,
            v + m * m,
            c3 + 3.0 * m * v + m * m * m,
            c4 + 4.0 * m * c3 + 6.0 * m * m * v + m.powi(4),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_moments_of_exponential() {
        // Exp(1): E X^k = k!
        let m = MomentSummary::gamma(1.0, 1.0).raw_moments().unwrap();
        for (k, want) in [1.0, 2.0, 6.0, 24.0].iter().enumerate() {
            assert!((m[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn chisq_is_gamma() {
        let a = MomentSummary::chisq(6.0, 1.0);
        let b = MomentSummary::gamma(3.0, 2.0);
        assert!((a.mu - b.mu).abs() < 1e-15 && (a.var - b.var).abs() < 1e-15);
        assert!((a.skew.unwrap() - b.skew.unwrap()).abs() < 1e-15);
    }
}

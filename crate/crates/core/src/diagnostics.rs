//! P-value results and the diagnostics that travel with them.

use serde::{Deserialize, Serialize};

/// Where a moment summary came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    Analytic,
    Empirical,
    QSurrogate,
    Supplied,
}

/// Fitted surrogate parameters, as reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgdParams {
    pub shape: f64,
    pub scale: f64,
    pub power: f64,
    pub location: f64,
}

/// Everything a method wants to say about how it reached its answer.
/// Fields a method does not use stay `None` and are omitted from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kstar: Option<usize>,
    /// Largest |last retained term| of the covariance series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series_last_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skew: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exkurt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_source: Option<MomentSource>,
    /// Gamma surrogate shape.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ggd: Option<GgdParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_iterations: Option<usize>,
    /// Observed statistic fell at or below the surrogate's support.
    #[serde(skip_serializing_if = "is_false", default)]
    pub support_clamped: bool,
    /// Moment-ratio fit was degenerate and the two-moment fit was used.
    #[serde(skip_serializing_if = "is_false", default)]
    pub fallback_to_gb: bool,
    /// Input p-values clamped before the quantile transform.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamped_inputs: Option<usize>,
    /// Surrogate correlation entries capped at 0.99.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_count: Option<usize>,
    #[serde(skip_serializing_if = "is_false", default)]
    pub repair_applied: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repair_distance: Option<f64>,
    /// Σλ − Σ w_i d_i.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropped_eigen_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_eigenvalues: Option<usize>,
    /// Certified (or estimated) absolute error of a characteristic-function inversion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cdf_error_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cdf_fault: Option<i32>,
    #[serde(skip_serializing_if = "is_false", default)]
    pub cdf_fallback: bool,
    /// Monte Carlo standard error of an integrated probability.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_points: Option<usize>,
    /// Mean of the supplied weights (p-values do not depend on it).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_scale: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueResult {
    pub pvalue: f64,
    pub method: String,
    pub diagnostics: Diagnostics,
}

impl PValueResult {
    pub fn new(pvalue: f64, method: impl Into<String>, diagnostics: Diagnostics) -> Self {
        PValueResult { pvalue: pvalue.clamp(0.0, 1.0), method: method.into(), diagnostics }
    }
}

//! P-value methods as named strategies. Each method turns a null setting
//! into a prepared calculator; preparation does the expensive work
//! (covariances, moments, spectra) once so many statistics can be scored.

mod gamma;
mod ggd;
mod qform;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dependence::{mean_t, SeriesConfig};
use crate::diagnostics::{Diagnostics, MomentSource, PValueResult};
use crate::error::{Error, Result};
use crate::harness::{empirical_moments, NullModel, SimConfig, DEFAULT_MOMENT_REPS};
use crate::linalg::CorrMatrix;
use crate::qform::DEFAULT_CDF_ACC;
use crate::stat::GFisherDef;
use crate::surrogates::MomentSummary;

pub use gamma::{GbMethod, HybMethod, MrMethod};
pub use ggd::GgdMethod;
pub use qform::QMethod;

/// Seed used when empirical moments are requested without one.
pub const DEFAULT_MOMENT_SEED: u64 = 0x6f66_6973_6865_72;

/// How skewness and excess kurtosis of T are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentStrategy {
    /// Closed form when Σ is diagonal, otherwise empirical with defaults.
    Auto,
    /// Closed-form cumulants; only valid for independent inputs.
    Analytic,
    /// Simulated under `model`. Under the normal model the mean and variance
    /// stay exact and only the shape moments are simulated; under other
    /// models all four are simulated.
    Empirical { nreps: usize, seed: u64, model: NullModel },
    Supplied { moments: MomentSummary },
}

impl Default for MomentStrategy {
    fn default() -> Self {
        MomentStrategy::Auto
    }
}

impl MomentStrategy {
    pub fn empirical(nreps: usize, seed: u64) -> Self {
        MomentStrategy::Empirical { nreps, seed, model: NullModel::Gmm }
    }
}

/// Everything needed to describe the null distribution of one statistic.
#[derive(Debug, Clone)]
pub struct NullSetting {
    pub def: GFisherDef,
    pub sigma: CorrMatrix,
    pub series: SeriesConfig,
    pub moments: MomentStrategy,
    /// Absolute accuracy for characteristic-function inversion.
    pub cdf_acc: f64,
}

impl NullSetting {
    pub fn new(def: GFisherDef, sigma: CorrMatrix) -> Result<Self> {
        def.validate()?;
        if def.n() != sigma.n() {
            return Err(Error::Dimension(format!("statistic has {} inputs, correlation is {}x{}", def.n(), sigma.n(), sigma.n())));
        }
        Ok(NullSetting { def, sigma, series: SeriesConfig::default(), moments: MomentStrategy::Auto, cdf_acc: DEFAULT_CDF_ACC })
    }

    pub fn with_series(mut self, series: SeriesConfig) -> Self {
        self.series = series;
        self
    }

    pub fn with_moments(mut self, moments: MomentStrategy) -> Self {
        self.moments = moments;
        self
    }

    pub fn with_cdf_acc(mut self, acc: f64) -> Self {
        self.cdf_acc = acc;
        self
    }
}

/// Scale-normalized statistic: weights rescaled to mean one. The observed
/// value is divided by the same factor before scoring.
pub(crate) struct Normalized {
    pub def: GFisherDef,
    pub scale: f64,
}

impl Normalized {
    pub fn of(def: &GFisherDef) -> Self {
        Normalized { def: def.normalized(), scale: def.weight_scale() }
    }
}

/// Exact mean and series variance of T, with the truncation diagnostic.
pub(crate) fn two_moments(def: &GFisherDef, sigma: &CorrMatrix, series: &SeriesConfig) -> Result<(MomentSummary, f64)> {
    let cov = crate::dependence::cov_matrix(def, sigma, series)?;
    let w = &def.weights;
    let mut var = 0.0;
    for i in 0..def.n() {
        for j in 0..def.n() {
            var += w[i] * cov.cov[(i, j)] * w[j];
        }
    }
    Ok((MomentSummary::two(mean_t(def), var, MomentSource::Analytic)?, cov.max_last_term))
}

/// Cumulants of Σ w_i χ²_{d_i} for independent inputs.
pub fn independent_moments(def: &GFisherDef) -> Result<MomentSummary> {
    let k = |t: i32, c: f64| def.weights.iter().zip(&def.degrees).map(|(w, d)| w.powi(t) * d).sum::<f64>() * c;
    MomentSummary::from_cumulants(k(1, 1.0), k(2, 2.0), k(3, 8.0), k(4, 48.0), MomentSource::Analytic)
}

/// Four moments according to the strategy; mean and variance come from
/// `exact` whenever the strategy assumes the normal null.
pub(crate) fn full_moments(null: &NullSetting, def: &GFisherDef, exact: &MomentSummary) -> Result<MomentSummary> {
    match &null.moments {
        MomentStrategy::Supplied { moments } => {
            moments.require_higher()?;
            // Supplied moments refer to the caller's weights.
            let s = null.def.weight_scale();
            Ok(moments.affine(0.0, 1.0 / s))
        }
        MomentStrategy::Analytic => {
            if !null.sigma.is_diagonal() {
                return Err(Error::InvalidInput("analytic skewness and kurtosis need independent inputs; use empirical moments".into()));
            }
            independent_moments(def)
        }
        MomentStrategy::Auto if null.sigma.is_diagonal() => independent_moments(def),
        MomentStrategy::Auto => simulated(def, &null.sigma, DEFAULT_MOMENT_REPS, DEFAULT_MOMENT_SEED, NullModel::Gmm, exact),
        MomentStrategy::Empirical { nreps, seed, model } => simulated(def, &null.sigma, *nreps, *seed, *model, exact),
    }
}

fn simulated(def: &GFisherDef, sigma: &CorrMatrix, nreps: usize, seed: u64, model: NullModel, exact: &MomentSummary) -> Result<MomentSummary> {
    let cfg = SimConfig::new(sigma.clone(), nreps, seed, model, def.side)?;
    let m = empirical_moments(def, &cfg)?;
    Ok(match model {
        NullModel::Gmm => MomentSummary { mu: exact.mu, var: exact.var, ..m },
        NullModel::MultivariateT { .. } => m,
    })
}

pub(crate) fn moment_diagnostics(d: &mut Diagnostics, m: &MomentSummary) {
    d.mean = Some(m.mu);
    d.sd = Some(m.sd());
    d.skew = m.skew;
    d.exkurt = m.exkurt;
    d.moment_source = Some(m.source);
}

/// A p-value calculator bound to one null setting.
pub trait PreparedPValue: Send + Sync {
    fn method(&self) -> &str;
    /// P(T ≥ t) under the null; t is on the caller's weight scale.
    fn pvalue(&self, t: f64) -> Result<PValueResult>;
    /// Moments the calculator standardizes with, on the caller's weight scale.
    fn moments(&self) -> Option<MomentSummary> {
        None
    }
}

/// A named p-value method.
pub trait PValueMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn prepare(&self, null: &NullSetting) -> Result<Box<dyn PreparedPValue>>;
}

/// Methods registered by name, selected at run time.
#[derive(Clone)]
pub struct MethodRegistry {
    methods: BTreeMap<&'static str, Arc<dyn PValueMethod>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        MethodRegistry { methods: BTreeMap::new() }
    }

    pub fn register(&mut self, m: Arc<dyn PValueMethod>) {
        self.methods.insert(m.name(), m);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn PValueMethod>> {
        let key = name.to_ascii_lowercase();
        self.methods.get(key.as_str()).cloned().ok_or_else(|| {
            Error::InvalidInput(format!("unknown method {name:?}; available: {}", self.names().join(", ")))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }

    pub fn prepare(&self, name: &str, null: &NullSetting) -> Result<Box<dyn PreparedPValue>> {
        self.get(name)?.prepare(null)
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        use crate::surrogates::GgdVariant;
        let mut r = MethodRegistry::empty();
        r.register(Arc::new(GbMethod));
        r.register(Arc::new(MrMethod));
        r.register(Arc::new(QMethod));
        r.register(Arc::new(HybMethod));
        r.register(Arc::new(GgdMethod(GgdVariant::M123)));
        r.register(Arc::new(GgdMethod(GgdVariant::M234)));
        r.register(Arc::new(GgdMethod(GgdVariant::MR)));
        r
    }
}

/// One-shot convenience: prepare `method` and score `t`.
pub fn pvalue(method: &str, null: &NullSetting, t: f64) -> Result<PValueResult> {
    MethodRegistry::default().prepare(method, null)?.pvalue(t)
}

pub(crate) fn check_t(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("observed statistic {t} is not finite")));
    }
    Ok(())
}

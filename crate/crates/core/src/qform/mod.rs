//! Quadratic-form approximation for two-sided inputs with integer degrees:
//! each summand is replaced by a sum of d_i squared correlated normals, so the
//! statistic becomes Q = Σ λ χ²₁ with λ from an eigendecomposition.

pub mod davies;
pub mod imhof;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dependence::{cov_matrix, SeriesConfig};
use crate::diagnostics::MomentSource;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, psd_factor, repair_default, CorrMatrix};
use crate::stat::{GFisherDef, Side};
use crate::surrogates::MomentSummary;

/// Cap on surrogate correlations.
pub const M_CAP: f64 = 0.99;
/// Eigenvalues below this fraction of the largest are dropped.
pub const EIG_DROP: f64 = 1e-12;
pub const DEFAULT_CDF_ACC: f64 = 1e-9;
const DAVIES_LIM: usize = 1_000_000;

/// Surrogate correlation M of the underlying normals, with a factor L (L Lᵀ = M).
#[derive(Debug, Clone)]
pub struct SurrogateCorr {
    pub m: CorrMatrix,
    pub factor: DMatrix<f64>,
    pub clamp_count: usize,
    pub repair_applied: bool,
    pub repair_distance: f64,
}

/// Weighted χ²₁ mixture Q = Σ λ_j χ²₁.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadFormSpec {
    pub lambdas: Vec<f64>,
    pub trace: f64,
    pub repair_applied: bool,
    pub clamp_count: usize,
    /// Sum of the eigenvalues dropped as negligible.
    pub dropped_mass: f64,
}

pub fn check_q_inputs(def: &GFisherDef, method: &str) -> Result<()> {
    if def.side != Side::TwoSided {
        return Err(Error::RequiresTwoSided { method: method.to_string() });
    }
    if !def.has_integer_degrees() {
        return Err(Error::RequiresIntegerDegrees { method: method.to_string() });
    }
    Ok(())
}

/// M_ij = sgn(σ_ij) · min(√(Cov(T_i,T_j) / (2 min(d_i, d_j))), 0.99),
/// repaired to the nearest correlation matrix when not PSD.
pub fn build_m(def: &GFisherDef, sigma: &CorrMatrix, cov_t: &DMatrix<f64>) -> Result<SurrogateCorr> {
    check_q_inputs(def, "q")?;
    let n = def.n();
    if sigma.n() != n || cov_t.nrows() != n || cov_t.ncols() != n {
        return Err(Error::Dimension("statistic, correlation and covariance sizes differ".into()));
    }
    let mut m = DMatrix::identity(n, n);
    let mut clamp_count = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = sigma.get(i, j);
            let c = cov_t[(i, j)];
            if c < -1e-10 {
                return Err(Error::InvalidInput(format!(
                    "two-sided summand covariance ({i},{j}) = {c} is negative"
                )));
            }
            if s == 0.0 {
                continue;
            }
            let mut v = (c.max(0.0) / (2.0 * def.degrees[i].min(def.degrees[j]))).sqrt();
            if v > M_CAP {
                v = M_CAP;
                clamp_count += 1;
            }
            let v = v * s.signum();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let (m, repair_applied, repair_distance) = if n > 1 && min_eigenvalue(&m) < -1e-12 {
        let r = repair_default(&m)?;
        (r.matrix, true, r.distance)
    } else {
        (CorrMatrix::new(m)?, false, 0.0)
    };
    let factor = psd_factor(m.matrix());
    Ok(SurrogateCorr { m, factor, clamp_count, repair_applied, repair_distance })
}

/// Pooled eigenvalues of W_S^{1/2} M_S W_S^{1/2} over S_k = {l : d_l ≥ k}.
///
/// Each order k contributes an independent copy of the normals restricted to
/// the inputs with at least k degrees, so the blocks are principal submatrices.
pub fn eigen_spec(def: &GFisherDef, sc: &SurrogateCorr) -> Result<QuadFormSpec> {
    check_q_inputs(def, "q")?;
    let dmax = def.degrees.iter().cloned().fold(0.0, f64::max) as usize;
    let sw: Vec<f64> = def.weights.iter().map(|w| w.sqrt()).collect();
    let mut raw = Vec::new();
    for k in 1..=dmax {
        let idx: Vec<usize> = (0..def.n()).filter(|&l| def.degrees[l] >= k as f64 && def.weights[l] > 0.0).collect();
        if idx.is_empty() {
            continue;
        }
        let s = idx.len();
        let a = DMatrix::from_fn(s, s, |p, q| {
            let (i, j) = (idx[p], idx[q]);
            sw[i] * sc.m.get(i, j) * sw[j]
        });
        let eig = SymmetricEigen::try_new(a, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::Singular("symmetric eigensolver did not converge".into()))?;
        raw.extend(eig.eigenvalues.iter().cloned());
    }
    let lmax = raw.iter().cloned().fold(0.0, f64::max);
    if !(lmax > 0.0) {
        return Err(Error::InvalidInput("quadratic form has no positive eigenvalue".into()));
    }
    let mut lambdas = Vec::with_capacity(raw.len());
    let mut dropped = 0.0;
    for l in raw {
        if l < EIG_DROP * lmax {
            dropped += l.max(0.0);
        } else {
            lambdas.push(l);
        }
    }
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let trace = lambdas.iter().sum::<f64>() + dropped;
    Ok(QuadFormSpec { lambdas, trace, repair_applied: sc.repair_applied, clamp_count: sc.clamp_count, dropped_mass: dropped })
}

/// P(Q ≤ x) with its error report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfValue {
    pub cdf: f64,
    pub error_bound: f64,
    /// Davies fault code (0 when clean).
    pub fault: i32,
    /// The Imhof integrator replaced Davies.
    pub fallback: bool,
}

impl CdfValue {
    pub fn sf(&self) -> f64 {
        (1.0 - self.cdf).clamp(0.0, 1.0)
    }
}

/// CDF of Σ λ χ²₁ at x by characteristic-function inversion.
pub fn qform_cdf(spec: &QuadFormSpec, x: f64, acc: f64) -> Result<CdfValue> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("quadratic form argument {x} is not finite")));
    }
    if spec.lambdas.is_empty() || spec.lambdas.iter().all(|&l| l <= 0.0) {
        return Err(Error::InvalidInput("quadratic form has no positive eigenvalue".into()));
    }
    if x <= 0.0 {
        return Ok(CdfValue { cdf: 0.0, error_bound: 0.0, fault: 0, fallback: false });
    }
    let r = spec.lambdas.len();
    let res = davies::qfc(&spec.lambdas, &vec![0.0; r], &vec![1; r], 0.0, x, DAVIES_LIM, acc);
    if res.ifault == 0 || res.ifault == 2 {
        return Ok(CdfValue { cdf: res.value.clamp(0.0, 1.0), error_bound: acc, fault: res.ifault, fallback: false });
    }
    let im = imhof::imhof_sf(&spec.lambdas, x, acc);
    Ok(CdfValue { cdf: 1.0 - im.sf, error_bound: im.error_bound, fault: res.ifault, fallback: true })
}

/// Moments of Q from its cumulants c_t = 2^{t−1}(t−1)! Σ λ^t.
pub fn hybrid_moments(spec: &QuadFormSpec) -> Result<MomentSummary> {
    let s = |p: i32| spec.lambdas.iter().map(|l| l.powi(p)).sum::<f64>();
    let (s1, s2, s3, s4) = (s(1), s(2), s(3), s(4));
    if !(s2 > 0.0) {
        return Err(Error::InvalidInput("quadratic form spectrum is all zero".into()));
    }
    MomentSummary::full(s1, 2.0 * s2, 8f64.sqrt() * s3 / s2.powf(1.5), 12.0 * s4 / (s2 * s2), MomentSource::QSurrogate)
}

/// Moment-ratio gamma shape of Q: (Σλ²)(Σλ³)² / (2 (Σλ⁴)²).
pub fn hybrid_shape(spec: &QuadFormSpec) -> Result<f64> {
    let s = |p: i32| spec.lambdas.iter().map(|l| l.powi(p)).sum::<f64>();
    let s4 = s(4);
    if !(s4 > 0.0) {
        return Err(Error::InvalidInput("quadratic form spectrum is all zero".into()));
    }
    Ok(s(2) * s(3).powi(2) / (2.0 * s4 * s4))
}

/// Surrogate correlation and spectrum for a statistic, with the summand
/// covariance computed by the series.
pub fn prepare_spec(def: &GFisherDef, sigma: &CorrMatrix, series: &SeriesConfig) -> Result<(SurrogateCorr, QuadFormSpec)> {
    check_q_inputs(def, "q")?;
    let cov = cov_matrix(def, sigma, series)?;
    let sc = build_m(def, sigma, &cov.cov)?;
    let spec = eigen_spec(def, &sc)?;
    Ok((sc, spec))
}

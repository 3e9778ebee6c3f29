//! Null covariance of GFisher summands through the Hermite expansion
//! Cov(T_i, T_j) = Σ_k σ_ij^k / k! · I_i(k) I_j(k).

pub mod coeffs;
pub mod structures;

use nalgebra::DMatrix;

pub use coeffs::{coeff_table, hermite_coeff, same_input_cov, summand_of_z, HermiteCoeffTable};
pub use structures::{gen_structure, BlockLayout, Structure, StructureKind};

use crate::error::{Error, Result};
use crate::linalg::CorrMatrix;
use crate::numkernels::QuadConfig;
use crate::stat::{GFisherDef, Side};

pub const DEFAULT_KSTAR: usize = 8;

/// Truncation order and quadrature settings for the expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    pub kstar: usize,
    pub quad: QuadConfig,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { kstar: DEFAULT_KSTAR, quad: QuadConfig::default() }
    }
}

impl SeriesConfig {
    pub fn with_kstar(kstar: usize) -> Self {
        SeriesConfig { kstar, ..Self::default() }
    }
}

/// Series value and the magnitude of its last retained term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub last_term: f64,
}

fn series(a: &[f64], b: &[f64], sigma: f64, kstar: usize) -> SeriesValue {
    let mut value = 0.0;
    let mut pow = 1.0;
    let mut fact = 1.0;
    let mut last_term = 0.0;
    for k in 1..=kstar {
        pow *= sigma;
        fact *= k as f64;
        let term = pow / fact * a[k] * b[k];
        value += term;
        last_term = term.abs();
    }
    SeriesValue { value, last_term }
}

/// Truncated covariance of two summands whose z-scores have correlation `sigma`.
pub fn cov_summands(d_i: f64, d_j: f64, sigma: f64, side: Side, cfg: &SeriesConfig) -> Result<SeriesValue> {
    if !(-1.0..=1.0).contains(&sigma) {
        return Err(Error::Domain(format!("correlation {sigma} outside [-1, 1]")));
    }
    if cfg.kstar == 0 {
        return Err(Error::InvalidInput("kstar must be at least 1".into()));
    }
    let a = coeff_table(d_i, side, cfg.kstar, &cfg.quad)?;
    let b = coeff_table(d_j, side, cfg.kstar, &cfg.quad)?;
    Ok(series(&a.coeffs, &b.coeffs, sigma, cfg.kstar))
}

/// Summand covariance matrix with its worst truncation diagnostic.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    pub cov: DMatrix<f64>,
    /// Largest |last retained term| over all off-diagonal pairs.
    pub max_last_term: f64,
}

fn check_conformable(def: &GFisherDef, sigma: &CorrMatrix) -> Result<()> {
    if def.n() != sigma.n() {
        return Err(Error::Dimension(format!(
            "statistic has {} inputs but correlation matrix is {}x{}",
            def.n(),
            sigma.n(),
            sigma.n()
        )));
    }
    Ok(())
}

/// Cov(T_i, T_j) for all pairs. The diagonal is the exact Var(χ²_d) = 2d.
pub fn cov_matrix(def: &GFisherDef, sigma: &CorrMatrix, cfg: &SeriesConfig) -> Result<CovMatrix> {
    cross_pair(def, def, sigma, cfg)
}

/// Cov(T_i(l), T_j(r)) for two statistics on the same inputs.
fn cross_pair(l: &GFisherDef, r: &GFisherDef, sigma: &CorrMatrix, cfg: &SeriesConfig) -> Result<CovMatrix> {
    check_conformable(l, sigma)?;
    check_conformable(r, sigma)?;
    if l.side != r.side {
        return Err(Error::InvalidInput("statistics mix one-sided and two-sided inputs".into()));
    }
    if cfg.kstar == 0 {
        return Err(Error::InvalidInput("kstar must be at least 1".into()));
    }
    let n = l.n();
    let tables = |def: &GFisherDef| -> Result<Vec<Vec<f64>>> {
        def.degrees.iter().map(|&d| Ok(coeff_table(d, def.side, cfg.kstar, &cfg.quad)?.coeffs)).collect()
    };
    let tl = tables(l)?;
    let tr = tables(r)?;
    let mut cov = DMatrix::zeros(n, n);
    let mut max_last_term: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                cov[(i, i)] = same_input_cov(l.degrees[i], r.degrees[i], l.side, &cfg.quad)?;
                continue;
            }
            let s = sigma.get(i, j);
            if s == 0.0 {
                continue;
            }
            let v = series(&tl[i], &tr[j], s, cfg.kstar);
            cov[(i, j)] = v.value;
            max_last_term = max_last_term.max(v.last_term);
        }
    }
    Ok(CovMatrix { cov, max_last_term })
}

/// E[T] = Σ w_i d_i.
pub fn mean_t(def: &GFisherDef) -> f64 {
    def.weights.iter().zip(&def.degrees).map(|(w, d)| w * d).sum()
}

fn quad_form(w1: &[f64], m: &DMatrix<f64>, w2: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..w1.len() {
        for j in 0..w2.len() {
            s += w1[i] * m[(i, j)] * w2[j];
        }
    }
    s
}

/// Var(T) = wᵀ Cov w.
pub fn var_t(def: &GFisherDef, sigma: &CorrMatrix, cfg: &SeriesConfig) -> Result<f64> {
    let c = cov_matrix(def, sigma, cfg)?;
    Ok(quad_form(&def.weights, &c.cov, &def.weights))
}

/// Covariance matrix of several GFisher statistics on the same inputs.
pub fn cross_cov(defs: &[GFisherDef], sigma: &CorrMatrix, cfg: &SeriesConfig) -> Result<DMatrix<f64>> {
    if defs.is_empty() {
        return Err(Error::InvalidInput("no statistics given".into()));
    }
    let side = defs[0].side;
    if defs.iter().any(|d| d.side != side) {
        return Err(Error::InvalidInput("statistics mix one-sided and two-sided inputs".into()));
    }
    let m = defs.len();
    let mut out = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let c = cross_pair(&defs[a], &defs[b], sigma, cfg)?;
            let v = quad_form(&defs[a].weights, &c.cov, &defs[b].weights);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize) -> SeriesConfig {
        SeriesConfig::with_kstar(k)
    }

    #[test]
    fn cov_summands_examples() {
        assert_eq!(cov_summands(2.0, 2.0, 0.0, Side::OneSided, &cfg(3)).unwrap().value, 0.0);
        let v = cov_summands(2.0, 2.0, 0.5, Side::OneSided, &cfg(3)).unwrap().value;
        assert!((v - (3.263 * 0.5 + 0.710 * 0.25 + 0.027 * 0.125)).abs() < 5e-3);
        let v = cov_summands(2.0, 2.0, 0.5, Side::TwoSided, &cfg(10)).unwrap().value;
        let reference: f64 = [3.9068, 0.0506, 0.0173, 0.0082, 0.0046]
            .iter()
            .enumerate()
            .map(|(i, c)| c * 0.5f64.powi(2 * (i as i32 + 1)))
            .sum();
        assert!((v - reference).abs() < 5e-3);
        assert!((v - 0.9802).abs() < 5e-3);
    }

    #[test]
    fn d1_two_sided_is_two_sigma_squared() {
        let s = CorrMatrix::exchangeable(3, 0.4).unwrap();
        let def = GFisherDef::uniform(3, 1.0, Side::TwoSided).unwrap();
        for k in [2, 5, 8] {
            let c = cov_matrix(&def, &s, &cfg(k)).unwrap();
            assert!((c.cov[(0, 1)] - 2.0 * 0.16).abs() < 1e-8);
        }
    }

    #[test]
    fn identity_sigma_gives_diagonal() {
        let def = GFisherDef::fisher(4, Side::OneSided).unwrap();
        let c = cov_matrix(&def, &CorrMatrix::identity(4), &cfg(8)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c.cov[(i, j)], if i == j { 4.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn variance_examples() {
        let def = GFisherDef::fisher(10, Side::OneSided).unwrap();
        assert!((var_t(&def, &CorrMatrix::identity(10), &cfg(8)).unwrap() - 40.0).abs() < 1e-3);
        let def = GFisherDef::uniform(2, 1.0, Side::TwoSided).unwrap();
        let s = CorrMatrix::exchangeable(2, 0.5).unwrap();
        assert!((var_t(&def, &s, &cfg(8)).unwrap() - 5.0).abs() < 1e-6);
        let def = GFisherDef::new(vec![3.0, 2.0], vec![1.0, 0.0], Side::OneSided).unwrap();
        assert!((var_t(&def, &s, &cfg(8)).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn cross_cov_examples() {
        let s = CorrMatrix::exchangeable(3, 0.3).unwrap();
        let a = GFisherDef::fisher(3, Side::TwoSided).unwrap();
        let one = cross_cov(std::slice::from_ref(&a), &s, &cfg(8)).unwrap();
        assert!((one[(0, 0)] - var_t(&a, &s, &cfg(8)).unwrap()).abs() < 1e-12);
        let two = cross_cov(&[a.clone(), a.clone()], &s, &cfg(8)).unwrap();
        assert!((two[(0, 1)] - two[(0, 0)]).abs() < 1e-12);
        let b = GFisherDef::fisher(3, Side::OneSided).unwrap();
        assert!(cross_cov(&[a, b], &s, &cfg(8)).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let def = GFisherDef::fisher(3, Side::OneSided).unwrap();
        assert!(matches!(cov_matrix(&def, &CorrMatrix::identity(4), &cfg(8)), Err(Error::Dimension(_))));
    }
}

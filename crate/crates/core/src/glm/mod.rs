//! Input z-scores and their correlation from regression designs: joint and
//! marginal least squares under the linear model, marginal score tests under
//! a GLM null fit.

pub mod io;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CorrMatrix;

pub use io::{load_design, DesignManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    #[serde(alias = "binomial", alias = "logit")]
    BinomialLogit,
}

/// Response y, inquiry design X (N×n) and control design C (N×m).
#[derive(Debug, Clone)]
pub struct DesignData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub family: Family,
}

/// Relative pivot size below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

impl DesignData {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, c: DMatrix<f64>, family: Family) -> Result<Self> {
        let big_n = y.len();
        if x.nrows() != big_n || c.nrows() != big_n {
            return Err(Error::Dimension(format!("{} responses, X has {} rows, C has {} rows", big_n, x.nrows(), c.nrows())));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidInput("no inquiry columns".into()));
        }
        if big_n <= x.ncols() + c.ncols() {
            return Err(Error::InvalidInput(format!("need more observations ({big_n}) than columns ({})", x.ncols() + c.ncols())));
        }
        if y.iter().chain(x.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("design contains non-finite values".into()));
        }
        if family == Family::BinomialLogit && y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Domain("binomial responses must be 0 or 1".into()));
        }
        let d = DesignData { y, x, c, family };
        d.control_basis()?;
        Ok(d)
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    /// Orthonormal basis of the column space of C (N×0 when there are no controls).
    fn control_basis(&self) -> Result<DMatrix<f64>> {
        weighted_basis(&self.c, None)
    }
}

/// Orthonormal basis of W^{1/2} C, failing on dependent columns.
fn weighted_basis(c: &DMatrix<f64>, sqrt_w: Option<&DVector<f64>>) -> Result<DMatrix<f64>> {
    let big_n = c.nrows();
    if c.ncols() == 0 {
        return Ok(DMatrix::zeros(big_n, 0));
    }
    let cw = match sqrt_w {
        Some(s) => DMatrix::from_fn(big_n, c.ncols(), |i, j| c[(i, j)] * s[i]),
        None => c.clone(),
    };
    let qr = cw.qr();
    let r = qr.r();
    let scale = (0..r.ncols()).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let bad: Vec<usize> = (0..r.ncols()).filter(|&j| r[(j, j)].abs() <= RANK_TOL * scale.max(f64::MIN_POSITIVE)).collect();
    if !bad.is_empty() {
        return Err(Error::Singular(format!("control design is rank deficient at columns {bad:?}")));
    }
    Ok(qr.q())
}

/// (I − QQᵀ) M.
fn residualize(q: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    if q.ncols() == 0 {
        return m.clone();
    }
    m - q * (q.transpose() * m)
}

/// I − H as a dense N×N matrix. Intended for checks on small designs.
pub fn annihilator(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = weighted_basis(c, None)?;
    Ok(DMatrix::identity(c.nrows(), c.nrows()) - &q * q.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZKind {
    JointLs,
    MarginalLs,
    MarginalScore,
}

#[derive(Debug, Clone)]
pub struct ZPanel {
    pub z: Vec<f64>,
    pub sigma_hat: CorrMatrix,
    pub kind: ZKind,
    /// Residual scale used (σ̂, or the supplied σ).
    pub scale: f64,
}

/// Unit-diagonal Λ G Λ.
fn to_corr(g: &DMatrix<f64>) -> Result<CorrMatrix> {
    let n = g.nrows();
    let s: Vec<f64> = (0..n).map(|i| 1.0 / g[(i, i)].sqrt()).collect();
    // Computed on the upper triangle and mirrored so the result is exactly symmetric.
    let m = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (i.min(j), i.max(j));
        if a == b {
            1.0
        } else {
            (g[(a, b)] * s[a] * s[b]).clamp(-1.0, 1.0)
        }
    });
    CorrMatrix::new(m)
}

/// Inquiry columns with no variation left after projecting out the controls.
fn check_g(g: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<()> {
    let bad: Vec<usize> = (0..g.nrows())
        .filter(|&i| {
            let norm2 = x.column(i).norm_squared();
            !(g[(i, i)] > 1e-12 * norm2.max(f64::MIN_POSITIVE))
        })
        .collect();
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }
    Ok(())
}

struct Projected {
    xr: DMatrix<f64>,
    yr: DVector<f64>,
    g: DMatrix<f64>,
    sigma: f64,
}

fn project(data: &DesignData, known_sigma: Option<f64>) -> Result<Projected> {
    if data.family != Family::Gaussian {
        return Err(Error::InvalidInput("least-squares statistics need a Gaussian family".into()));
    }
    let q = data.control_basis()?;
    let xr = residualize(&q, &data.x);
    let yr = DVector::from_column_slice(residualize(&q, &DMatrix::from_column_slice(data.n_obs(), 1, data.y.as_slice())).as_slice());
    let g = xr.transpose() * &xr;
    check_g(&g, &data.x)?;
    let sigma = match known_sigma {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::Domain(format!("noise scale {s} must be positive"))),
        // Residual mean square of the control-only fit.
        None => (yr.norm_squared() / (data.n_obs() - data.c.ncols()) as f64).sqrt(),
    };
    if !(sigma > 0.0) {
        return Err(Error::Singular("response is fitted exactly by the controls".into()));
    }
    Ok(Projected { xr, yr, g, sigma })
}

/// Z_M = Λ_M X′(I−H)Y / σ̂, Σ_M = Λ_M G Λ_M.
pub fn marginal_ls(data: &DesignData) -> Result<ZPanel> {
    marginal_ls_with(data, None)
}

/// As `marginal_ls`, optionally with a known noise scale.
pub fn marginal_ls_with(data: &DesignData, known_sigma: Option<f64>) -> Result<ZPanel> {
    let p = project(data, known_sigma)?;
    let u = p.xr.transpose() * &p.yr;
    let z = (0..u.len()).map(|i| u[i] / (p.sigma * p.g[(i, i)].sqrt())).collect();
    Ok(ZPanel { z, sigma_hat: to_corr(&p.g)?, kind: ZKind::MarginalLs, scale: p.sigma })
}

/// Z_J = Λ_J β̂_J / σ̂, Σ_J = Λ_J G⁻¹ Λ_J.
pub fn joint_ls(data: &DesignData) -> Result<ZPanel> {
    joint_ls_with(data, None)
}

pub fn joint_ls_with(data: &DesignData, known_sigma: Option<f64>) -> Result<ZPanel> {
    let p = project(data, known_sigma)?;
    let chol = nalgebra::Cholesky::new(p.g.clone()).ok_or_else(|| Error::Singular("inquiry Gram matrix G is not invertible".into()))?;
    let ginv = chol.inverse();
    let beta = &ginv * (p.xr.transpose() * &p.yr);
    let z = (0..beta.len()).map(|i| beta[i] / (p.sigma * ginv[(i, i)].sqrt())).collect();
    Ok(ZPanel { z, sigma_hat: to_corr(&ginv)?, kind: ZKind::JointLs, scale: p.sigma })
}

/// Null GLM fit of y on the controls.
#[derive(Debug, Clone)]
pub struct NullFit {
    pub coef: DVector<f64>,
    pub mu: DVector<f64>,
    /// Var(Y_k | C_k) at the fit.
    pub var: DVector<f64>,
    pub iterations: usize,
}

pub const IRLS_TOL: f64 = 1e-10;
pub const IRLS_MAX_ITER: usize = 100;

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic null fit by iteratively reweighted least squares.
pub fn fit_logit_null(y: &DVector<f64>, c: &DMatrix<f64>) -> Result<NullFit> {
    let big_n = y.len();
    let m = c.ncols();
    let ybar = y.mean();
    if ybar <= 0.0 || ybar >= 1.0 {
        return Err(Error::NullFit("response is constant; the logistic fit separates".into()));
    }
    if m == 0 {
        return Err(Error::NullFit("logistic null model needs at least one control column".into()));
    }
    let mut beta = DVector::zeros(m);
    // Start from the intercept-only fit when a constant column exists.
    if let Some(j) = (0..m).find(|&j| c.column(j).iter().all(|&v| v == c[(0, j)]) && c[(0, j)] != 0.0) {
        beta[j] = (ybar / (1.0 - ybar)).ln() / c[(0, j)];
    }
    for it in 1..=IRLS_MAX_ITER {
        let eta = c * &beta;
        let mu = eta.map(expit);
        let w = mu.map(|p| p * (1.0 - p));
        if w.iter().any(|&v| v < 1e-12) {
            return Err(Error::NullFit("fitted probabilities reach 0 or 1 (separation)".into()));
        }
        let mut cw = c.clone();
        let mut zw = DVector::zeros(big_n);
        for k in 0..big_n {
            let s = w[k].sqrt();
            cw.row_mut(k).scale_mut(s);
            zw[k] = s * (eta[k] + (y[k] - mu[k]) / w[k]);
        }
        let qr = cw.qr();
        let next = qr
            .r()
            .solve_upper_triangular(&(qr.q().transpose() * &zw))
            .ok_or_else(|| Error::NullFit("weighted control design is singular".into()))?;
        let step = (&next - &beta).amax();
        beta = next;
        if beta.amax() > 50.0 {
            return Err(Error::NullFit("coefficients diverge (separation)".into()));
        }
        if step <= IRLS_TOL * (1.0 + beta.amax()) {
            let mu = (c * &beta).map(expit);
            let var = mu.map(|p| p * (1.0 - p));
            return Ok(NullFit { coef: beta, mu, var, iterations: it });
        }
    }
    Err(Error::NullFit(format!("no convergence in {IRLS_MAX_ITER} iterations")))
}

/// Z_S = Λ̂_S X′(Y − μ̂⁽⁰⁾), Σ_S = Λ_S G̃₀ Λ_S with G̃₀ = X̃₀′(I − H̃₀)X̃₀.
/// For the Gaussian family this equals the marginal least-squares panel.
pub fn marginal_score(data: &DesignData) -> Result<ZPanel> {
    match data.family {
        Family::Gaussian => {
            let mut p = marginal_ls(data)?;
            p.kind = ZKind::MarginalScore;
            Ok(p)
        }
        Family::BinomialLogit => {
            let fit = fit_logit_null(&data.y, &data.c)?;
            let sw = fit.var.map(f64::sqrt);
            let q = weighted_basis(&data.c, Some(&sw))?;
            let big_n = data.n_obs();
            let xw = DMatrix::from_fn(big_n, data.x.ncols(), |i, j| data.x[(i, j)] * sw[i]);
            let xr = residualize(&q, &xw);
            let g = xr.transpose() * &xr;
            check_g(&g, &xw)?;
            let u = data.x.transpose() * (&data.y - &fit.mu);
            let z = (0..u.len()).map(|i| u[i] / g[(i, i)].sqrt()).collect();
            Ok(ZPanel { z, sigma_hat: to_corr(&g)?, kind: ZKind::MarginalScore, scale: 1.0 })
        }
    }
}

pub fn compute(data: &DesignData, kind: ZKind) -> Result<ZPanel> {
    match kind {
        ZKind::JointLs => joint_ls(data),
        ZKind::MarginalLs => marginal_ls(data),
        ZKind::MarginalScore => marginal_score(data),
    }
}

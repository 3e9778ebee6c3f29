//! P(X ≤ b) for X ~ N(0, R) by separation of variables over a randomized
//! Richtmyer lattice. Each random shift yields an unbiased estimate; their
//! spread gives the error estimate.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, repair_default};
use crate::numkernels::{norm_cdf, norm_quantile, norm_sf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvnConfig {
    /// Target absolute error (3 standard errors).
    pub tol: f64,
    pub max_points: usize,
    pub seed: u64,
    pub shifts: usize,
}

impl Default for MvnConfig {
    fn default() -> Self {
        MvnConfig { tol: 1e-4, max_points: 10_000_000, seed: 0x6d69_6e70, shifts: 16 }
    }
}

/// Complement 1 − P(X ≤ b) with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnTail {
    pub tail: f64,
    pub error: f64,
    pub points: usize,
}

const PRIMES: [u32; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107,
    109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

/// Lower Cholesky factor that tolerates exact singularity (zero pivots).
fn semidefinite_cholesky(r: &DMatrix<f64>) -> DMatrix<f64> {
    let m = r.nrows();
    let mut l = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut d = r[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        let piv = if d > 1e-12 { d.sqrt() } else { 0.0 };
        l[(j, j)] = piv;
        for i in j + 1..m {
            let mut s = r[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = if piv > 0.0 { s / piv } else { 0.0 };
        }
    }
    l
}

/// ln(1 − f) accumulated as Σ ln e_i; returns 1 − Π e_i for one point.
fn sov_tail(l: &DMatrix<f64>, b: &[f64], w: &[f64], y: &mut [f64]) -> f64 {
    let m = b.len();
    let mut log_f = 0.0;
    for i in 0..m {
        let mut s = 0.0;
        for j in 0..i {
            s += l[(i, j)] * y[j];
        }
        let piv = l[(i, i)];
        let (e, ln_e) = if piv > 0.0 {
            let x = (b[i] - s) / piv;
            (norm_cdf(x), (-norm_sf(x)).ln_1p())
        } else if s <= b[i] {
            (1.0, 0.0)
        } else {
            return 1.0;
        };
        if e <= 0.0 {
            return 1.0;
        }
        log_f += ln_e;
        if i + 1 < m {
            let u = (w[i] * e).clamp(1e-300, 1.0 - 1e-16);
            y[i] = norm_quantile(u);
        }
    }
    -log_f.exp_m1()
}

/// 1 − P(X ≤ b) with X ~ N(0, R). Non-PSD R is repaired first.
pub fn mvn_upper_complement(r: &DMatrix<f64>, b: &[f64], cfg: &MvnConfig) -> Result<(MvnTail, bool)> {
    let m = r.nrows();
    if b.len() != m {
        return Err(Error::Dimension(format!("{} limits for a {m}-dimensional normal", b.len())));
    }
    if m == 0 {
        return Err(Error::InvalidInput("empty normal vector".into()));
    }
    if m > PRIMES.len() + 1 {
        return Err(Error::InvalidInput(format!("at most {} components supported", PRIMES.len() + 1)));
    }
    let (r, repaired) = if min_eigenvalue(r) < -1e-10 {
        (repair_default(r)?.matrix.into_matrix(), true)
    } else {
        (r.clone(), false)
    };
    if m == 1 {
        return Ok((MvnTail { tail: norm_sf(b[0]), error: 0.0, points: 0 }, repaired));
    }
    let l = semidefinite_cholesky(&r);
    let gen: Vec<f64> = PRIMES[..m - 1].iter().map(|&p| (p as f64).sqrt().fract()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shifts: Vec<Vec<f64>> = (0..cfg.shifts.max(2)).map(|_| (0..m - 1).map(|_| rng.random::<f64>()).collect()).collect();
    let ns = shifts.len() as f64;
    let mut n = 1024usize;
    let mut sums = vec![0.0; shifts.len()];
    let mut done = 0usize;
    loop {
        // Extend every shift's lattice from `done` to `n` points.
        let add: Vec<f64> = shifts
            .par_iter()
            .map(|shift| {
                let mut w = vec![0.0; m - 1];
                let mut y = vec![0.0; m];
                let mut s = 0.0;
                for i in done + 1..=n {
                    for k in 0..m - 1 {
                        let x = (i as f64 * gen[k] + shift[k]).fract();
                        w[k] = (2.0 * x - 1.0).abs();
                    }
                    s += sov_tail(&l, b, &w, &mut y);
                }
                s
            })
            .collect();
        for (a, s) in sums.iter_mut().zip(add) {
            *a += s;
        }
        done = n;
        let est: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let mean = est.iter().sum::<f64>() / ns;
        let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (ns - 1.0);
        let error = 3.0 * (var / ns).sqrt();
        let points = n * shifts.len();
        if error <= cfg.tol || points * 2 > cfg.max_points {
            return Ok((MvnTail { tail: mean.clamp(0.0, 1.0), error, points }, repaired));
        }
        n *= 2;
    }
}

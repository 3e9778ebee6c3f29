//! Correlation matrices and the dense linear algebra used around them.

use nalgebra::{DMatrix, SymmetricEigen};
use std::path::Path;

use crate::error::{Error, Result};

/// Symmetric matrix with unit diagonal and entries in [−1, 1].
///
/// Positive semidefiniteness is checked on demand (`min_eigenvalue`) rather
/// than at construction, since callers may want to repair instead.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    m: DMatrix<f64>,
}

const SYM_TOL: f64 = 1e-10;

impl CorrMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::Dimension(format!("correlation matrix is {}x{}", n, m.ncols())));
        }
        for i in 0..n {
            if (m[(i, i)] - 1.0).abs() > SYM_TOL {
                return Err(Error::InvalidInput(format!("diagonal entry {i} is {}", m[(i, i)])));
            }
            for j in 0..n {
                let v = m[(i, j)];
                if !v.is_finite() || v.abs() > 1.0 + SYM_TOL {
                    return Err(Error::InvalidInput(format!("entry ({i},{j}) = {v} outside [-1, 1]")));
                }
                if (v - m[(j, i)]).abs() > SYM_TOL {
                    return Err(Error::InvalidInput(format!("not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(CorrMatrix { m })
    }

    pub fn identity(n: usize) -> Self {
        CorrMatrix { m: DMatrix::identity(n, n) }
    }

    /// All off-diagonal entries equal to `rho`.
    pub fn exchangeable(n: usize, rho: f64) -> Result<Self> {
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
        Self::new(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("correlation rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| i == j || self.m[(i, j)] == 0.0))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.m)
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> CorrMatrix {
        let k = idx.len();
        CorrMatrix { m: DMatrix::from_fn(k, k, |a, b| self.m[(idx[a], idx[b])]) }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| (0..self.n()).map(|j| self.m[(i, j)]).collect()).collect()
    }

    pub fn to_csv_string(&self) -> String {
        matrix_to_csv(&self.m)
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        Self::new(matrix_from_csv(s)?)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Dense, header-free CSV. `f64` Display is shortest round-trip, so
/// write-then-read reproduces the matrix bit for bit.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(s: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e} ({t:?})", ln + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Parse("ragged CSV matrix".into()));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Rebuild V diag(f(λ)) Vᵀ.
fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let mut out = v * d * v.transpose();
    symmetrize(&mut out);
    out
}

/// Symmetric square root through the eigendecomposition, negative
/// eigenvalues treated as 0.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, |l| l.max(0.0).sqrt())
}

/// Some L with L Lᵀ = m: Cholesky when it succeeds, else the symmetric root.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    match nalgebra::Cholesky::new(m.clone()) {
        Some(c) => c.l(),
        None => sym_sqrt(m),
    }
}

/// D^{-1/2} A D^{-1/2} with D = diag(A).
pub fn standardize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        let d = a[(i, i)];
        if !(d > 0.0) {
            return Err(Error::NotPsd { min_eig: d });
        }
        s.push(1.0 / d.sqrt());
    }
    let mut out = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j]);
    for i in 0..n {
        out[(i, i)] = 1.0;
    }
    symmetrize(&mut out);
    Ok(out)
}

/// Outcome of a nearest-correlation repair.
#[derive(Debug, Clone)]
pub struct Repair {
    pub matrix: CorrMatrix,
    pub iterations: usize,
    /// Smallest eigenvalue before repair.
    pub min_eig_before: f64,
    /// Frobenius distance moved.
    pub distance: f64,
}

/// Nearest correlation matrix in Frobenius norm by alternating projections
/// with Dykstra's correction, then a small eigenvalue floor so the result is
/// safely positive definite.
pub fn nearest_correlation(a: &DMatrix<f64>, tol: f64, eig_floor: f64) -> Result<Repair> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("nearest_correlation needs a square matrix".into()));
    }
    let min_eig_before = min_eigenvalue(a);
    let mut y = a.clone();
    symmetrize(&mut y);
    let mut ds = DMatrix::<f64>::zeros(n, n);
    let mut iterations = 0;
    for it in 1..=10_000 {
        iterations = it;
        let r = &y - &ds;
        let x = spectral_map(&r, |l| l.max(0.0));
        ds = &x - &r;
        let mut y_next = x.clone();
        for i in 0..n {
            y_next[(i, i)] = 1.0;
        }
        let change = (&y_next - &y).norm() / y_next.norm().max(1.0);
        let gap = (&y_next - &x).norm() / y_next.norm().max(1.0);
        y = y_next;
        if change < tol && gap < tol {
            break;
        }
    }
    let floored = spectral_map(&y, |l| l.max(eig_floor));
    let out = standardize(&floored)?;
    let distance = (&out - a).norm();
    Ok(Repair { matrix: CorrMatrix { m: out }, iterations, min_eig_before, distance })
}

/// Default repair settings used throughout the crate.
pub fn repair_default(a: &DMatrix<f64>) -> Result<Repair> {
    nearest_correlation(a, 1e-10, 1e-8)
}

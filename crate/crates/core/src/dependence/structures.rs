//! Correlation structures for simulation studies: exchangeable and
//! polynomially decaying bases, their standardized inverses, and the three
//! block layouts.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, repair_default, standardize, CorrMatrix};

/// Largest off-diagonal magnitude allowed in the polynomial base.
pub const POLY_CAP: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    /// Exchangeable: every off-diagonal equals ρ.
    Equal,
    /// Entry (i, j) is 1/|i − j|^κ.
    Poly,
    InvEqual,
    InvPoly,
}

/// Where the base matrix sits inside the n×n result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockLayout {
    /// Base on the first n/2 coordinates, the rest independent.
    I,
    /// Two independent copies of the base, each on n/2 coordinates.
    II,
    /// Base on all n coordinates.
    III,
}

impl std::str::FromStr for StructureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "equal" => Ok(Self::Equal),
            "poly" => Ok(Self::Poly),
            "invequal" => Ok(Self::InvEqual),
            "invpoly" => Ok(Self::InvPoly),
            _ => Err(Error::Parse(format!("unknown structure {s:?}"))),
        }
    }
}

impl std::str::FromStr for BlockLayout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Self::I),
            "II" | "2" => Ok(Self::II),
            "III" | "3" => Ok(Self::III),
            _ => Err(Error::Parse(format!("unknown block layout {s:?}"))),
        }
    }
}

/// A generated structure with its repair history.
#[derive(Debug, Clone)]
pub struct Structure {
    pub sigma: CorrMatrix,
    /// Assembled matrix before any PSD repair (after the Poly cap).
    pub raw: DMatrix<f64>,
    /// Number of off-diagonal entries of the base that hit the cap.
    pub capped: usize,
    /// Whether a nearest-correlation repair was applied.
    pub repaired: bool,
}

fn equal_base(m: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { rho })
}

fn poly_base(m: usize, kappa: f64) -> (DMatrix<f64>, usize) {
    let mut capped = 0;
    let b = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            return 1.0;
        }
        let v = 1.0 / ((i as f64 - j as f64).abs()).powf(kappa);
        if v > POLY_CAP {
            capped += 1;
            POLY_CAP
        } else {
            v
        }
    });
    (b, capped)
}

fn ensure_psd(b: DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    if b.nrows() == 0 || min_eigenvalue(&b) > 1e-10 {
        return Ok((b, false));
    }
    Ok((repair_default(&b)?.matrix.into_matrix(), true))
}

fn inverse_standardized(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = b
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("base correlation matrix is singular".into()))?;
    standardize(&inv)
}

/// Returns (raw, final, capped, repaired) for an m×m base.
fn base(kind: StructureKind, m: usize, param: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, usize, bool)> {
    match kind {
        StructureKind::Equal | StructureKind::InvEqual => {
            if !(0.0..1.0).contains(&param) {
                return Err(Error::Domain(format!("exchangeable correlation must lie in [0, 1), got {param}")));
            }
            let a = equal_base(m, param);
            if kind == StructureKind::Equal {
                Ok((a.clone(), a, 0, false))
            } else {
                Ok((a.clone(), inverse_standardized(&a)?, 0, false))
            }
        }
        StructureKind::Poly | StructureKind::InvPoly => {
            if !(param > 0.0 && param.is_finite()) {
                return Err(Error::Domain(format!("decay exponent must be positive, got {param}")));
            }
            let (b, capped) = poly_base(m, param);
            let (fixed, repaired) = ensure_psd(b.clone())?;
            if kind == StructureKind::Poly {
                Ok((b, fixed, capped, repaired))
            } else {
                Ok((b, inverse_standardized(&fixed)?, capped, repaired))
            }
        }
    }
}

fn place(out: &mut DMatrix<f64>, block: &DMatrix<f64>, offset: usize) {
    for i in 0..block.nrows() {
        for j in 0..block.ncols() {
            out[(offset + i, offset + j)] = block[(i, j)];
        }
    }
}

/// Assemble an n×n correlation structure.
pub fn gen_structure(kind: StructureKind, layout: BlockLayout, n: usize, param: f64) -> Result<Structure> {
    if n == 0 {
        return Err(Error::InvalidInput("structure size must be positive".into()));
    }
    if layout != BlockLayout::III && n % 2 != 0 {
        return Err(Error::InvalidInput(format!("block layouts I and II need even n, got {n}")));
    }
    let m = if layout == BlockLayout::III { n } else { n / 2 };
    let (raw_b, fin_b, capped, repaired) = base(kind, m, param)?;
    let mut raw = DMatrix::identity(n, n);
    let mut fin = DMatrix::identity(n, n);
    place(&mut raw, &raw_b, 0);
    place(&mut fin, &fin_b, 0);
    let mut capped = capped;
    if layout == BlockLayout::II {
        place(&mut raw, &raw_b, m);
        place(&mut fin, &fin_b, m);
        capped *= 2;
    }
    Ok(Structure { sigma: CorrMatrix::new(fin)?, raw, capped, repaired })
}

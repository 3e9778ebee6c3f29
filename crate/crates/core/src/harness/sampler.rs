use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, repair_default, CorrMatrix};

/// Distribution of the input z-vector under the null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullModel {
    /// Multivariate normal with correlation Σ.
    Gmm,
    /// Multivariate t with ν degrees of freedom and correlation Σ.
    MultivariateT { nu: f64 },
}

/// Draws z-vectors with correlation Σ.
#[derive(Debug, Clone)]
pub struct Sampler {
    factor: DMatrix<f64>,
    n: usize,
    model: NullModel,
    chi: Option<ChiSquared<f64>>,
    pub repaired: bool,
}

impl Sampler {
    pub fn new(sigma: &CorrMatrix, model: NullModel) -> Result<Self> {
        let chi = match model {
            NullModel::Gmm => None,
            NullModel::MultivariateT { nu } => {
                if !(nu > 2.0) {
                    return Err(Error::Domain(format!("multivariate t needs nu > 2, got {nu}")));
                }
                Some(ChiSquared::new(nu).map_err(|e| Error::Domain(e.to_string()))?)
            }
        };
        let (m, repaired) = if sigma.min_eigenvalue() < -1e-10 {
            (repair_default(sigma.matrix())?.matrix.into_matrix(), true)
        } else {
            (sigma.matrix().clone(), false)
        };
        Ok(Sampler { factor: psd_factor(&m), n: sigma.n(), model, chi, repaired })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fill `z` with one draw; `u` is scratch of length n.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, u: &mut [f64], z: &mut [f64]) {
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = self.n;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.factor[(i, j)] * u[j];
            }
            z[i] = s;
        }
        if let (NullModel::MultivariateT { nu }, Some(chi)) = (self.model, &self.chi) {
            let scale = (chi.sample(rng) / nu).sqrt();
            for v in z.iter_mut() {
                *v /= scale;
            }
        }
    }
}

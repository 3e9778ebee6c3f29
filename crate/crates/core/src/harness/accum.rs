use crate::diagnostics::MomentSource;
use crate::error::{Error, Result};
use crate::surrogates::MomentSummary;

/// Streaming central moments up to order four, mergeable across chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    pub n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    pub fn merge(&mut self, o: &MomentAccumulator) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let d = o.mean - self.mean;
        let d2 = d * d;
        let m2 = self.m2 + o.m2 + d2 * na * nb / n;
        let m3 = self.m3 + o.m3 + d * d2 * na * nb * (na - nb) / (n * n) + 3.0 * d * (na * o.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + o.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n;
        self.mean += d * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.n += o.n;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        self.m2 / (self.n as f64 - 1.0)
    }

    pub fn skewness(&self) -> f64 {
        (self.n as f64).sqrt() * self.m3 / self.m2.powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        self.n as f64 * self.m4 / (self.m2 * self.m2) - 3.0
    }

    pub fn summary(&self) -> Result<MomentSummary> {
        if self.n < 4 {
            return Err(Error::InvalidInput("need at least four draws for moments".into()));
        }
        MomentSummary::full(self.mean(), self.variance(), self.skewness(), self.excess_kurtosis(), MomentSource::Empirical)
    }
}

/// Running sums for a sample covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovAccumulator {
    pub n: u64,
    mean: Vec<f64>,
    co: Vec<f64>,
    dim: usize,
}

impl CovAccumulator {
    pub fn new(dim: usize) -> Self {
        CovAccumulator { n: 0, mean: vec![0.0; dim], co: vec![0.0; dim * dim], dim }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        let d = self.dim;
        let delta: Vec<f64> = (0..d).map(|i| x[i] - self.mean[i]).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..d {
            let di = x[i] - self.mean[i];
            for j in 0..d {
                self.co[i * d + j] += delta[j] * di;
            }
        }
    }

    pub fn merge(&mut self, o: &CovAccumulator) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = o.clone();
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let d = self.dim;
        let delta: Vec<f64> = (0..d).map(|i| o.mean[i] - self.mean[i]).collect();
        for i in 0..d {
            for j in 0..d {
                self.co[i * d + j] += o.co[i * d + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..d {
            self.mean[i] += delta[i] * nb / n;
        }
        self.n += o.n;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased covariance entry.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.co[i * self.dim + j] / (self.n as f64 - 1.0)
    }
}

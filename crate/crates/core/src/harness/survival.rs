use serde::{Deserialize, Serialize};

use super::{simulate_statistics, SimConfig};
use crate::error::{Error, Result};
use crate::methods::PreparedPValue;
use crate::stat::GFisherDef;

/// Right-tail comparison on a grid of empirical quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTable {
    pub quantiles: Vec<f64>,
    pub statistics: Vec<f64>,
    /// −log10(1 − q), the empirical tail at each quantile.
    pub empirical: Vec<f64>,
    /// Two binomial standard errors around the empirical tail, on the same scale.
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    pub methods: Vec<String>,
    /// −log10 p of each method at each quantile; rows follow `quantiles`.
    pub curves: Vec<Vec<f64>>,
    pub nreps: usize,
}

impl SurvivalTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantile,statistic,empirical,band_lo,band_hi");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for i in 0..self.quantiles.len() {
            out.push_str(&format!(
                "{},{},{},{},{}",
                self.quantiles[i], self.statistics[i], self.empirical[i], self.band_lo[i], self.band_hi[i]
            ));
            for c in &self.curves {
                out.push_str(&format!(",{}", c[i]));
            }
            out.push('\n');
        }
        out
    }

    /// Largest |method − empirical| over rows whose empirical tail is at least `min_tail`.
    pub fn max_deviation(&self, method: usize, min_tail: f64) -> f64 {
        let lim = -min_tail.log10();
        (0..self.quantiles.len())
            .filter(|&i| self.empirical[i] <= lim + 1e-12)
            .map(|i| (self.curves[method][i] - self.empirical[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Grid from 0 to 0.9999 with extra resolution in the tail.
/// −log10 x, with +0 rather than −0 at x = 1.
fn neg_log10(x: f64) -> f64 {
    0.0 - x.log10()
}

pub fn default_quantile_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..99).map(|i| i as f64 / 100.0).collect();
    g.extend((0..9).map(|i| 0.99 + i as f64 / 1000.0));
    g.extend((0..10).map(|i| 0.999 + i as f64 / 10_000.0));
    g
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn survival_compare(def: &GFisherDef, methods: &[&dyn PreparedPValue], cfg: &SimConfig, grid: &[f64]) -> Result<SurvivalTable> {
    if let Some(q) = grid.iter().find(|q| !(**q >= 0.0 && **q < 1.0)) {
        return Err(Error::Domain(format!("quantile {q} outside [0, 1)")));
    }
    let mut stats = simulate_statistics(def, cfg)?;
    stats.sort_by(f64::total_cmp);
    let n = stats.len() as f64;
    let mut t = Table::default();
    for &q in grid {
        let tail = 1.0 - q;
        let se = (q * tail / n).sqrt();
        t.quantiles.push(q);
        t.statistics.push(quantile_sorted(&stats, q));
        t.empirical.push(neg_log10(tail));
        t.band_lo.push(neg_log10((tail + 2.0 * se).min(1.0)));
        t.band_hi.push(neg_log10((tail - 2.0 * se).max(1.0 / n)));
    }
    let curves = methods
        .iter()
        .map(|m| t.statistics.iter().map(|&s| m.pvalue(s).map_or(f64::NAN, |r| neg_log10(r.pvalue))).collect())
        .collect();
    Ok(SurvivalTable {
        quantiles: t.quantiles,
        statistics: t.statistics,
        empirical: t.empirical,
        band_lo: t.band_lo,
        band_hi: t.band_hi,
        methods: methods.iter().map(|m| m.method().to_string()).collect(),
        curves,
        nreps: stats.len(),
    })
}

#[derive(Default)]
struct Table {
    quantiles: Vec<f64>,
    statistics: Vec<f64>,
    empirical: Vec<f64>,
    band_lo: Vec<f64>,
    band_hi: Vec<f64>,
}

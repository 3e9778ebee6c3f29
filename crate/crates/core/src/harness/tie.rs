use serde::{Deserialize, Serialize};

use super::{for_each_draw, ConfigEcho, SimConfig};
use crate::error::{Error, Result};
use crate::methods::PreparedPValue;
use crate::stat::{GFisherDef, Side};

/// A test that can be replayed on simulated z-vectors.
///
/// `statistic` must be oriented so that larger is more significant, and
/// `pvalue` must be nonincreasing in it. That lets threshold mode compare
/// each replicate's statistic with a precomputed critical value instead of
/// evaluating a p-value per replicate.
pub trait ReplicateTest: Send + Sync {
    fn name(&self) -> String;
    fn n(&self) -> usize;
    fn side(&self) -> Side;
    fn statistic(&self, z: &[f64], scratch: &mut Vec<f64>) -> f64;
    fn pvalue(&self, stat: f64) -> Result<f64>;
}

/// A single GFisher statistic scored by a prepared method.
pub struct GFisherReplicate {
    pub def: GFisherDef,
    pub method: Box<dyn PreparedPValue>,
}

impl ReplicateTest for GFisherReplicate {
    fn name(&self) -> String {
        self.method.method().to_string()
    }
    fn n(&self) -> usize {
        self.def.n()
    }
    fn side(&self) -> Side {
        self.def.side
    }
    fn statistic(&self, z: &[f64], _: &mut Vec<f64>) -> f64 {
        self.def.statistic_from_z(z)
    }
    fn pvalue(&self, stat: f64) -> Result<f64> {
        Ok(self.method.pvalue(stat)?.pvalue)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieMode {
    /// Bisect the critical value for each α once, then count exceedances.
    Threshold,
    /// Compute the p-value of every replicate.
    PerReplicate,
}

/// Empirical type I error rates at a set of nominal levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieReport {
    pub method: String,
    pub alphas: Vec<f64>,
    pub rejections: Vec<u64>,
    pub empirical_rates: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Binomial standard error of each rate at its nominal level, √(α(1−α)/N).
    pub mc_se: Vec<f64>,
    /// Critical values used in threshold mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    pub nreps: u64,
    /// Replicates whose p-value computation failed (per-replicate mode).
    pub failures: u64,
    pub mode: TieMode,
    pub config: ConfigEcho,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl TieReport {
    /// Ratio standard errors, mc_se / α.
    pub fn ratio_se(&self) -> Vec<f64> {
        self.mc_se.iter().zip(&self.alphas).map(|(s, a)| s / a).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,rejections,rate,ratio,se,ratio_se\n");
        let rse = self.ratio_se();
        for i in 0..self.alphas.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.alphas[i], self.rejections[i], self.empirical_rates[i], self.ratios[i], self.mc_se[i], rse[i]
            ));
        }
        out
    }
}

/// Smallest statistic value whose p-value is known to be below α. Returns
/// −∞ when every value rejects and +∞ when none does.
pub fn critical_value(test: &dyn ReplicateTest, alpha: f64) -> Result<f64> {
    const BIG: f64 = 1e300;
    let rejects = |t: f64| -> Result<bool> { Ok(test.pvalue(t)? < alpha) };
    let mut lo = 0.0;
    if rejects(lo)? {
        let mut step = 1.0;
        loop {
            let cand = -step;
            if !rejects(cand)? {
                lo = cand;
                break;
            }
            if step > BIG {
                return Ok(f64::NEG_INFINITY);
            }
            step *= 2.0;
        }
    }
    let mut hi = lo.abs().max(1.0);
    while !rejects(hi)? {
        if hi > BIG {
            return Ok(f64::INFINITY);
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rejects(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone)]
struct Counts {
    hits: Vec<u64>,
    failures: u64,
}

impl Counts {
    fn new(k: usize) -> Self {
        Counts { hits: vec![0; k], failures: 0 }
    }
    fn merge(&mut self, o: Counts) {
        for (a, b) in self.hits.iter_mut().zip(o.hits) {
            *a += b;
        }
        self.failures += o.failures;
    }
}

/// Fraction of null replicates with p < α, for each α.
pub fn empirical_tie(test: &dyn ReplicateTest, cfg: &SimConfig, alphas: &[f64], mode: TieMode) -> Result<TieReport> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("no significance levels given".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::Domain(format!("significance level {a} outside (0, 1)")));
    }
    if test.n() != cfg.sigma.n() {
        return Err(Error::Dimension(format!("test has {} inputs, correlation is {}x{}", test.n(), cfg.sigma.n(), cfg.sigma.n())));
    }
    if test.side() != cfg.side {
        return Err(Error::InvalidInput("test and simulation disagree on sidedness".into()));
    }
    let mut warnings = Vec::new();
    let amin = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    if (cfg.nreps as f64) < 10.0 / amin {
        warnings.push(format!("{} replicates is fewer than 10/alpha = {:.0} for alpha = {amin}", cfg.nreps, 10.0 / amin));
    }
    let k = alphas.len();
    let (counts, thresholds) = match mode {
        TieMode::Threshold => {
            let th = alphas.iter().map(|&a| critical_value(test, a)).collect::<Result<Vec<f64>>>()?;
            let c = for_each_draw(
                cfg,
                || (Counts::new(k), Vec::with_capacity(8)),
                |(c, scratch), z| {
                    let s = test.statistic(z, scratch);
                    for (h, t) in c.hits.iter_mut().zip(&th) {
                        if s > *t {
                            *h += 1;
                        }
                    }
                },
                |a, b| a.0.merge(b.0),
            )?;
            (c.0, Some(th))
        }
        TieMode::PerReplicate => {
            let c = for_each_draw(
                cfg,
                || (Counts::new(k), Vec::with_capacity(8)),
                |(c, scratch), z| {
                    let s = test.statistic(z, scratch);
                    match test.pvalue(s) {
                        Ok(p) => {
                            for (h, a) in c.hits.iter_mut().zip(alphas) {
                                if p < *a {
                                    *h += 1;
                                }
                            }
                        }
                        Err(_) => c.failures += 1,
                    }
                },
                |a, b| a.0.merge(b.0),
            )?;
            (c.0, None)
        }
    };
    if counts.failures > 0 {
        warnings.push(format!("{} replicates failed and are excluded from the rates", counts.failures));
    }
    let n = cfg.nreps as u64 - counts.failures;
    let nf = n as f64;
    let rates: Vec<f64> = counts.hits.iter().map(|&h| if n > 0 { h as f64 / nf } else { f64::NAN }).collect();
    Ok(TieReport {
        method: test.name(),
        alphas: alphas.to_vec(),
        rejections: counts.hits,
        ratios: rates.iter().zip(alphas).map(|(r, a)| r / a).collect(),
        empirical_rates: rates,
        mc_se: alphas.iter().map(|a| (a * (1.0 - a) / nf).sqrt()).collect(),
        thresholds,
        nreps: n,
        failures: counts.failures,
        mode,
        config: cfg.echo(),
        warnings,
    })
}

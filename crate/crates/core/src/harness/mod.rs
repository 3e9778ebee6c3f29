//! Monte Carlo laboratory: null samplers, type I error rates, survival
//! curves, empirical moments and inflation factors.
//!
//! Replicates are split into fixed-size chunks. Chunk c draws from its own
//! ChaCha8 stream (master seed, stream c), chunks run in parallel, and their
//! accumulators are merged in chunk order, so results depend only on the
//! seed and never on the number of worker threads.

pub mod accum;
pub mod inflation;
pub mod sampler;
pub mod survival;
pub mod tie;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use accum::{CovAccumulator, MomentAccumulator};
pub use inflation::inflation_factor;
pub use sampler::{NullModel, Sampler};
pub use survival::{survival_compare, SurvivalTable};
pub use tie::{empirical_tie, GFisherReplicate, ReplicateTest, TieMode, TieReport};

use crate::error::{Error, Result};
use crate::linalg::CorrMatrix;
use crate::stat::{GFisherDef, Side};
use crate::surrogates::MomentSummary;

/// Replicates per chunk (one RNG stream each).
pub const CHUNK: usize = 4096;
/// Chunks in flight between sequential merges; bounds memory independently of nreps.
const WAVE: usize = 256;
/// Default replicate count for empirical moments.
pub const DEFAULT_MOMENT_REPS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub sigma: CorrMatrix,
    pub nreps: usize,
    pub seed: u64,
    pub model: NullModel,
    pub side: Side,
}

impl SimConfig {
    pub fn new(sigma: CorrMatrix, nreps: usize, seed: u64, model: NullModel, side: Side) -> Result<Self> {
        if nreps == 0 {
            return Err(Error::InvalidInput("nreps must be at least 1".into()));
        }
        if let NullModel::MultivariateT { nu } = model {
            if !(nu > 2.0) {
                return Err(Error::Domain(format!("multivariate t needs nu > 2, got {nu}")));
            }
        }
        Ok(SimConfig { sigma, nreps, seed, model, side })
    }

    pub fn gmm(sigma: CorrMatrix, nreps: usize, seed: u64, side: Side) -> Result<Self> {
        Self::new(sigma, nreps, seed, NullModel::Gmm, side)
    }

    pub fn sampler(&self) -> Result<Sampler> {
        Sampler::new(&self.sigma, self.model)
    }

    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho { n: self.sigma.n(), nreps: self.nreps, seed: self.seed, model: self.model, side: self.side }
    }
}

/// Serializable summary of a configuration, echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n: usize,
    pub nreps: usize,
    pub seed: u64,
    pub model: NullModel,
    pub side: Side,
}

/// RNG for one chunk.
pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Run `body(acc, rng, count)` over ⌈nreps / CHUNK⌉ chunks and merge the
/// per-chunk accumulators in chunk order.
pub fn run_chunked<A, I, B, M>(nreps: usize, seed: u64, init: I, body: B, mut merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    B: Fn(&mut A, &mut ChaCha8Rng, usize) + Sync,
    M: FnMut(&mut A, A),
{
    let nchunks = nreps.div_ceil(CHUNK);
    let mut total = init();
    let mut start = 0;
    while start < nchunks {
        let end = (start + WAVE).min(nchunks);
        let parts: Vec<A> = (start..end)
            .into_par_iter()
            .map(|c| {
                let mut rng = chunk_rng(seed, c);
                let mut acc = init();
                let count = CHUNK.min(nreps - c * CHUNK);
                body(&mut acc, &mut rng, count);
                acc
            })
            .collect();
        for p in parts {
            merge(&mut total, p);
        }
        start = end;
    }
    total
}

/// Per-worker scratch for drawing z-vectors.
pub struct Scratch {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
}

impl Scratch {
    pub fn new(n: usize) -> Self {
        Scratch { u: vec![0.0; n], z: vec![0.0; n] }
    }
}

/// Visit every null draw: `visit(acc, z)` on each z-vector.
pub fn for_each_draw<A, I, V, M>(cfg: &SimConfig, init: I, visit: V, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, &[f64]) + Sync,
    M: FnMut(&mut A, A),
{
    let sampler = cfg.sampler()?;
    let n = sampler.n();
    Ok(run_chunked(
        cfg.nreps,
        cfg.seed,
        init,
        |acc, rng, count| {
            let mut s = Scratch::new(n);
            for _ in 0..count {
                sampler.draw(rng, &mut s.u, &mut s.z);
                visit(acc, &s.z);
            }
        },
        merge,
    ))
}

fn check_def(def: &GFisherDef, cfg: &SimConfig) -> Result<()> {
    if def.n() != cfg.sigma.n() {
        return Err(Error::Dimension(format!("statistic has {} inputs, correlation is {}x{}", def.n(), cfg.sigma.n(), cfg.sigma.n())));
    }
    if def.side != cfg.side {
        return Err(Error::InvalidInput("statistic and simulation disagree on sidedness".into()));
    }
    Ok(())
}

/// Sample moments of T over `cfg.nreps` null draws.
pub fn empirical_moments(def: &GFisherDef, cfg: &SimConfig) -> Result<MomentSummary> {
    if cfg.nreps < 100 {
        return Err(Error::InvalidInput(format!("empirical moments need at least 100 replicates, got {}", cfg.nreps)));
    }
    check_def(def, cfg)?;
    let acc = for_each_draw(
        cfg,
        MomentAccumulator::default,
        |a, z| a.push(def.statistic_from_z(z)),
        |a, b| a.merge(&b),
    )?;
    acc.summary()
}

/// Every simulated statistic value, in replicate order.
pub fn simulate_statistics(def: &GFisherDef, cfg: &SimConfig) -> Result<Vec<f64>> {
    check_def(def, cfg)?;
    for_each_draw(cfg, Vec::new, |v: &mut Vec<f64>, z| v.push(def.statistic_from_z(z)), |a, mut b| a.append(&mut b))
}

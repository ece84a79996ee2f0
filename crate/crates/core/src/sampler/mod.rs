//! MCMC over allocation vectors.
//!
//! * [`gibbs`]: collapsed Gibbs sampling with `k` fixed.
//! * [`vark`]: Gibbs scans plus birth/death of empty components, targeting
//!   the joint posterior of `(k, g)`.
//! * [`hyper`]: random-walk Metropolis updates of `(τ, δ)` and the
//!   per-`k` median summaries used to pick them.

pub mod gibbs;
pub mod hyper;
pub mod vark;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::stats::DEFAULT_BATCHES;

pub use gibbs::{
    gibbs_sweep_fixed_k, run_fixed_k_chain, run_fixed_k_chains, ChainSummary, GibbsKernel,
    PatternFrequencies,
};
pub use hyper::{
    hyper_median_table, mh_update_hyper, run_hyper_chain, suggest_hyper, HyperDraw, HyperRow,
    HyperRun, HyperState, HyperSuggestion, HyperTable, DEFAULT_QUANTILES,
};
pub use vark::{run_vark_chain, vark_sweep, AcceptStats, VarkKernel, VarkSummary};

/// How a fixed-k chain is started.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Init {
    /// Every observation in component 1.
    AllInOne,
    /// Chain `k` starts from the final allocation of chain `k − 1`; chain 1
    /// starts all-in-one. Forces the chains to run one after another.
    #[default]
    WarmStart,
    /// Explicit 0-based labels, widened to each `k` as needed.
    Explicit(Vec<usize>),
}

/// Order in which observations are visited within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scan {
    #[default]
    Systematic,
    /// `n` updates at uniformly drawn indices.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Post-burn-in sweeps.
    pub sweeps: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: Init,
    pub scan: Scan,
    pub batches: usize,
    /// Keep the per-draw occupancy trace in the summary.
    pub keep_trace: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            sweeps: 20_000,
            burnin: 1_000,
            thin: 1,
            seed: 1,
            init: Init::default(),
            scan: Scan::default(),
            batches: DEFAULT_BATCHES,
            keep_trace: true,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(invalid("sweeps", "must be >= 1"));
        }
        if self.thin == 0 {
            return Err(invalid("thin", "must be >= 1"));
        }
        if self.batches < 2 {
            return Err(invalid("batches", "need at least 2 batches"));
        }
        if self.sweeps < self.batches * self.thin {
            return Err(invalid(
                "sweeps",
                format!(
                    "{} sweeps with thin {} cannot fill {} batches",
                    self.sweeps, self.thin, self.batches
                ),
            ));
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        self.sweeps / self.thin
    }

    /// Index of the batch a kept draw belongs to; leading draws that do not
    /// fill a batch map to `None`.
    pub(crate) fn batch_of(&self, draw: usize) -> Option<usize> {
        let kept = self.kept();
        let size = kept / self.batches;
        let skip = kept - size * self.batches;
        draw.checked_sub(skip).map(|d| d / size)
    }
}

/// Stream ids keep chains for different purposes statistically independent.
pub(crate) const VARK_STREAM: u64 = 1 << 40;
pub(crate) const HYPER_STREAM: u64 = 1 << 41;

pub(crate) fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws an index with probability proportional to `exp(log_w[i])`.
/// Overwrites `log_w` with unnormalized linear weights.
#[inline]
pub(crate) fn sample_log_weights<R: Rng + ?Sized>(log_w: &mut [f64], rng: &mut R) -> usize {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for w in log_w.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    let mut u = rng.random::<f64>() * total;
    for (i, w) in log_w.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    // rounding: fall back to the last positive weight
    log_w.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

//! Monte Carlo error and order statistics.

use crate::error::{Error, Result};

pub const DEFAULT_BATCHES: usize = 20;

/// Standard error of the mean of `batch_means` treated as approximately
/// independent replicates: `sd(batch means) / √B`.
pub fn batch_means_se(batch_means: &[f64]) -> f64 {
    let b = batch_means.len();
    if b < 2 {
        return 0.0;
    }
    let mean = batch_means.iter().sum::<f64>() / b as f64;
    let var = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Batch-means standard error of the mean of an MCMC trace.
///
/// The trace is cut into `batches` equal batches; leading draws that do not
/// fill a batch are dropped.
pub fn mc_standard_error(trace: &[f64], batches: usize) -> Result<f64> {
    if batches < 2 || trace.len() < 2 * batches {
        return Err(Error::TraceTooShort {
            len: trace.len(),
            batches,
            min_per_batch: 2,
        });
    }
    let size = trace.len() / batches;
    let skip = trace.len() - size * batches;
    let means: Vec<f64> = trace[skip..]
        .chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    Ok(batch_means_se(&means))
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (the usual "type 7" definition).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let p = p.clamp(0.0, 1.0);
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Total variation distance between two probability vectors (shorter one
/// padded with zeros).
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    0.5 * (0..len)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

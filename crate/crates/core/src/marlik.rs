//! Marginal likelihoods of `k` components from empty-component frequencies.
//!
//! Three estimators turn fixed-k chain output into the sequence `f_1..f_kmax`:
//!
//! * **Bayes-factor chain**: `f_k / f_{k−1} = a_{k,k−1} / (1 − Pr[G*_k | k, x])`
//!   from the `k` chain alone.
//! * **f\***: `f*_{t+1}/f*_t = a_{t+1,t} Σ_k Pr[G*_{t+1}|k,x] / Σ_k Pr[G*_t|k,x]`,
//!   pooled over `k = t+1..kmax`, then `f_k = Σ_t a_kt f*_t`.
//! * **f†**: `f†_{h+1}/f†_h = (h+1) a_{h+1,h} Σ_k Pr[G̃^k_{h+1}|k,x] / Σ_k (k−h) Pr[G̃^k_h|k,x]`,
//!   then `f_k = Σ_h C(k,h) a_kh f†_h`. Requires a label-symmetric prior.
//!
//! Cells never visited by any chain are treated as structural zeros and
//! reported in [`MarlikResult::diagnostics`]; nothing is smoothed.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::model::log_a_kt_unchecked;
use crate::prior::PriorOnK;
use crate::sampler::{ChainSummary, PatternFrequencies};
use crate::special::{ln_binomial, log_normalize, log_sum_exp};
use crate::stats::batch_means_se;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    BfChain,
    FStar,
    FDagger,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::BfChain => "bf",
            Estimator::FStar => "fstar",
            Estimator::FDagger => "fdagger",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bf" | "bf-chain" => Ok(Estimator::BfChain),
            "fstar" => Ok(Estimator::FStar),
            "fdagger" => Ok(Estimator::FDagger),
            other => Err(invalid("estimator", format!("unknown estimator `{other}`"))),
        }
    }
}

/// How the per-chain probabilities are combined in the pooled ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Plain sums over `k`.
    #[default]
    Equal,
    /// Only the `k = t+1` chain enters the ratio for `t`.
    AdjacentOnly,
    /// Each chain's terms weighted by the inverse of their batch-means
    /// variance. Needs chain summaries; treated as `Equal` for exact input.
    InverseVariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarlikResult {
    pub method: Estimator,
    pub kmax: usize,
    pub n: usize,
    /// Normalized `ln f_k`, index `k-1`; `Σ exp = 1`.
    pub log_f: Vec<f64>,
    /// `ln f_k` on the absolute scale, when anchored at the exact `f_1`.
    pub log_f_unnormalized: Option<Vec<f64>>,
    /// `ln f*_t`, `ln f†_h` or, for the Bayes-factor chain, `ln f_k`,
    /// relative to the anchor.
    pub log_partial: Vec<f64>,
    /// `ln B_{k,k−1}` for `k = 2..kmax`, index `k-2`.
    pub log_bf: Vec<f64>,
    pub anchored: bool,
    /// Batch-means standard error of the normalized `f_k`.
    pub se_f: Option<Vec<f64>>,
    pub diagnostics: Vec<String>,
}

impl MarlikResult {
    pub fn f(&self) -> Vec<f64> {
        self.log_f.iter().map(|v| v.exp()).collect()
    }

    /// `ln B_{k,k−1}`
    pub fn log_bayes_factor(&self, k: usize) -> f64 {
        self.log_bf[k - 2]
    }
}

/// Single-chain Bayes factor with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesFactor {
    pub k: usize,
    pub log_bf: f64,
    /// Standard error of `ln B`.
    pub se_log_bf: f64,
    /// Estimated `Pr[G*_k | k, x]`.
    pub prob_last_occupied: f64,
}

/// `ln B_{k,k−1} = ln a_{k,k−1} − ln(1 − Pr[G*_k | k, x])` from the `k` chain.
pub fn bf_empty_component(summary: &ChainSummary, alpha: f64, n: usize) -> Result<BayesFactor> {
    let k = summary.k;
    if k < 2 {
        return Err(invalid("k", "a Bayes factor needs k >= 2"));
    }
    let p = summary.visits_star()[k - 1];
    let se_p = summary.se_star()[k - 1];
    let log_bf = log_bf_from_prob(k, p, alpha, n)?;
    Ok(BayesFactor {
        k,
        log_bf,
        se_log_bf: se_p / (1.0 - p),
        prob_last_occupied: p,
    })
}

fn log_bf_from_prob(k: usize, p: f64, alpha: f64, n: usize) -> Result<f64> {
    if !(p < 1.0) {
        return Err(Error::DegenerateBayesFactor { k });
    }
    Ok(log_a_kt_unchecked(k, k - 1, alpha, n) - (-p).ln_1p())
}

struct Sequence {
    log_partial: Vec<f64>,
    restarted: bool,
    diagnostics: Vec<String>,
}

/// Builds `ln s_1..ln s_len` from ratio terms `s_{i+1}/s_i = e^{c_i} num_i/den_i`.
fn chain_ratios(
    name: &str,
    len: usize,
    visited: impl Fn(usize) -> bool,
    ratio: impl Fn(usize) -> (f64, f64, f64),
) -> Result<Sequence> {
    let start = (1..=len).find(|&i| visited(i)).ok_or(Error::NoVisits)?;
    let mut log_s = vec![f64::NEG_INFINITY; len];
    let mut diagnostics = Vec::new();
    if start > 1 {
        diagnostics.push(format!(
            "{name}_1..{name}_{} never visited; treated as structural zeros",
            start - 1
        ));
    }
    log_s[start - 1] = 0.0;
    let mut restarted = start > 1;
    for i in start..len {
        let (c, num, den) = ratio(i);
        if num > 0.0 && den > 0.0 {
            log_s[i] = log_s[i - 1] + c + num.ln() - den.ln();
        } else if num > 0.0 {
            diagnostics.push(format!(
                "{name}_{i} has no pooled mass against {name}_{}; sequence restarted at {}",
                i + 1,
                i + 1
            ));
            log_s[..i].iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
            log_s[i] = 0.0;
            restarted = true;
        } else {
            let later = (i + 1..=len).any(&visited);
            diagnostics.push(format!(
                "pooled numerator for {name}_{} is zero; sequence truncated at {i}{}",
                i + 1,
                if later { " (later cells were visited)" } else { "" }
            ));
            break;
        }
    }
    Ok(Sequence {
        log_partial: log_s,
        restarted,
        diagnostics,
    })
}

fn check_order(freqs: &[PatternFrequencies]) -> Result<()> {
    if freqs.is_empty() {
        return Err(invalid("summaries", "need at least one chain"));
    }
    for (i, f) in freqs.iter().enumerate() {
        if f.k != i + 1 {
            return Err(Error::MissingSummary {
                kmax: freqs.len(),
                found: f.k,
                position: i,
            });
        }
    }
    Ok(())
}

/// Per-chain weights `w[k-1][cell]` for the pooled sums; `None` = equal.
type Weights = Vec<Vec<f64>>;

fn weight(weights: Option<&Weights>, pooling: Pooling, k: usize, cell: usize) -> f64 {
    match pooling {
        Pooling::AdjacentOnly => (k == cell + 1) as u8 as f64,
        _ => weights.map_or(1.0, |w| w[k - 1][cell - 1]),
    }
}

fn finish(
    method: Estimator,
    n: usize,
    seq: Sequence,
    mut log_f: Vec<f64>,
    log_f1: Option<f64>,
) -> MarlikResult {
    let kmax = log_f.len();
    let anchored = log_f1.is_some() && !seq.restarted;
    let log_f_unnormalized = if anchored {
        let a = log_f1.unwrap_or(0.0);
        Some(log_f.iter().map(|v| v + a).collect())
    } else {
        None
    };
    log_normalize(&mut log_f);
    let log_bf = (2..=kmax).map(|k| log_f[k - 1] - log_f[k - 2]).collect();
    MarlikResult {
        method,
        kmax,
        n,
        log_f,
        log_f_unnormalized,
        log_partial: seq.log_partial,
        log_bf,
        anchored,
        se_f: None,
        diagnostics: seq.diagnostics,
    }
}

fn fstar_core(
    freqs: &[PatternFrequencies],
    alpha: f64,
    n: usize,
    log_f1: Option<f64>,
    pooling: Pooling,
    weights: Option<&Weights>,
) -> Result<MarlikResult> {
    check_order(freqs)?;
    let kmax = freqs.len();
    let pr = |k: usize, t: usize| freqs[k - 1].star[t - 1];
    let seq = chain_ratios(
        "f*",
        kmax,
        |t| (t..=kmax).any(|k| pr(k, t) > 0.0),
        |t| {
            let (mut num, mut den) = (0.0, 0.0);
            for k in t + 1..=kmax {
                let w = weight(weights, pooling, k, t);
                num += w * pr(k, t + 1);
                den += w * pr(k, t);
            }
            (log_a_kt_unchecked(t + 1, t, alpha, n), num, den)
        },
    )?;
    let log_f = (1..=kmax)
        .map(|k| {
            let terms: Vec<f64> = (1..=k)
                .map(|t| log_a_kt_unchecked(k, t, alpha, n) + seq.log_partial[t - 1])
                .collect();
            log_sum_exp(&terms)
        })
        .collect();
    Ok(finish(Estimator::FStar, n, seq, log_f, log_f1))
}

fn fdagger_core(
    freqs: &[PatternFrequencies],
    alpha: f64,
    n: usize,
    log_f1: Option<f64>,
    pooling: Pooling,
    weights: Option<&Weights>,
) -> Result<MarlikResult> {
    check_order(freqs)?;
    let kmax = freqs.len();
    let hmax = kmax.min(n);
    let pr = |k: usize, h: usize| if h <= k.min(n) { freqs[k - 1].tilde[h - 1] } else { 0.0 };
    let seq = chain_ratios(
        "f†",
        hmax,
        |h| (h..=kmax).any(|k| pr(k, h) > 0.0),
        |h| {
            let (mut num, mut den) = (0.0, 0.0);
            for k in h + 1..=kmax {
                let w = weight(weights, pooling, k, h);
                num += w * pr(k, h + 1);
                den += w * (k - h) as f64 * pr(k, h);
            }
            let c = ((h + 1) as f64).ln() + log_a_kt_unchecked(h + 1, h, alpha, n);
            (c, num, den)
        },
    )?;
    let log_f = (1..=kmax)
        .map(|k| {
            let terms: Vec<f64> = (1..=k.min(n))
                .map(|h| ln_binomial(k, h) + log_a_kt_unchecked(k, h, alpha, n) + seq.log_partial[h - 1])
                .collect();
            log_sum_exp(&terms)
        })
        .collect();
    Ok(finish(Estimator::FDagger, n, seq, log_f, log_f1))
}

fn bf_core(freqs: &[PatternFrequencies], alpha: f64, n: usize, log_f1: Option<f64>) -> Result<MarlikResult> {
    check_order(freqs)?;
    let kmax = freqs.len();
    let mut log_f = vec![0.0; kmax];
    for k in 2..=kmax {
        log_f[k - 1] = log_f[k - 2] + log_bf_from_prob(k, freqs[k - 1].star[k - 1], alpha, n)?;
    }
    let seq = Sequence {
        log_partial: log_f.clone(),
        restarted: false,
        diagnostics: Vec::new(),
    };
    Ok(finish(Estimator::BfChain, n, seq, log_f, log_f1))
}

fn estimate_from(
    method: Estimator,
    freqs: &[PatternFrequencies],
    alpha: f64,
    n: usize,
    log_f1: Option<f64>,
    pooling: Pooling,
    weights: Option<&Weights>,
) -> Result<MarlikResult> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    match method {
        Estimator::BfChain => bf_core(freqs, alpha, n, log_f1),
        Estimator::FStar => fstar_core(freqs, alpha, n, log_f1, pooling, weights),
        Estimator::FDagger => fdagger_core(freqs, alpha, n, log_f1, pooling, weights),
    }
}

/// Marginal likelihoods from exact (or externally estimated) pattern
/// probabilities. No standard errors.
pub fn marlik_from_frequencies(
    method: Estimator,
    freqs: &[PatternFrequencies],
    alpha: f64,
    n: usize,
    log_f1: Option<f64>,
    pooling: Pooling,
) -> Result<MarlikResult> {
    estimate_from(method, freqs, alpha, n, log_f1, pooling, None)
}

fn inverse_variance_weights(summaries: &[ChainSummary], method: Estimator) -> Weights {
    // weight for the ratio at cell c uses the SEs of cells c and c+1 in chain k
    summaries
        .iter()
        .map(|s| {
            let se = match method {
                Estimator::FDagger => s.se_tilde(),
                _ => s.se_star(),
            };
            let floor = 1.0 / (s.kept as f64 * s.kept as f64);
            (1..=se.len())
                .map(|c| {
                    let a = se[c - 1];
                    let b = se.get(c).copied().unwrap_or(0.0);
                    1.0 / (a * a + b * b + floor)
                })
                .collect()
        })
        .collect()
}

/// Runs the chosen estimator on chain summaries for `k = 1..kmax` and
/// attaches batch-means standard errors of the normalized `f_k`.
pub fn estimate(
    method: Estimator,
    summaries: &[ChainSummary],
    alpha: f64,
    log_f1: Option<f64>,
    pooling: Pooling,
) -> Result<MarlikResult> {
    let n = summaries.first().map(|s| s.n).ok_or_else(|| invalid("summaries", "need at least one chain"))?;
    let weights = (pooling == Pooling::InverseVariance).then(|| inverse_variance_weights(summaries, method));
    let freqs: Vec<PatternFrequencies> = summaries.iter().map(ChainSummary::frequencies).collect();
    let mut result = estimate_from(method, &freqs, alpha, n, log_f1, pooling, weights.as_ref())?;

    let batches = summaries.iter().map(ChainSummary::batches).min().unwrap_or(0);
    let mut per_batch: Vec<Vec<f64>> = Vec::with_capacity(batches);
    for b in 0..batches {
        let bf: Vec<PatternFrequencies> = summaries.iter().map(|s| s.batch_frequencies(b)).collect();
        if let Ok(r) = estimate_from(method, &bf, alpha, n, None, pooling, weights.as_ref()) {
            per_batch.push(r.f());
        }
    }
    if per_batch.len() < batches {
        result.diagnostics.push(format!(
            "{} of {batches} batches gave no estimate; standard errors use the rest",
            batches - per_batch.len()
        ));
    }
    if per_batch.len() >= 2 {
        let kmax = result.kmax;
        result.se_f = Some(
            (0..kmax)
                .map(|k| batch_means_se(&per_batch.iter().map(|f| f[k]).collect::<Vec<_>>()))
                .collect(),
        );
    }
    Ok(result)
}

pub fn fstar_sequence(summaries: &[ChainSummary], alpha: f64, log_f1: Option<f64>) -> Result<MarlikResult> {
    estimate(Estimator::FStar, summaries, alpha, log_f1, Pooling::Equal)
}

pub fn fdagger_sequence(summaries: &[ChainSummary], alpha: f64, log_f1: Option<f64>) -> Result<MarlikResult> {
    estimate(Estimator::FDagger, summaries, alpha, log_f1, Pooling::Equal)
}

pub fn bf_chain_sequence(summaries: &[ChainSummary], alpha: f64, log_f1: Option<f64>) -> Result<MarlikResult> {
    estimate(Estimator::BfChain, summaries, alpha, log_f1, Pooling::Equal)
}

/// `π(k | x) ∝ π(k) f_k`, normalized.
pub fn posterior_k(marlik: &MarlikResult, prior: &PriorOnK) -> Result<Vec<f64>> {
    posterior_from_log_f(&marlik.log_f, prior)
}

pub fn posterior_from_log_f(log_f: &[f64], prior: &PriorOnK) -> Result<Vec<f64>> {
    if prior.kmax() != log_f.len() {
        return Err(invalid(
            "prior",
            format!("prior covers 1..{} but f covers 1..{}", prior.kmax(), log_f.len()),
        ));
    }
    let mut lp: Vec<f64> = log_f
        .iter()
        .zip(prior.log_weights())
        .map(|(f, p)| f + p)
        .collect();
    log_normalize(&mut lp);
    Ok(lp.into_iter().map(f64::exp).collect())
}

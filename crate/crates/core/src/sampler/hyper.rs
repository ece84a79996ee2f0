//! Empirical-Bayes selection of `(τ, δ)`.
//!
//! The variable-k sampler is extended with random-walk Metropolis updates of
//! `τ` and `δ` under independent priors `(1+τ)⁻¹ ~ Un(0,1)` and
//! `δ ~ Un(0, δ_U)` with `δ_U = (γ−1) s²_x`. The draws are summarized per
//! `k`, and the suggested values are pooled medians over the values of `k`
//! at and after the point where the per-`k` medians level off.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{chain_rng, AcceptStats, ChainConfig, VarkKernel, HYPER_STREAM};
use crate::error::{invalid, Result};
use crate::model::{log_component_marginal, AllocationState, ModelSpec};
use crate::prior::PriorOnK;
use crate::stats::{median, quantile_sorted};

pub const DEFAULT_QUANTILES: [f64; 5] = [0.005, 0.25, 0.5, 0.75, 0.995];

const TARGET_ACCEPT: f64 = 0.3;
const ADAPT_EVERY: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDraw {
    pub k: usize,
    pub tau: f64,
    pub delta: f64,
}

/// Current `(τ, δ)` with proposal scales on `ln τ` and `logit(δ/δ_U)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperState {
    pub tau: f64,
    pub delta: f64,
    pub delta_upper: f64,
    pub step_tau: f64,
    pub step_delta: f64,
    pub accept_tau: AcceptStats,
    pub accept_delta: AcceptStats,
    adapting: bool,
    window_tau: AcceptStats,
    window_delta: AcceptStats,
    rounds: u64,
}

impl HyperState {
    pub fn new(tau: f64, delta: f64, delta_upper: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("tau", "must be > 0"));
        }
        if !(delta_upper > 0.0 && delta_upper.is_finite()) {
            return Err(invalid("delta_upper", "must be > 0"));
        }
        if !(delta > 0.0 && delta < delta_upper) {
            return Err(invalid(
                "delta",
                format!("must lie in (0, {delta_upper}), got {delta}"),
            ));
        }
        Ok(Self {
            tau,
            delta,
            delta_upper,
            step_tau: 0.5,
            step_delta: 0.5,
            accept_tau: AcceptStats::default(),
            accept_delta: AcceptStats::default(),
            adapting: true,
            window_tau: AcceptStats::default(),
            window_delta: AcceptStats::default(),
            rounds: 0,
        })
    }

    /// Upper limit `(γ−1) s²` of the `δ` prior. Needs `γ > 1`.
    pub fn delta_upper_for(gamma: f64, sample_variance: f64) -> Result<f64> {
        if gamma <= 1.0 {
            return Err(invalid("gamma", "the δ prior needs γ > 1"));
        }
        Ok((gamma - 1.0) * sample_variance)
    }

    /// Stops step-size adaptation and resets the acceptance counters.
    pub fn freeze(&mut self) {
        self.adapting = false;
        self.accept_tau = AcceptStats::default();
        self.accept_delta = AcceptStats::default();
    }

    pub fn is_adapting(&self) -> bool {
        self.adapting
    }

    fn adapt(&mut self) {
        if !self.adapting || self.window_tau.proposed < ADAPT_EVERY {
            return;
        }
        self.rounds += 1;
        let gain = 1.0 / (self.rounds as f64).sqrt().max(1.0);
        self.step_tau *= (2.0 * gain * (self.window_tau.rate() - TARGET_ACCEPT)).exp();
        self.step_delta *= (2.0 * gain * (self.window_delta.rate() - TARGET_ACCEPT)).exp();
        self.window_tau = AcceptStats::default();
        self.window_delta = AcceptStats::default();
    }
}

/// `Σ_j ln f(x_j | τ, δ)` over occupied components.
fn log_likelihood(state: &AllocationState, spec: &ModelSpec) -> f64 {
    state
        .stats()
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| log_component_marginal(s, spec))
        .sum()
}

/// Log target on the unconstrained scale `(ln τ, logit(δ/δ_U))`, prior
/// densities and Jacobians included.
fn log_target(state: &AllocationState, spec: &ModelSpec, tau: f64, delta: f64, delta_upper: f64) -> f64 {
    let ll = log_likelihood(state, &spec.with_tau_delta(tau, delta));
    // τ prior 1/(1+τ)², Jacobian τ; δ prior flat, Jacobian δ(1 − δ/δ_U)
    ll - 2.0 * tau.ln_1p() + tau.ln() + delta.ln() + (-delta / delta_upper).ln_1p()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One Metropolis update of `τ` followed by one of `δ`, given the
/// allocation. `spec` supplies `μ`, `γ` and `α`; its `τ, δ` are ignored.
pub fn mh_update_hyper<R: Rng + ?Sized>(
    state: &AllocationState,
    hyper: &mut HyperState,
    spec: &ModelSpec,
    rng: &mut R,
) {
    let du = hyper.delta_upper;
    let current = log_target(state, spec, hyper.tau, hyper.delta, du);

    let z: f64 = StandardNormal.sample(rng);
    let tau_new = (hyper.tau.ln() + hyper.step_tau * z).exp();
    let proposed = if tau_new > 0.0 && tau_new.is_finite() {
        log_target(state, spec, tau_new, hyper.delta, du)
    } else {
        f64::NEG_INFINITY
    };
    let accept = rng.random::<f64>().ln() < proposed - current;
    let current = if accept {
        hyper.tau = tau_new;
        proposed
    } else {
        current
    };
    hyper.accept_tau.record(accept);
    hyper.window_tau.record(accept);

    let z: f64 = StandardNormal.sample(rng);
    let delta_new = du * expit(logit(hyper.delta / du) + hyper.step_delta * z);
    let proposed = if delta_new > 0.0 && delta_new < du {
        log_target(state, spec, hyper.tau, delta_new, du)
    } else {
        f64::NEG_INFINITY
    };
    let accept = rng.random::<f64>().ln() < proposed - current;
    if accept {
        hyper.delta = delta_new;
    }
    hyper.accept_delta.record(accept);
    hyper.window_delta.record(accept);
    hyper.adapt();
}

#[derive(Debug, Clone)]
pub struct HyperRun {
    pub draws: Vec<HyperDraw>,
    pub hyper: HyperState,
    pub k_counts: Vec<u64>,
}

/// Variable-k chain with `(τ, δ)` updated every sweep. Step sizes adapt
/// during burn-in and are frozen afterwards.
pub fn run_hyper_chain(
    data: Arc<[f64]>,
    spec: &ModelSpec,
    prior: &PriorOnK,
    mut hyper: HyperState,
    config: &ChainConfig,
) -> Result<HyperRun> {
    spec.validate()?;
    config.validate()?;
    let n = data.len();
    let mut current = spec.with_tau_delta(hyper.tau, hyper.delta);
    let mut state = AllocationState::all_in_one(data, 1)?;
    let mut kernel = VarkKernel::new(&current, prior, n);
    let mut rng = chain_rng(config.seed, HYPER_STREAM);
    let mut sweep = |state: &mut AllocationState, hyper: &mut HyperState, rng: &mut rand_chacha::ChaCha8Rng| {
        kernel.sweep(state, config.scan, rng);
        mh_update_hyper(state, hyper, spec, rng);
        if hyper.tau != current.tau || hyper.delta != current.delta {
            current = spec.with_tau_delta(hyper.tau, hyper.delta);
            kernel.set_spec(&current, n);
        }
    };
    for _ in 0..config.burnin {
        sweep(&mut state, &mut hyper, &mut rng);
    }
    hyper.freeze();
    let kept = config.kept();
    let mut draws = Vec::with_capacity(kept);
    let mut k_counts = vec![0u64; prior.kmax()];
    for _ in 0..kept {
        for _ in 0..config.thin {
            sweep(&mut state, &mut hyper, &mut rng);
        }
        k_counts[state.k() - 1] += 1;
        draws.push(HyperDraw {
            k: state.k(),
            tau: hyper.tau,
            delta: hyper.delta,
        });
    }
    Ok(HyperRun {
        draws,
        hyper,
        k_counts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperRow {
    pub k: usize,
    pub count: usize,
    pub tau_quantiles: Vec<f64>,
    pub delta_quantiles: Vec<f64>,
    pub tau_median: f64,
    pub delta_median: f64,
}

/// Per-`k` quantiles of the `(τ, δ)` draws.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperTable {
    pub quantiles: Vec<f64>,
    pub rows: Vec<HyperRow>,
    /// `(k, count)` for values of `k` with fewer than `min_draws` draws.
    pub excluded: Vec<(usize, usize)>,
    by_k: BTreeMap<usize, (Vec<f64>, Vec<f64>)>,
}

pub fn hyper_median_table(draws: &[HyperDraw], quantiles: &[f64], min_draws: usize) -> Result<HyperTable> {
    if draws.is_empty() {
        return Err(invalid("draws", "no hyperparameter draws"));
    }
    if quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(invalid("quantiles", "must lie in [0, 1]"));
    }
    let mut grouped: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for d in draws {
        let e = grouped.entry(d.k).or_default();
        e.0.push(d.tau);
        e.1.push(d.delta);
    }
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut by_k = BTreeMap::new();
    for (k, (mut tau, mut delta)) in grouped {
        if tau.len() < min_draws {
            excluded.push((k, tau.len()));
            continue;
        }
        tau.sort_by(f64::total_cmp);
        delta.sort_by(f64::total_cmp);
        rows.push(HyperRow {
            k,
            count: tau.len(),
            tau_quantiles: quantiles.iter().map(|&q| quantile_sorted(&tau, q)).collect(),
            delta_quantiles: quantiles.iter().map(|&q| quantile_sorted(&delta, q)).collect(),
            tau_median: quantile_sorted(&tau, 0.5),
            delta_median: quantile_sorted(&delta, 0.5),
        });
        by_k.insert(k, (tau, delta));
    }
    Ok(HyperTable {
        quantiles: quantiles.to_vec(),
        rows,
        excluded,
        by_k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperSuggestion {
    pub tau: f64,
    pub delta: f64,
    /// Level-off point of the `τ` medians.
    pub k_cutoff_tau: usize,
    /// Level-off point of the `δ` medians.
    pub k_cutoff_delta: usize,
    /// The later of the two.
    pub k_cutoff: usize,
}

/// First row `k*` whose median changes by less than `rel_tol` (relative)
/// on moving to the next tabulated `k`; the last row if none does.
fn level_off(rows: &[HyperRow], med: impl Fn(&HyperRow) -> f64, rel_tol: f64) -> usize {
    rows.windows(2)
        .find(|w| {
            let a = med(&w[0]);
            let b = med(&w[1]);
            (b - a).abs() <= rel_tol * a.abs()
        })
        .map(|w| w[0].k)
        .unwrap_or_else(|| rows.last().map_or(0, |r| r.k))
}

/// Suggests `(τ̂, δ̂)` as medians of the draws pooled over `k` at or beyond
/// each parameter's level-off point.
pub fn suggest_hyper(table: &HyperTable, rel_tol: f64) -> Result<HyperSuggestion> {
    if table.rows.is_empty() {
        return Err(invalid("table", "no value of k has enough draws"));
    }
    let k_tau = level_off(&table.rows, |r| r.tau_median, rel_tol);
    let k_delta = level_off(&table.rows, |r| r.delta_median, rel_tol);
    let pooled = |cut: usize, delta: bool| {
        let v: Vec<f64> = table
            .by_k
            .range(cut..)
            .flat_map(|(_, (t, d))| if delta { d } else { t }.iter().copied())
            .collect();
        median(&v)
    };
    Ok(HyperSuggestion {
        tau: pooled(k_tau, false),
        delta: pooled(k_delta, true),
        k_cutoff_tau: k_tau,
        k_cutoff_delta: k_delta,
        k_cutoff: k_tau.max(k_delta),
    })
}

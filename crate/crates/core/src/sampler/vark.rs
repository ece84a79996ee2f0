use std::sync::Arc;

use rand::Rng;

use super::{chain_rng, ChainConfig, GibbsKernel, VARK_STREAM};
use crate::error::{invalid, Result};
use crate::model::{log_a_kt_unchecked, AllocationState, ModelSpec};
use crate::prior::PriorOnK;
use crate::stats::batch_means_se;

/// Acceptance bookkeeping for one kind of Metropolis move.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AcceptStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl AcceptStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub(crate) fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }
}

/// Kernel for the joint posterior of `(k, g)`.
///
/// Each sweep is one Gibbs scan at the current `k` followed by a
/// birth/death move on empty components: birth inserts an empty component
/// at a uniformly chosen position, death deletes a uniformly chosen empty
/// component. Both are proposed with probability ½. The data marginal is
/// unchanged by these moves, so the acceptance ratio only involves the prior
/// on `k`, the allocation-prior ratio `a_{k+1,k}` and the proposal
/// probabilities:
///
/// ```text
/// birth k → k+1:  π(k+1)/π(k) · a_{k+1,k} · (k+1)/e'
/// death k → k−1:  π(k−1)/π(k) / a_{k,k−1} · e/k
/// ```
///
/// with `e` the number of empty components before a death and `e'` after a
/// birth.
#[derive(Debug, Clone)]
pub struct VarkKernel {
    gibbs: GibbsKernel,
    prior: PriorOnK,
    /// `ln a_{k+1,k}` at index `k`.
    ln_a_up: Vec<f64>,
    pub birth: AcceptStats,
    pub death: AcceptStats,
}

impl VarkKernel {
    pub fn new(spec: &ModelSpec, prior: &PriorOnK, n: usize) -> Self {
        let kmax = prior.kmax();
        let ln_a_up = (0..=kmax)
            .map(|k| if k == 0 { 0.0 } else { log_a_kt_unchecked(k + 1, k, spec.alpha, n) })
            .collect();
        Self {
            gibbs: GibbsKernel::new(spec, n),
            prior: prior.clone(),
            ln_a_up,
            birth: AcceptStats::default(),
            death: AcceptStats::default(),
        }
    }

    pub fn kmax(&self) -> usize {
        self.prior.kmax()
    }

    pub(crate) fn set_spec(&mut self, spec: &ModelSpec, n: usize) {
        self.gibbs = GibbsKernel::new(spec, n);
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, state: &mut AllocationState, config_scan: super::Scan, rng: &mut R) -> usize {
        self.gibbs.sweep(state, config_scan, rng);
        self.dimension_move(state, rng);
        state.k()
    }

    /// Log acceptance ratio of inserting an empty component into a state
    /// with `k` components and `empties` empty ones.
    pub fn log_birth_ratio(&self, k: usize, empties: usize) -> f64 {
        self.prior.ln_pmf(k + 1) - self.prior.ln_pmf(k) + self.ln_a_up[k] + ((k + 1) as f64).ln()
            - ((empties + 1) as f64).ln()
    }

    /// Log acceptance ratio of deleting one of `empties` empty components
    /// from a state with `k` components.
    pub fn log_death_ratio(&self, k: usize, empties: usize) -> f64 {
        self.prior.ln_pmf(k - 1) - self.prior.ln_pmf(k) - self.ln_a_up[k - 1] + (empties as f64).ln()
            - (k as f64).ln()
    }

    pub fn dimension_move<R: Rng + ?Sized>(&mut self, state: &mut AllocationState, rng: &mut R) {
        let k = state.k();
        let empties = state.empty_components();
        if rng.random_bool(0.5) {
            if k >= self.kmax() {
                self.birth.record(false);
                return;
            }
            let pos = rng.random_range(0..=k);
            let accept = rng.random::<f64>().ln() < self.log_birth_ratio(k, empties);
            if accept {
                state.insert_empty(pos);
            }
            self.birth.record(accept);
        } else {
            if k == 1 || empties == 0 {
                self.death.record(false);
                return;
            }
            let which = rng.random_range(0..empties);
            let pos = state
                .stats()
                .iter()
                .enumerate()
                .filter(|(_, s)| s.is_empty())
                .nth(which)
                .map(|(j, _)| j)
                .expect("counted empties");
            let accept = rng.random::<f64>().ln() < self.log_death_ratio(k, empties);
            if accept {
                state.remove_empty(pos);
            }
            self.death.record(accept);
        }
    }
}

/// One variable-k sweep. Returns the new number of components.
pub fn vark_sweep<R: Rng + ?Sized>(
    state: &mut AllocationState,
    spec: &ModelSpec,
    prior: &PriorOnK,
    rng: &mut R,
) -> usize {
    VarkKernel::new(spec, prior, state.n()).sweep(state, super::Scan::Systematic, rng)
}

#[derive(Debug, Clone)]
pub struct VarkSummary {
    pub kmax: usize,
    pub kept: usize,
    /// Kept draws at each `k`, index `k-1`.
    pub k_counts: Vec<u64>,
    pub batch_size: usize,
    pub batch_k_counts: Vec<Vec<u64>>,
    pub k_trace: Vec<u32>,
    pub birth: AcceptStats,
    pub death: AcceptStats,
    pub final_state: AllocationState,
}

impl VarkSummary {
    /// Estimated posterior of `k`.
    pub fn posterior(&self) -> Vec<f64> {
        self.k_counts
            .iter()
            .map(|&c| c as f64 / self.kept as f64)
            .collect()
    }

    pub fn se(&self) -> Vec<f64> {
        (0..self.kmax)
            .map(|k| {
                let m: Vec<f64> = self
                    .batch_k_counts
                    .iter()
                    .map(|b| b[k] as f64 / self.batch_size as f64)
                    .collect();
                batch_means_se(&m)
            })
            .collect()
    }
}

/// Runs the variable-k sampler from the all-in-one allocation with `k = 1`.
pub fn run_vark_chain(
    data: Arc<[f64]>,
    spec: &ModelSpec,
    prior: &PriorOnK,
    config: &ChainConfig,
) -> Result<VarkSummary> {
    spec.validate()?;
    config.validate()?;
    let kmax = prior.kmax();
    if kmax == 0 {
        return Err(invalid("kmax", "must be >= 1"));
    }
    let n = data.len();
    let mut state = AllocationState::all_in_one(data, 1)?;
    let mut rng = chain_rng(config.seed, VARK_STREAM);
    let mut kernel = VarkKernel::new(spec, prior, n);
    for _ in 0..config.burnin {
        kernel.sweep(&mut state, config.scan, &mut rng);
    }
    let kept = config.kept();
    let batch_size = kept / config.batches;
    let mut k_counts = vec![0u64; kmax];
    let mut batch_k_counts = vec![vec![0u64; kmax]; config.batches];
    let mut k_trace = Vec::with_capacity(if config.keep_trace { kept } else { 0 });
    for draw in 0..kept {
        for _ in 0..config.thin {
            kernel.sweep(&mut state, config.scan, &mut rng);
        }
        let k = state.k();
        k_counts[k - 1] += 1;
        if let Some(b) = config.batch_of(draw) {
            batch_k_counts[b][k - 1] += 1;
        }
        if config.keep_trace {
            k_trace.push(k as u32);
        }
    }
    Ok(VarkSummary {
        kmax,
        kept,
        k_counts,
        batch_size,
        batch_k_counts,
        k_trace,
        birth: kernel.birth,
        death: kernel.death,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{log_f_g_given_k, log_f_x_given_kg};

    fn setup() -> (Arc<[f64]>, ModelSpec, PriorOnK) {
        (
            vec![-1.0, -0.8, 1.1, 1.5, 1.3].into(),
            ModelSpec::new(1.0, 0.0, 0.2, 2.0, 0.4).unwrap(),
            PriorOnK::poisson1(3).unwrap(),
        )
    }

    #[test]
    fn death_without_empty_components_is_rejected() {
        let (data, spec, prior) = setup();
        let mut kernel = VarkKernel::new(&spec, &prior, data.len());
        let mut rng = chain_rng(1, 0);
        for _ in 0..200 {
            let mut s = AllocationState::new(data.clone(), vec![0, 0, 1, 1, 1], 2).unwrap();
            kernel.dimension_move(&mut s, &mut rng);
            assert!(s.k() >= 2);
        }
        assert_eq!(kernel.death.accepted, 0);
        assert!(kernel.death.proposed > 0);
    }

    #[test]
    fn birth_ratio_matches_target_ratio() {
        let (data, spec, prior) = setup();
        let kernel = VarkKernel::new(&spec, &prior, data.len());
        let s = AllocationState::new(data.clone(), vec![0, 0, 1, 1, 1], 2).unwrap();
        let mut t = s.clone();
        t.insert_empty(1);
        let target = |st: &AllocationState| {
            prior.ln_pmf(st.k()) + log_f_g_given_k(&st.counts(), spec.alpha).unwrap() + log_f_x_given_kg(st, &spec)
        };
        // f(x|k,g) is untouched by the move
        assert_eq!(log_f_x_given_kg(&s, &spec), log_f_x_given_kg(&t, &spec));
        // proposal: birth picks one of k+1 = 3 positions, death one of e' = 1 empties
        let expected = target(&t) - target(&s) + 3f64.ln() - 1f64.ln();
        assert!((kernel.log_birth_ratio(2, 0) - expected).abs() < 1e-12);
        assert!((kernel.log_death_ratio(3, 1) + expected).abs() < 1e-12);
        let expected_a = crate::model::log_a_kt(3, 2, 1.0, 5).unwrap();
        assert!((kernel.ln_a_up[2] - expected_a).abs() < 1e-15);
    }

    #[test]
    fn frequencies_sum_to_one_and_respect_kmax() {
        let (data, spec, prior) = setup();
        let cfg = ChainConfig {
            sweeps: 5_000,
            burnin: 100,
            ..Default::default()
        };
        let s = run_vark_chain(data, &spec, &prior, &cfg).unwrap();
        assert!((s.posterior().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.k_trace.iter().all(|&k| (1..=3).contains(&k)));
        assert!(s.birth.accepted > 0 && s.death.accepted > 0);
    }
}

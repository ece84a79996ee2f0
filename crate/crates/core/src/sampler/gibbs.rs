use std::sync::Arc;

use rand::Rng;

use super::{chain_rng, sample_log_weights, ChainConfig, Init, Scan};
use crate::error::{invalid, Result};
use crate::model::{AllocationState, ComponentTerm, ModelSpec, OccupancyPattern, PredictiveCache, SuffStats};
use crate::stats::batch_means_se;

/// Collapsed Gibbs kernel for a fixed number of components.
///
/// The full conditional of `g_i` is `∝ (α + n_j^{−i}) · p(x_i | x_{−i} in j)`
/// over all `k` components, empty ones included.
#[derive(Debug, Clone)]
pub struct GibbsKernel {
    cache: PredictiveCache,
    ln_weight: Vec<f64>,
    terms: Vec<ComponentTerm>,
    empty: ComponentTerm,
    scratch: Vec<f64>,
}

impl GibbsKernel {
    pub fn new(spec: &ModelSpec, n: usize) -> Self {
        let cache = PredictiveCache::new(spec, n);
        let empty = cache.component(&SuffStats::default());
        Self {
            ln_weight: (0..=n).map(|m| (spec.alpha + m as f64).ln()).collect(),
            cache,
            terms: Vec::new(),
            empty,
            scratch: Vec::new(),
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        self.cache.spec()
    }

    /// Log full-conditional weights (unnormalized) of observation `i` over
    /// the `k` components, with `i` removed from its component.
    pub fn conditional_log_weights(&self, state: &AllocationState, i: usize) -> Vec<f64> {
        let mut s = state.clone();
        s.detach(i);
        let x = state.data()[i];
        s.stats()
            .iter()
            .map(|st| self.ln_weight[st.count()] + self.cache.log_predictive(x, &self.cache.component(st)))
            .collect()
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, state: &mut AllocationState, scan: Scan, rng: &mut R) {
        let k = state.k();
        if k == 1 {
            return;
        }
        self.terms.clear();
        self.terms
            .extend(state.stats().iter().map(|s| self.cache.component(s)));
        self.scratch.resize(k, 0.0);
        let n = state.n();
        match scan {
            Scan::Systematic => (0..n).for_each(|i| self.update(state, i, rng)),
            Scan::Random => (0..n).for_each(|_| {
                let i = rng.random_range(0..n);
                self.update(state, i, rng)
            }),
        }
        debug_assert!(state.check_consistency(1e-8));
    }

    #[inline]
    fn update<R: Rng + ?Sized>(&mut self, state: &mut AllocationState, i: usize, rng: &mut R) {
        let x = state.data()[i];
        let from = state.detach(i);
        self.terms[from] = self.cache.component(&state.stats()[from]);
        let empty_w = self.ln_weight[0] + self.cache.log_predictive(x, &self.empty);
        for (j, st) in state.stats().iter().enumerate() {
            self.scratch[j] = match st.count() {
                0 => empty_w,
                m => self.ln_weight[m] + self.cache.log_predictive(x, &self.terms[j]),
            };
        }
        let to = sample_log_weights(&mut self.scratch, rng);
        state.attach(i, to);
        self.terms[to] = self.cache.component(&state.stats()[to]);
    }
}

/// One systematic-scan Gibbs sweep.
pub fn gibbs_sweep_fixed_k<R: Rng + ?Sized>(state: &mut AllocationState, spec: &ModelSpec, rng: &mut R) {
    GibbsKernel::new(spec, state.n()).sweep(state, Scan::Systematic, rng);
}

/// Pattern probabilities for one `k`, either estimated or exact.
///
/// `star[t-1] = Pr[G*_t | k, x]` for `t = 1..k`;
/// `tilde[h-1] = Pr[G̃^k_h | k, x]` for `h = 1..min(k, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternFrequencies {
    pub k: usize,
    pub star: Vec<f64>,
    pub tilde: Vec<f64>,
}

/// Output of a fixed-k chain.
#[derive(Debug, Clone)]
pub struct ChainSummary {
    pub k: usize,
    pub n: usize,
    pub kept: usize,
    /// Kept draws with the highest occupied component equal to `t`, index `t-1`.
    pub star_counts: Vec<u64>,
    /// Kept draws with exactly `h` occupied components, index `h-1`.
    pub tilde_counts: Vec<u64>,
    pub batch_size: usize,
    pub batch_star: Vec<Vec<u64>>,
    pub batch_tilde: Vec<Vec<u64>>,
    pub pattern_trace: Vec<OccupancyPattern>,
    pub final_state: AllocationState,
}

impl ChainSummary {
    pub fn visits_star(&self) -> Vec<f64> {
        freq(&self.star_counts, self.kept)
    }

    pub fn visits_tilde(&self) -> Vec<f64> {
        freq(&self.tilde_counts, self.kept)
    }

    pub fn se_star(&self) -> Vec<f64> {
        self.batch_se(&self.batch_star, self.star_counts.len())
    }

    pub fn se_tilde(&self) -> Vec<f64> {
        self.batch_se(&self.batch_tilde, self.tilde_counts.len())
    }

    fn batch_se(&self, batches: &[Vec<u64>], len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| {
                let means: Vec<f64> = batches
                    .iter()
                    .map(|b| b[i] as f64 / self.batch_size as f64)
                    .collect();
                batch_means_se(&means)
            })
            .collect()
    }

    pub fn batches(&self) -> usize {
        self.batch_star.len()
    }

    pub fn frequencies(&self) -> PatternFrequencies {
        PatternFrequencies {
            k: self.k,
            star: self.visits_star(),
            tilde: self.visits_tilde(),
        }
    }

    pub fn batch_frequencies(&self, b: usize) -> PatternFrequencies {
        PatternFrequencies {
            k: self.k,
            star: freq(&self.batch_star[b], self.batch_size),
            tilde: freq(&self.batch_tilde[b], self.batch_size),
        }
    }
}

fn freq(counts: &[u64], total: usize) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Runs a fixed-k chain from `state` (which fixes `k`). The RNG stream is
/// keyed by `(config.seed, k)`.
pub fn run_fixed_k_chain(state: AllocationState, spec: &ModelSpec, config: &ChainConfig) -> Result<ChainSummary> {
    spec.validate()?;
    config.validate()?;
    let mut state = state;
    let k = state.k();
    let n = state.n();
    let mut rng = chain_rng(config.seed, k as u64);
    let mut kernel = GibbsKernel::new(spec, n);

    for _ in 0..config.burnin {
        kernel.sweep(&mut state, config.scan, &mut rng);
    }

    let kept = config.kept();
    let batch_size = kept / config.batches;
    let hmax = k.min(n);
    let mut star_counts = vec![0u64; k];
    let mut tilde_counts = vec![0u64; hmax];
    let mut batch_star = vec![vec![0u64; k]; config.batches];
    let mut batch_tilde = vec![vec![0u64; hmax]; config.batches];
    let mut pattern_trace = Vec::with_capacity(if config.keep_trace { kept } else { 0 });

    for draw in 0..kept {
        for _ in 0..config.thin {
            kernel.sweep(&mut state, config.scan, &mut rng);
        }
        let p = state.pattern();
        star_counts[p.t - 1] += 1;
        tilde_counts[p.h - 1] += 1;
        if let Some(b) = config.batch_of(draw) {
            batch_star[b][p.t - 1] += 1;
            batch_tilde[b][p.h - 1] += 1;
        }
        if config.keep_trace {
            pattern_trace.push(p);
        }
    }

    Ok(ChainSummary {
        k,
        n,
        kept,
        star_counts,
        tilde_counts,
        batch_size,
        batch_star,
        batch_tilde,
        pattern_trace,
        final_state: state,
    })
}

fn initial_state(data: &Arc<[f64]>, k: usize, init: &Init) -> Result<AllocationState> {
    match init {
        Init::AllInOne | Init::WarmStart => AllocationState::all_in_one(data.clone(), k),
        Init::Explicit(labels) => {
            let need = labels.iter().max().map_or(1, |m| m + 1);
            let mut s = AllocationState::new(data.clone(), labels.clone(), need.max(1))?;
            if need > k {
                return Err(invalid(
                    "init",
                    format!("explicit allocation uses {need} components but k = {k}"),
                ));
            }
            s.extend_to(k);
            Ok(s)
        }
    }
}

/// Runs fixed-k chains for `k = 1..=kmax`.
///
/// With [`Init::WarmStart`] the chains run in sequence, each starting from
/// the previous final allocation. Otherwise up to `jobs` chains run on
/// separate threads; results are always returned in order of `k`.
pub fn run_fixed_k_chains(
    data: Arc<[f64]>,
    spec: &ModelSpec,
    kmax: usize,
    config: &ChainConfig,
    jobs: usize,
) -> Result<Vec<ChainSummary>> {
    if kmax == 0 {
        return Err(invalid("kmax", "must be >= 1"));
    }
    config.validate()?;
    if matches!(config.init, Init::WarmStart) || jobs <= 1 {
        let mut out: Vec<ChainSummary> = Vec::with_capacity(kmax);
        for k in 1..=kmax {
            let start = match (&config.init, out.last()) {
                (Init::WarmStart, Some(prev)) => {
                    let mut s = prev.final_state.clone();
                    s.extend_to(k);
                    s
                }
                _ => initial_state(&data, k, &config.init)?,
            };
            out.push(run_fixed_k_chain(start, spec, config)?);
        }
        return Ok(out);
    }

    let next = std::sync::atomic::AtomicUsize::new(1);
    let mut results: Vec<Option<Result<ChainSummary>>> = (0..kmax).map(|_| None).collect();
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(kmax) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if k > kmax {
                    break;
                }
                let r = initial_state(&data, k, &config.init).and_then(|s| run_fixed_k_chain(s, spec, config));
                slots.lock().expect("poisoned")[k - 1] = Some(r);
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every k is scheduled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{log_f_g_given_k, log_f_x_given_kg, log_joint};
    use crate::stats::total_variation;

    fn toy() -> (Arc<[f64]>, ModelSpec) {
        (
            vec![-1.1, -0.7, 1.2, 1.6].into(),
            ModelSpec::new(1.0, 0.0, 0.2, 2.0, 0.5).unwrap(),
        )
    }

    #[test]
    fn single_component_is_a_no_op() {
        let (data, spec) = toy();
        let mut s = AllocationState::all_in_one(data, 1).unwrap();
        let mut rng = chain_rng(1, 1);
        gibbs_sweep_fixed_k(&mut s, &spec, &mut rng);
        assert_eq!(s.labels(), &[0, 0, 0, 0]);
    }

    #[test]
    fn full_conditional_matches_joint_ratios() {
        let (data, spec) = toy();
        let kernel = GibbsKernel::new(&spec, data.len());
        let state = AllocationState::new(data, vec![0, 2, 1, 1], 3).unwrap();
        for i in 0..state.n() {
            let w = kernel.conditional_log_weights(&state, i);
            for j in 0..3 {
                let mut a = state.clone();
                a.reassign(i, 0);
                let mut b = state.clone();
                b.reassign(i, j);
                let joint = log_joint(&b, &spec) - log_joint(&a, &spec);
                assert!((joint - (w[j] - w[0])).abs() < 1e-10);
            }
        }
    }

    fn encode(labels: &[usize], k: usize) -> usize {
        labels.iter().rev().fold(0, |acc, &l| acc * k + l)
    }

    #[test]
    fn gibbs_matches_exact_allocation_posterior() {
        let (data, spec) = toy();
        let k: usize = 2;
        let n = data.len();
        let states = k.pow(n as u32);
        let mut exact = vec![0.0; states];
        for (code, e) in exact.iter_mut().enumerate() {
            let labels: Vec<usize> = (0..n).map(|i| (code / k.pow(i as u32)) % k).collect();
            let s = AllocationState::new(data.clone(), labels, k).unwrap();
            *e = (log_f_g_given_k(&s.counts(), spec.alpha).unwrap() + log_f_x_given_kg(&s, &spec)).exp();
        }
        let z: f64 = exact.iter().sum();
        exact.iter_mut().for_each(|e| *e /= z);

        let mut s = AllocationState::all_in_one(data, k).unwrap();
        let mut rng = chain_rng(5, 2);
        let mut kernel = GibbsKernel::new(&spec, n);
        let mut hits = vec![0.0; states];
        let sweeps = 100_000;
        for _ in 0..sweeps {
            kernel.sweep(&mut s, Scan::Systematic, &mut rng);
            hits[encode(s.labels(), k)] += 1.0 / sweeps as f64;
        }
        let tv = total_variation(&exact, &hits);
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn random_scan_also_targets_posterior() {
        let (data, spec) = toy();
        let k = 2;
        let mut s = AllocationState::all_in_one(data.clone(), k).unwrap();
        let mut rng = chain_rng(6, 2);
        let mut kernel = GibbsKernel::new(&spec, data.len());
        let mut together = 0usize;
        let sweeps = 50_000;
        for _ in 0..sweeps {
            kernel.sweep(&mut s, Scan::Random, &mut rng);
            together += (s.labels()[0] == s.labels()[1]) as usize;
        }
        // Observations 0 and 1 sit close together.
        assert!(together as f64 / sweeps as f64 > 0.7);
    }

    #[test]
    fn k1_summary_is_degenerate() {
        let (data, spec) = toy();
        let cfg = ChainConfig {
            sweeps: 200,
            burnin: 10,
            ..Default::default()
        };
        let s = run_fixed_k_chain(AllocationState::all_in_one(data, 1).unwrap(), &spec, &cfg).unwrap();
        assert_eq!(s.visits_star(), vec![1.0]);
        assert_eq!(s.visits_tilde(), vec![1.0]);
        assert_eq!(s.se_star(), vec![0.0]);
    }

    #[test]
    fn frequencies_partition_and_are_deterministic() {
        let (data, spec) = toy();
        let cfg = ChainConfig {
            sweeps: 2_000,
            burnin: 100,
            seed: 9,
            ..Default::default()
        };
        let a = run_fixed_k_chains(data.clone(), &spec, 4, &cfg, 1).unwrap();
        let b = run_fixed_k_chains(data.clone(), &spec, 4, &cfg, 1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.pattern_trace, y.pattern_trace);
            assert!((x.visits_star().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((x.visits_tilde().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let batched: u64 = x.batch_star.iter().flatten().sum();
            assert_eq!(batched as usize, x.batch_size * x.batches());
        }
        let cold = ChainConfig {
            init: Init::AllInOne,
            ..cfg.clone()
        };
        let serial = run_fixed_k_chains(data.clone(), &spec, 4, &cold, 1).unwrap();
        let parallel = run_fixed_k_chains(data, &spec, 4, &cold, 3).unwrap();
        for (x, y) in serial.iter().zip(&parallel) {
            assert_eq!(x.k, y.k);
            assert_eq!(x.pattern_trace, y.pattern_trace);
        }
    }

    #[test]
    fn explicit_init_is_checked() {
        let (data, _) = toy();
        assert!(initial_state(&data, 2, &Init::Explicit(vec![0, 1, 2, 0])).is_err());
        let s = initial_state(&data, 4, &Init::Explicit(vec![0, 1, 1, 0])).unwrap();
        assert_eq!(s.k(), 4);
    }
}

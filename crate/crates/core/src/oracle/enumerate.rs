use crate::error::{invalid, Error, Result};
use crate::model::{log_component_marginal, ModelSpec, OccupancyPattern, SuffStats};
use crate::prior::PriorOnK;
use crate::sampler::PatternFrequencies;
use crate::special::{ln_gamma, LogSumAcc};

/// Largest total number of allocation vectors enumerated over all `k`.
pub const MAX_TERMS: f64 = 2e7;

/// Exact quantities obtained by summing over every allocation vector.
#[derive(Debug, Clone)]
pub struct EnumerationResult {
    pub n: usize,
    pub kmax: usize,
    /// `ln f_k`, index `k-1`.
    pub log_f: Vec<f64>,
    /// `ln f*_t`, index `t-1`.
    pub log_fstar: Vec<f64>,
    /// `ln f†_h`, index `h-1`, `h = 1..min(kmax, n)`.
    pub log_fdagger: Vec<f64>,
    /// `Pr[G*_t | k, x]` at `[k-1][t-1]`.
    pub prob_star: Vec<Vec<f64>>,
    /// `Pr[G̃^k_h | k, x]` at `[k-1][h-1]`.
    pub prob_tilde: Vec<Vec<f64>>,
    /// Posterior over `G_k` indexed by `Σ_i g_i k^i` (0-based labels), if
    /// requested.
    pub allocation_posterior: Option<Vec<Vec<f64>>>,
}

impl EnumerationResult {
    pub fn frequencies(&self) -> Vec<PatternFrequencies> {
        (0..self.kmax)
            .map(|i| PatternFrequencies {
                k: i + 1,
                star: self.prob_star[i].clone(),
                tilde: self.prob_tilde[i].clone(),
            })
            .collect()
    }

    /// Normalized `f_k`.
    pub fn normalized_f(&self) -> Vec<f64> {
        let mut v = self.log_f.clone();
        crate::special::log_normalize(&mut v);
        v.into_iter().map(f64::exp).collect()
    }
}

struct PerK {
    log_f: f64,
    star: Vec<f64>,
    tilde: Vec<f64>,
    joint: Option<Vec<f64>>,
}

/// Walks every `g ∈ G_k` in odometer order. Only the components touched by
/// a step are recomputed, and always from their member values, so the
/// per-term cost is amortized `O(n)` and free of accumulated drift.
fn enumerate_k(data: &[f64], k: usize, spec: &ModelSpec, materialize: bool) -> PerK {
    let n = data.len();
    let alpha = spec.alpha;
    let lg_alpha = ln_gamma(alpha);
    let lg_count: Vec<f64> = (0..=n).map(|c| ln_gamma(alpha + c as f64) - lg_alpha).collect();
    let base = ln_gamma(k as f64 * alpha) - ln_gamma(k as f64 * alpha + n as f64);

    let mut labels = vec![0usize; n];
    let mut counts = vec![0usize; k];
    counts[0] = n;
    let mut marg = vec![0.0; k];
    let members = |labels: &[usize], j: usize| -> Vec<f64> {
        data.iter()
            .zip(labels)
            .filter(|(_, &l)| l == j)
            .map(|(&x, _)| x)
            .collect()
    };
    marg[0] = log_component_marginal(&SuffStats::recompute(data), spec);

    let mut total = LogSumAcc::new();
    let mut star = vec![LogSumAcc::new(); k];
    let mut tilde = vec![LogSumAcc::new(); k.min(n)];
    let mut joint = materialize.then(|| Vec::with_capacity(k.pow(n as u32)));

    loop {
        let term = base
            + counts.iter().map(|&c| lg_count[c]).sum::<f64>()
            + marg.iter().sum::<f64>();
        let p = OccupancyPattern::from_counts(counts.iter().copied());
        total.add(term);
        star[p.t - 1].add(term);
        tilde[p.h - 1].add(term);
        if let Some(j) = joint.as_mut() {
            j.push(term);
        }

        // advance the odometer
        let mut i = 0;
        loop {
            if i == n {
                let log_f = total.value();
                let norm = |a: &LogSumAcc| (a.value() - log_f).exp();
                return PerK {
                    log_f,
                    star: star.iter().map(norm).collect(),
                    tilde: tilde.iter().map(norm).collect(),
                    joint: joint.map(|j| j.into_iter().map(|t: f64| (t - log_f).exp()).collect()),
                };
            }
            let old = labels[i];
            let new = if old + 1 < k { old + 1 } else { 0 };
            labels[i] = new;
            counts[old] -= 1;
            counts[new] += 1;
            for j in [old, new] {
                marg[j] = log_component_marginal(&SuffStats::recompute(&members(&labels, j)), spec);
            }
            if new != 0 {
                break;
            }
            i += 1;
        }
    }
}

/// Exact `f_k`, `f*_t`, `f†_h` and pattern probabilities for `k = 1..=kmax`.
pub fn enumerate_exact(data: &[f64], kmax: usize, spec: &ModelSpec, materialize: bool) -> Result<EnumerationResult> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if kmax == 0 {
        return Err(invalid("kmax", "must be >= 1"));
    }
    let n = data.len();
    let terms: f64 = (1..=kmax).map(|k| (k as f64).powi(n as i32)).sum();
    if terms > MAX_TERMS {
        return Err(Error::InstanceTooLarge {
            terms,
            limit: MAX_TERMS,
        });
    }
    let per_k: Vec<PerK> = (1..=kmax).map(|k| enumerate_k(data, k, spec, materialize)).collect();
    let log_f: Vec<f64> = per_k.iter().map(|p| p.log_f).collect();
    // f*_t is the G*_t slice of f_t; f†_h the G̃^h_h slice of f_h
    let log_fstar = (1..=kmax)
        .map(|t| log_f[t - 1] + per_k[t - 1].star[t - 1].ln())
        .collect();
    let log_fdagger = (1..=kmax.min(n))
        .map(|h| log_f[h - 1] + per_k[h - 1].tilde[h - 1].ln())
        .collect();
    let allocation_posterior = materialize.then(|| per_k.iter().map(|p| p.joint.clone().unwrap_or_default()).collect());
    Ok(EnumerationResult {
        n,
        kmax,
        log_f,
        log_fstar,
        log_fdagger,
        prob_star: per_k.iter().map(|p| p.star.clone()).collect(),
        prob_tilde: per_k.iter().map(|p| p.tilde.clone()).collect(),
        allocation_posterior,
    })
}

/// Exact posterior of `k` on an enumerable instance.
pub fn exact_posterior_k(data: &[f64], spec: &ModelSpec, prior: &PriorOnK) -> Result<Vec<f64>> {
    let e = enumerate_exact(data, prior.kmax(), spec, false)?;
    crate::marlik::posterior_from_log_f(&e.log_f, prior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{log_a_kt, log_predictive};
    use crate::special::{ln_binomial, log_sum_exp};

    fn spec() -> ModelSpec {
        ModelSpec::new(1.0, 0.0, 0.2, 2.0, 0.5).unwrap()
    }

    #[test]
    fn single_observation_gives_prior_predictive() {
        let e = enumerate_exact(&[0.7], 4, &spec(), false).unwrap();
        let want = log_predictive(0.7, &SuffStats::default(), &spec());
        for lf in &e.log_f {
            assert!((lf - want).abs() < 1e-13);
        }
    }

    #[test]
    fn anchors_agree_at_one() {
        let e = enumerate_exact(&[0.1, 2.0, 2.2], 3, &spec(), false).unwrap();
        assert_eq!(e.log_f[0], e.log_fstar[0]);
        assert_eq!(e.log_f[0], e.log_fdagger[0]);
    }

    #[test]
    fn n3_k2_satisfies_recursion() {
        let x = [0.1, 2.0, 2.2];
        let e = enumerate_exact(&x, 2, &spec(), true).unwrap();
        assert_eq!(e.allocation_posterior.as_ref().unwrap()[1].len(), 8);
        let rhs = log_sum_exp(&[log_a_kt(2, 1, 1.0, 3).unwrap() + e.log_f[0], e.log_fstar[1]]);
        assert!((e.log_f[1] - rhs).abs() < 1e-12);
        let total: f64 = e.allocation_posterior.unwrap()[1].iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn representations_agree() {
        let x = [-1.0, -0.6, 0.9, 1.4, 1.1, 3.0];
        let e = enumerate_exact(&x, 3, &spec(), false).unwrap();
        for k in 1..=3usize {
            let via_star: Vec<f64> = (1..=k)
                .map(|t| log_a_kt(k, t, 1.0, 6).unwrap() + e.log_fstar[t - 1])
                .collect();
            let via_dagger: Vec<f64> = (1..=k)
                .map(|h| ln_binomial(k, h) + log_a_kt(k, h, 1.0, 6).unwrap() + e.log_fdagger[h - 1])
                .collect();
            assert!((log_sum_exp(&via_star) - e.log_f[k - 1]).abs() < 1e-11);
            assert!((log_sum_exp(&via_dagger) - e.log_f[k - 1]).abs() < 1e-11);
        }
    }

    #[test]
    fn oversize_instances_are_rejected() {
        let x = vec![0.0; 30];
        assert!(matches!(
            enumerate_exact(&x, 3, &spec(), false),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn kmax_one_posterior_is_point_mass() {
        let p = exact_posterior_k(&[0.1, 0.3], &spec(), &PriorOnK::uniform(1).unwrap()).unwrap();
        assert_eq!(p, vec![1.0]);
    }
}

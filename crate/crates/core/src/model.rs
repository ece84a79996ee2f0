//! Closed-form pieces of the collapsed mixture-of-normals model.
//!
//! Component weights have a symmetric `Dir(α, …, α)` prior and each component
//! `(m_j, r_j)` has the natural conjugate prior
//!
//! ```text
//! r_j ~ Ga(γ, δ)            (shape γ, rate δ)
//! m_j | r_j ~ N(μ, (τ r_j)⁻¹)
//! ```
//!
//! Everything here is evaluated in the log domain. Weights and component
//! parameters are integrated out; the only random quantity left is the
//! allocation vector.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::special::ln_gamma;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Hyperparameters shared by every component and every value of `k`.
///
/// The number of components is not part of the spec: the same hyperparameters
/// are reused for all `k`, which is what makes the empty-component identities
/// hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    /// Symmetric Dirichlet weight hyperparameter.
    pub alpha: f64,
    /// Prior mean of the component means.
    pub mu: f64,
    /// Prior precision ratio of component means to observations.
    pub tau: f64,
    /// Gamma shape of the component precisions.
    pub gamma: f64,
    /// Gamma rate of the component precisions (squared data units).
    pub delta: f64,
}

impl ModelSpec {
    pub fn new(alpha: f64, mu: f64, tau: f64, gamma: f64, delta: f64) -> Result<Self> {
        let spec = Self {
            alpha,
            mu,
            tau,
            gamma,
            delta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("tau", self.tau)?;
        positive("gamma", self.gamma)?;
        positive("delta", self.delta)?;
        if !self.mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        Ok(())
    }

    pub fn with_tau_delta(&self, tau: f64, delta: f64) -> Self {
        Self {
            tau,
            delta,
            ..*self
        }
    }
}

/// Sufficient statistics of the observations allocated to one component.
///
/// Stored as count, mean and centred sum of squares and updated with
/// Welford's recurrences, so that add/remove cycles do not lose precision
/// when the data sit far from zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SuffStats {
    n: usize,
    mean: f64,
    m2: f64,
}

impl SuffStats {
    pub fn from_slice(xs: &[f64]) -> Self {
        let mut s = Self::default();
        xs.iter().for_each(|&x| s.add(x));
        s
    }

    /// Two-pass recomputation, used to check the incremental values.
    pub fn recompute(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let resid: f64 = xs.iter().map(|x| x - mean).sum::<f64>() / n as f64;
        let mean = mean + resid;
        let m2 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        Self { n, mean, m2 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Removes one observation previously added. Panics in debug builds if
    /// the component is already empty.
    #[inline]
    pub fn remove(&mut self, x: f64) {
        debug_assert!(self.n > 0, "remove from empty component");
        if self.n == 1 {
            *self = Self::default();
            return;
        }
        let old_mean = self.mean;
        self.n -= 1;
        self.mean = (old_mean * (self.n + 1) as f64 - x) / self.n as f64;
        self.m2 -= (x - self.mean) * (x - old_mean);
        if self.m2 < 0.0 {
            self.m2 = 0.0;
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Σ (x_i − x̄)²
    pub fn centered_ss(&self) -> f64 {
        self.m2
    }

    pub fn sum(&self) -> f64 {
        self.mean * self.n as f64
    }

    pub fn sum_sq(&self) -> f64 {
        self.m2 + self.n as f64 * self.mean * self.mean
    }

    /// Posterior rate `D = δ + ½[Σ(x−x̄)² + τm(x̄−μ)²/(τ+m)]`.
    #[inline]
    fn posterior_rate(&self, spec: &ModelSpec) -> f64 {
        if self.n == 0 {
            return spec.delta;
        }
        let m = self.n as f64;
        let dev = self.mean - spec.mu;
        spec.delta + 0.5 * (self.m2 + spec.tau * m * dev * dev / (spec.tau + m))
    }

    /// Posterior mean of the component mean, `(τμ + Σx)/(τ+m)`.
    #[inline]
    fn posterior_location(&self, spec: &ModelSpec) -> f64 {
        let m = self.n as f64;
        (spec.tau * spec.mu + m * self.mean) / (spec.tau + m)
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let scale = 1.0 + self.mean.abs().max(other.mean.abs());
        self.n == other.n
            && (self.mean - other.mean).abs() <= tol * scale
            && (self.m2 - other.m2).abs() <= tol * (scale * scale).max(self.m2.abs())
    }
}

/// `ln f(g | k)`: Dirichlet-multinomial probability of an allocation with
/// the given occupancy counts under a symmetric `Dir(α)` weight prior.
pub fn log_f_g_given_k(counts: &[usize], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must be > 0, got {alpha}")));
    }
    if counts.is_empty() {
        return Err(invalid("counts", "need at least one component"));
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let k = counts.len() as f64;
    let lg_alpha = ln_gamma(alpha);
    let mut acc = ln_gamma(alpha * k) - ln_gamma(alpha * k + n as f64);
    for &c in counts.iter().filter(|&&c| c > 0) {
        acc += ln_gamma(alpha + c as f64) - lg_alpha;
    }
    Ok(acc)
}

/// `ln a_kt = ln [Γ(kα)/Γ(kα+n) · Γ(tα+n)/Γ(tα)]`, the factor turning
/// `f(g | t)` into `f(g | k)` for an allocation that leaves components
/// `t+1..k` empty.
pub fn log_a_kt(k: usize, t: usize, alpha: f64, n: usize) -> Result<f64> {
    if t == 0 || t > k {
        return Err(invalid("t", format!("need 1 <= t <= k, got t = {t}, k = {k}")));
    }
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must be > 0, got {alpha}")));
    }
    if t == k {
        return Ok(0.0);
    }
    Ok(log_a_kt_unchecked(k, t, alpha, n))
}

#[inline]
pub(crate) fn log_a_kt_unchecked(k: usize, t: usize, alpha: f64, n: usize) -> f64 {
    if k == t {
        return 0.0;
    }
    let (ka, ta, n) = (k as f64 * alpha, t as f64 * alpha, n as f64);
    ln_gamma(ka) - ln_gamma(ka + n) + ln_gamma(ta + n) - ln_gamma(ta)
}

/// Log marginal density of the observations summarized by `stats` under the
/// Normal-Gamma component prior:
///
/// ```text
/// (2π)^{-m/2} √(τ/(τ+m)) Γ(γ+m/2)/Γ(γ) δ^γ / D^{γ+m/2}
/// ```
///
/// An empty component contributes 0.
pub fn log_component_marginal(stats: &SuffStats, spec: &ModelSpec) -> f64 {
    if stats.n == 0 {
        return 0.0;
    }
    let m = stats.n as f64;
    let d = stats.posterior_rate(spec);
    -0.5 * m * LN_2PI + 0.5 * (spec.tau.ln() - (spec.tau + m).ln()) + ln_gamma(spec.gamma + 0.5 * m)
        - ln_gamma(spec.gamma)
        + spec.gamma * spec.delta.ln()
        - (spec.gamma + 0.5 * m) * d.ln()
}

/// Log posterior-predictive density of one new observation for a component
/// with the given statistics: a Student t with `2γ + m` degrees of freedom.
pub fn log_predictive(x: f64, stats: &SuffStats, spec: &ModelSpec) -> f64 {
    let m = stats.n as f64;
    let kappa = spec.tau + m;
    let shape = spec.gamma + 0.5 * m;
    let d_old = stats.posterior_rate(spec);
    let loc = stats.posterior_location(spec);
    let z = 0.5 * kappa / (kappa + 1.0) * (x - loc) * (x - loc) / d_old;
    -0.5 * LN_2PI + 0.5 * (kappa / (kappa + 1.0)).ln() + ln_gamma(shape + 0.5) - ln_gamma(shape)
        - 0.5 * d_old.ln()
        - (shape + 0.5) * z.ln_1p()
}

/// Occupancy summary of an allocation: `h` non-empty components, the highest
/// of which is component `t` (both 1-based counts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OccupancyPattern {
    pub h: usize,
    pub t: usize,
}

impl OccupancyPattern {
    pub fn from_counts<I: IntoIterator<Item = usize>>(counts: I) -> Self {
        let mut h = 0;
        let mut t = 0;
        for (j, c) in counts.into_iter().enumerate() {
            if c > 0 {
                h += 1;
                t = j + 1;
            }
        }
        Self { h, t }
    }

    /// Membership in G*_t: component t occupied, all higher ones empty.
    pub fn in_g_star(&self, t: usize) -> bool {
        self.t == t
    }

    /// Membership in G̃^k_h: exactly h components occupied.
    pub fn in_g_tilde(&self, h: usize) -> bool {
        self.h == h
    }
}

/// Allocation vector with per-component sufficient statistics kept in sync.
///
/// Labels are 0-based component indices.
#[derive(Debug, Clone)]
pub struct AllocationState {
    data: Arc<[f64]>,
    labels: Vec<usize>,
    stats: Vec<SuffStats>,
}

impl AllocationState {
    pub fn new(data: Arc<[f64]>, labels: Vec<usize>, k: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if k == 0 {
            return Err(invalid("k", "must be >= 1"));
        }
        if labels.len() != data.len() {
            return Err(invalid(
                "labels",
                format!("length {} does not match n = {}", labels.len(), data.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(invalid("labels", format!("label {bad} out of range for k = {k}")));
        }
        let mut stats = vec![SuffStats::default(); k];
        for (&x, &l) in data.iter().zip(&labels) {
            stats[l].add(x);
        }
        Ok(Self {
            data,
            labels,
            stats,
        })
    }

    /// Every observation in component 0.
    pub fn all_in_one(data: Arc<[f64]>, k: usize) -> Result<Self> {
        let n = data.len();
        Self::new(data, vec![0; n], k)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn k(&self) -> usize {
        self.stats.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn stats(&self) -> &[SuffStats] {
        &self.stats
    }

    pub fn counts(&self) -> Vec<usize> {
        self.stats.iter().map(SuffStats::count).collect()
    }

    pub fn pattern(&self) -> OccupancyPattern {
        OccupancyPattern::from_counts(self.stats.iter().map(SuffStats::count))
    }

    pub fn empty_components(&self) -> usize {
        self.stats.iter().filter(|s| s.is_empty()).count()
    }

    /// Moves observation `i` to component `to`.
    pub fn reassign(&mut self, i: usize, to: usize) {
        let from = self.labels[i];
        if from == to {
            return;
        }
        let x = self.data[i];
        self.stats[from].remove(x);
        self.stats[to].add(x);
        self.labels[i] = to;
    }

    pub(crate) fn detach(&mut self, i: usize) -> usize {
        let from = self.labels[i];
        self.stats[from].remove(self.data[i]);
        from
    }

    pub(crate) fn attach(&mut self, i: usize, to: usize) {
        self.stats[to].add(self.data[i]);
        self.labels[i] = to;
    }

    /// Inserts an empty component at position `pos`, shifting higher labels up.
    pub fn insert_empty(&mut self, pos: usize) {
        assert!(pos <= self.k());
        self.stats.insert(pos, SuffStats::default());
        self.labels.iter_mut().filter(|l| **l >= pos).for_each(|l| *l += 1);
    }

    /// Deletes the empty component `pos`, shifting higher labels down.
    pub fn remove_empty(&mut self, pos: usize) {
        assert!(self.stats[pos].is_empty(), "component {pos} is not empty");
        assert!(self.k() > 1);
        self.stats.remove(pos);
        self.labels.iter_mut().filter(|l| **l > pos).for_each(|l| *l -= 1);
    }

    /// Widens the state to `k` components by appending empty ones.
    pub fn extend_to(&mut self, k: usize) {
        if k > self.k() {
            self.stats.resize(k, SuffStats::default());
        }
    }

    /// Recomputes the statistics from scratch and compares them with the
    /// incrementally maintained ones.
    pub fn check_consistency(&self, tol: f64) -> bool {
        let k = self.k();
        let mut groups = vec![Vec::new(); k];
        for (&x, &l) in self.data.iter().zip(&self.labels) {
            if l >= k {
                return false;
            }
            groups[l].push(x);
        }
        groups
            .iter()
            .zip(&self.stats)
            .all(|(g, s)| SuffStats::recompute(g).approx_eq(s, tol))
    }

    /// Largest absolute drift of the incremental mean and centred sum of
    /// squares from a two-pass recomputation.
    pub fn max_drift(&self) -> f64 {
        let mut groups = vec![Vec::new(); self.k()];
        for (&x, &l) in self.data.iter().zip(&self.labels) {
            groups[l].push(x);
        }
        groups
            .iter()
            .zip(&self.stats)
            .map(|(g, s)| {
                let exact = SuffStats::recompute(g);
                (exact.mean - s.mean).abs().max((exact.m2 - s.m2).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// `ln f(x | k, g)`: product of the component marginals. Empty components
/// contribute nothing, so the value does not depend on `k` beyond the
/// allocation content.
pub fn log_f_x_given_kg(state: &AllocationState, spec: &ModelSpec) -> f64 {
    state
        .stats
        .iter()
        .map(|s| log_component_marginal(s, spec))
        .sum()
}

/// Joint `ln f(g|k) + ln f(x|k,g)` of the current state.
pub fn log_joint(state: &AllocationState, spec: &ModelSpec) -> f64 {
    log_f_g_given_k(&state.counts(), spec.alpha).expect("state has data")
        + log_f_x_given_kg(state, spec)
}

pub fn occupancy_pattern(state: &AllocationState) -> OccupancyPattern {
    state.pattern()
}

/// Per-spec constants that make the Gibbs predictive evaluation cheap.
#[derive(Debug, Clone)]
pub(crate) struct PredictiveCache {
    spec: ModelSpec,
    /// −½ln2π + ½ln(κ/(κ+1)) + lnΓ(a+½) − lnΓ(a) for m = 0..=n
    base: Vec<f64>,
    /// a + ½ for m = 0..=n
    power: Vec<f64>,
    /// κ/(κ+1) / 2
    shrink: Vec<f64>,
}

impl PredictiveCache {
    pub fn new(spec: &ModelSpec, n: usize) -> Self {
        let mut base = Vec::with_capacity(n + 1);
        let mut power = Vec::with_capacity(n + 1);
        let mut shrink = Vec::with_capacity(n + 1);
        for m in 0..=n {
            let m = m as f64;
            let kappa = spec.tau + m;
            let shape = spec.gamma + 0.5 * m;
            let r = kappa / (kappa + 1.0);
            base.push(-0.5 * LN_2PI + 0.5 * r.ln() + ln_gamma(shape + 0.5) - ln_gamma(shape));
            power.push(shape + 0.5);
            shrink.push(0.5 * r);
        }
        Self {
            spec: *spec,
            base,
            power,
            shrink,
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Per-component quantities that only change when the component does.
    #[inline]
    pub fn component(&self, stats: &SuffStats) -> ComponentTerm {
        let d = stats.posterior_rate(&self.spec);
        ComponentTerm {
            m: stats.n,
            loc: stats.posterior_location(&self.spec),
            inv_d: 1.0 / d,
            half_ln_d: 0.5 * d.ln(),
        }
    }

    #[inline]
    pub fn log_predictive(&self, x: f64, c: &ComponentTerm) -> f64 {
        let dx = x - c.loc;
        let z = self.shrink[c.m] * dx * dx * c.inv_d;
        self.base[c.m] - c.half_ln_d - self.power[c.m] * z.ln_1p()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ComponentTerm {
    m: usize,
    loc: f64,
    inv_d: f64,
    half_ln_d: f64,
}

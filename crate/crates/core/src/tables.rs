//! Deterministic tables that follow from the `f†` representation
//! `f_k = Σ_h C(k,h) a_kh f†_h` alone, without any data.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::model::log_a_kt_unchecked;
use crate::prior::PriorOnK;
use crate::special::{ln_binomial, ln_factorial, ln_gamma, log_sum_exp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMode {
    /// `f_k / f_h0 = C(k,h0) a_{k,h0}`
    WithBinomial,
    /// `a_{k,h0}`
    WithoutBinomial,
    /// `π(k|x)/π(h0|x)` under a Poisson(1) prior: `C(k,h0) a_{k,h0} h0!/k!`
    Poi1Posterior,
}

impl fmt::Display for RatioMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RatioMode::WithBinomial => "with-binomial",
            RatioMode::WithoutBinomial => "without-binomial",
            RatioMode::Poi1Posterior => "poi1-posterior",
        })
    }
}

impl FromStr for RatioMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with-binomial" => Ok(RatioMode::WithBinomial),
            "without-binomial" => Ok(RatioMode::WithoutBinomial),
            "poi1-posterior" => Ok(RatioMode::Poi1Posterior),
            other => Err(invalid("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Ratios for a data set whose marginal likelihood is carried entirely by
/// allocations with exactly `h0` occupied components. Returns `(k, ratio)`
/// for `k = h0..=kmax`.
pub fn hypothetical_ratio_table(
    n: usize,
    h0: usize,
    alpha: f64,
    kmax: usize,
    mode: RatioMode,
) -> Result<Vec<(usize, f64)>> {
    if h0 == 0 || h0 > kmax {
        return Err(invalid("h0", format!("need 1 <= h0 <= kmax, got h0 = {h0}, kmax = {kmax}")));
    }
    if n < h0 {
        return Err(invalid("n", format!("need n >= h0 = {h0}, got {n}")));
    }
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "must be > 0"));
    }
    Ok((h0..=kmax)
        .map(|k| {
            let a = log_a_kt_unchecked(k, h0, alpha, n);
            let v = match mode {
                RatioMode::WithoutBinomial => a,
                RatioMode::WithBinomial => a + ln_binomial(k, h0),
                RatioMode::Poi1Posterior => a + ln_binomial(k, h0) + ln_factorial(h0) - ln_factorial(k),
            };
            (k, v.exp())
        })
        .collect())
}

/// Upper bounds on `π(k | x)` valid for every data set of size `n`:
///
/// ```text
/// bound(k) = max_{h <= min(k,n)}  π(k) C(k,h) a_kh / Σ_{j=h}^{kmax} π(j) C(j,h) a_jh
/// ```
///
/// The posterior is a ratio of linear forms in the non-negative `f†_h`, so
/// its maximum over `f†` sits at a vertex where a single `f†_h` is positive.
pub fn posterior_bounds(n: usize, alpha: f64, prior: &PriorOnK) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "must be > 0"));
    }
    let kmax = prior.kmax();
    let weight = |j: usize, h: usize| prior.ln_pmf(j) + ln_binomial(j, h) + log_a_kt_unchecked(j, h, alpha, n);
    // ln Σ_{j=h}^{kmax} π(j) C(j,h) a_jh, per h
    let denom: Vec<f64> = (1..=kmax.min(n))
        .map(|h| log_sum_exp(&(h..=kmax).map(|j| weight(j, h)).collect::<Vec<_>>()))
        .collect();
    Ok((1..=kmax)
        .map(|k| {
            (1..=k.min(n))
                .map(|h| weight(k, h) - denom[h - 1])
                .fold(f64::NEG_INFINITY, f64::max)
                .exp()
        })
        .collect())
}

/// `n^{(k−t)α} C(k,t) a_kt`, which tends to [`asymptotic_limit`] as `n → ∞`.
pub fn scaled_binomial_weight(n: usize, k: usize, t: usize, alpha: f64) -> Result<f64> {
    if t == 0 || t > k {
        return Err(invalid("t", "need 1 <= t <= k"));
    }
    let v = (k - t) as f64 * alpha * (n as f64).ln() + ln_binomial(k, t) + log_a_kt_unchecked(k, t, alpha, n);
    Ok(v.exp())
}

/// `C(k,t) Γ(kα)/Γ(tα)`
pub fn asymptotic_limit(k: usize, t: usize, alpha: f64) -> f64 {
    (ln_binomial(k, t) + ln_gamma(k as f64 * alpha) - ln_gamma(t as f64 * alpha)).exp()
}

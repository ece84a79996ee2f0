//! Priors on the number of components.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::special::{ln_binomial, ln_factorial, log_normalize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorFamily {
    Uniform,
    /// Poisson(1) restricted to `1..=kmax`, i.e. `π(k) ∝ 1/k!`.
    Poisson1,
    Custom,
}

impl fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorFamily::Uniform => "uniform",
            PriorFamily::Poisson1 => "poisson1",
            PriorFamily::Custom => "custom",
        })
    }
}

impl FromStr for PriorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(PriorFamily::Uniform),
            "poisson1" | "poi1" | "poisson" => Ok(PriorFamily::Poisson1),
            other => Err(invalid("prior", format!("unknown prior family `{other}`"))),
        }
    }
}

/// Normalized prior over `k = 1..=kmax`, stored as log weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorOnK {
    family: PriorFamily,
    log_weights: Vec<f64>,
}

impl PriorOnK {
    pub fn uniform(kmax: usize) -> Result<Self> {
        Self::build(PriorFamily::Uniform, vec![0.0; check_kmax(kmax)?])
    }

    pub fn poisson1(kmax: usize) -> Result<Self> {
        let w = (1..=check_kmax(kmax)?).map(|k| -ln_factorial(k)).collect();
        Self::build(PriorFamily::Poisson1, w)
    }

    pub fn family(kind: PriorFamily, kmax: usize) -> Result<Self> {
        match kind {
            PriorFamily::Uniform => Self::uniform(kmax),
            PriorFamily::Poisson1 => Self::poisson1(kmax),
            PriorFamily::Custom => Err(invalid("prior", "custom priors need explicit weights")),
        }
    }

    /// Prior from unnormalized log weights for `k = 1, 2, …`.
    pub fn from_log_weights(log_weights: Vec<f64>) -> Result<Self> {
        check_kmax(log_weights.len())?;
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(invalid("prior", "log weights must not be NaN or +inf"));
        }
        if log_weights.iter().all(|w| *w == f64::NEG_INFINITY) {
            return Err(invalid("prior", "all weights are zero"));
        }
        Self::build(PriorFamily::Custom, log_weights)
    }

    fn build(family: PriorFamily, mut log_weights: Vec<f64>) -> Result<Self> {
        log_normalize(&mut log_weights);
        Ok(Self {
            family,
            log_weights,
        })
    }

    pub fn kind(&self) -> PriorFamily {
        self.family
    }

    pub fn kmax(&self) -> usize {
        self.log_weights.len()
    }

    /// `ln π(k)` for `1 <= k <= kmax`.
    pub fn ln_pmf(&self, k: usize) -> f64 {
        self.log_weights[k - 1]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }
}

fn check_kmax(kmax: usize) -> Result<usize> {
    if kmax == 0 {
        Err(invalid("kmax", "must be >= 1"))
    } else {
        Ok(kmax)
    }
}

/// Outcome of checking `π(h) = max_{h<k<=kmax} π(k) C(k,h)` for every
/// `h < kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupPropertyCheck {
    pub holds: bool,
    pub worst_violation: f64,
    pub worst_h: usize,
    /// `|π(h) − sup| / π(h)` for `h = 1..kmax-1`.
    pub violations: Vec<f64>,
    /// Index `k` attaining the supremum, per `h`.
    pub argmax: Vec<usize>,
}

pub fn check_sup_property(prior: &PriorOnK, tol: f64) -> Result<SupPropertyCheck> {
    let kmax = prior.kmax();
    if kmax < 2 {
        return Err(invalid("kmax", "the property needs kmax >= 2"));
    }
    let mut violations = Vec::with_capacity(kmax - 1);
    let mut argmax = Vec::with_capacity(kmax - 1);
    for h in 1..kmax {
        let (best_k, best) = (h + 1..=kmax)
            .map(|k| (k, prior.ln_pmf(k) + ln_binomial(k, h)))
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        let lp = prior.ln_pmf(h);
        let v = if lp == f64::NEG_INFINITY {
            if best == f64::NEG_INFINITY {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (best - lp).exp_m1().abs()
        };
        violations.push(v);
        argmax.push(best_k);
    }
    let (worst_idx, worst) = violations
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(SupPropertyCheck {
        holds: worst < tol,
        worst_violation: worst,
        worst_h: worst_idx + 1,
        violations,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson1_attains_sup_at_next_k() {
        let p = PriorOnK::poisson1(50).unwrap();
        let c = check_sup_property(&p, 1e-12).unwrap();
        assert!(c.holds, "worst {}", c.worst_violation);
        assert!(c.argmax.iter().enumerate().all(|(i, &k)| k == i + 2));
    }

    #[test]
    fn uniform_fails_everywhere() {
        let c = check_sup_property(&PriorOnK::uniform(20).unwrap(), 1e-12).unwrap();
        assert!(!c.holds);
        assert!(c.violations.iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn geometric_fails_from_two() {
        let w = (1..=30).map(|k| -(k as f64) * 2f64.ln()).collect();
        let c = check_sup_property(&PriorOnK::from_log_weights(w).unwrap(), 1e-12).unwrap();
        assert!(!c.holds);
        assert!(c.violations[0] < 1e-12);
        assert!(c.violations[1..].iter().all(|&v| v > 0.4));
    }

    #[test]
    fn priors_are_normalized() {
        for p in [PriorOnK::uniform(7).unwrap(), PriorOnK::poisson1(7).unwrap()] {
            assert!((p.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        assert!(PriorOnK::uniform(0).is_err());
        assert!(check_sup_property(&PriorOnK::uniform(1).unwrap(), 1e-12).is_err());
        assert_eq!("poi1".parse::<PriorFamily>().unwrap(), PriorFamily::Poisson1);
    }
}

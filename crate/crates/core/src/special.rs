//! Log-domain numerics: log-gamma, binomials and log-sum-exp accumulation.

/// Natural log of the gamma function for positive arguments.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln C(n, k)` for integers `0 <= k <= n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n, "ln_binomial: k = {k} > n = {n}");
    if k == 0 || k == n {
        return 0.0;
    }
    // exact for the small arguments used by the tables
    if n <= 60 {
        let k = k.min(n - k);
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        return (c as f64).ln();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `ln k!`
pub fn ln_factorial(k: usize) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// `ln Σ exp(v_i)`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// Normalizes log weights in place so that `Σ exp(w) = 1`.
pub fn log_normalize(values: &mut [f64]) {
    let z = log_sum_exp(values);
    if z.is_finite() {
        values.iter_mut().for_each(|v| *v -= z);
    }
}

/// Streaming log-sum-exp with Neumaier-compensated summation of the
/// shifted terms. The result does not depend on how the input is chunked
/// beyond floating-point rounding of the rescalings.
#[derive(Debug, Clone, Copy)]
pub struct LogSumAcc {
    max: f64,
    sum: f64,
    comp: f64,
}

impl Default for LogSumAcc {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumAcc {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
            comp: 0.0,
        }
    }

    pub fn add(&mut self, log_value: f64) {
        if log_value == f64::NEG_INFINITY {
            return;
        }
        if log_value > self.max {
            let scale = (self.max - log_value).exp();
            self.sum *= scale;
            self.comp *= scale;
            self.max = log_value;
        }
        let term = (log_value - self.max).exp();
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.comp += (self.sum - t) + term;
        } else {
            self.comp += (term - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + (self.sum + self.comp).ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_and_large_agree() {
        let exact = ln_binomial(50, 9);
        let via_gamma = ln_gamma(51.0) - ln_gamma(10.0) - ln_gamma(42.0);
        assert!((exact - via_gamma).abs() < 1e-11);
        assert_eq!(ln_binomial(10, 0), 0.0);
        assert!((ln_binomial(11, 9) - 55f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ln_gamma_reference_values() {
        // Γ(0.5) = √π, Γ(10) = 9!, Γ(2.5) = 3√π/4
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362880f64.ln()).abs() < 1e-13);
        let g25 = 0.75 * std::f64::consts::PI.sqrt();
        assert!((ln_gamma(2.5) - g25.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn streaming_matches_batch() {
        let vals: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * -0.37).collect();
        let mut acc = LogSumAcc::new();
        vals.iter().for_each(|&v| acc.add(v));
        assert!((acc.value() - log_sum_exp(&vals)).abs() < 1e-12);
    }
}

//! Exact reference values for small instances: full enumeration of the
//! allocation space and quadrature of the single-component marginal.

mod enumerate;
mod quadrature;

pub use enumerate::{enumerate_exact, exact_posterior_k, EnumerationResult, MAX_TERMS};
pub use quadrature::{integrate, quad_component_marginal, MAX_QUAD_POINTS};

use crate::model::ModelSpec;

/// Small fixed data sets on which enumeration is cheap. Available sizes are
/// 5, 6 and 8.
pub fn toy_dataset(n: usize) -> Option<Vec<f64>> {
    match n {
        5 => Some(vec![-1.5, -1.2, 0.0, 1.1, 1.6]),
        6 => Some(vec![-1.5, -1.2, 0.0, 1.1, 1.6, 2.9]),
        8 => Some(vec![-2.1, -1.5, -1.2, 0.0, 0.4, 1.1, 1.6, 2.9]),
        _ => None,
    }
}

/// Hyperparameters used with [`toy_dataset`]; every pattern probability is
/// bounded away from 0 and 1 for `kmax = 3`.
pub fn toy_spec() -> ModelSpec {
    ModelSpec {
        alpha: 1.0,
        mu: 0.0,
        tau: 0.5,
        gamma: 2.0,
        delta: 0.5,
    }
}

/// A grid of `(data, spec)` pairs with `1 <= m <= 4` for checking the
/// closed-form component marginal against quadrature.
pub fn quadrature_settings() -> Vec<(Vec<f64>, ModelSpec)> {
    let samples: [&[f64]; 6] = [
        &[0.0],
        &[1.7],
        &[-0.5, 0.5],
        &[2.0, 2.6, 3.1],
        &[-1.2, 0.3, 0.4, 2.2],
        &[10.0, 11.5, 9.2, 10.4],
    ];
    let hypers = [(0.0, 1.0, 2.0, 2.0), (1.0, 0.04, 2.0, 2.0), (0.5, 0.3, 3.5, 0.7), (10.0, 5.0, 1.2, 4.0)];
    let mut out = Vec::new();
    for x in samples {
        for &(mu, tau, gamma, delta) in &hypers {
            out.push((
                x.to_vec(),
                ModelSpec {
                    alpha: 1.0,
                    mu,
                    tau,
                    gamma,
                    delta,
                },
            ));
        }
    }
    out
}

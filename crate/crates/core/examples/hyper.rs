//! Per-k medians of `(τ, δ)` for the galaxy velocities and the suggested
//! empirical-Bayes values.
//!
//! `cargo run --release -p mixk --example hyper`

use std::sync::Arc;

use mixk::sampler::{hyper_median_table, run_hyper_chain, suggest_hyper, ChainConfig, HyperState, DEFAULT_QUANTILES};
use mixk::{Dataset, ModelSpec, PriorOnK};

fn main() -> mixk::Result<()> {
    let ds = Dataset::galaxy();
    let spec = ModelSpec::new(1.0, 20.0, 1.0, 2.0, 1.0)?;
    let upper = HyperState::delta_upper_for(spec.gamma, ds.variance)?;
    let hyper = HyperState::new(1.0, upper / 2.0, upper)?;
    let cfg = ChainConfig {
        sweeps: 200_000,
        burnin: 10_000,
        keep_trace: false,
        ..Default::default()
    };
    let run = run_hyper_chain(Arc::from(ds.values), &spec, &PriorOnK::poisson1(30)?, hyper, &cfg)?;
    eprintln!(
        "acceptance: tau {:.2}, delta {:.2}",
        run.hyper.accept_tau.rate(),
        run.hyper.accept_delta.rate()
    );
    let table = hyper_median_table(&run.draws, &DEFAULT_QUANTILES, 100)?;
    println!("k,count,tau_median,delta_median");
    for r in &table.rows {
        println!("{},{},{:.4},{:.4}", r.k, r.count, r.tau_median, r.delta_median);
    }
    let s = suggest_hyper(&table, 0.25)?;
    println!("suggested tau {:.4} (k >= {}), delta {:.4} (k >= {})", s.tau, s.k_cutoff_tau, s.delta, s.k_cutoff_delta);
    Ok(())
}

//! Posterior of the number of components for the galaxy velocities, by the
//! f† formula and by the variable-k sampler.
//!
//! `cargo run --release -p mixk --example galaxy`

use std::sync::Arc;
use std::time::Instant;

use mixk::marlik::{estimate, posterior_k, Estimator, Pooling};
use mixk::sampler::{run_fixed_k_chains, run_vark_chain, ChainConfig};
use mixk::stats::total_variation;
use mixk::{Dataset, ModelSpec, PriorOnK};

fn main() -> mixk::Result<()> {
    let data: Arc<[f64]> = Dataset::galaxy().values.into();
    let spec = ModelSpec::new(1.0, 20.0, 0.04, 2.0, 2.0)?;
    let kmax = 50;

    let t = Instant::now();
    let chains = run_fixed_k_chains(data.clone(), &spec, kmax, &ChainConfig::default(), 1)?;
    let marlik = estimate(Estimator::FDagger, &chains, spec.alpha, None, Pooling::Equal)?;
    eprintln!("fixed-k chains: {:.1?}", t.elapsed());

    for prior in [PriorOnK::uniform(kmax)?, PriorOnK::poisson1(kmax)?] {
        let post = posterior_k(&marlik, &prior)?;
        let t = Instant::now();
        let cfg = ChainConfig {
            sweeps: 1_000_000,
            burnin: 10_000,
            thin: 10,
            keep_trace: false,
            ..Default::default()
        };
        let vark = run_vark_chain(data.clone(), &spec, &prior, &cfg)?;
        eprintln!("variable-k chain: {:.1?}", t.elapsed());
        let sampled = vark.posterior();
        println!("prior {}", prior.kind());
        println!("k,fdagger,vark");
        for k in 1..=kmax {
            if post[k - 1] > 1e-4 || sampled[k - 1] > 1e-4 {
                println!("{k},{:.4},{:.4}", post[k - 1], sampled[k - 1]);
            }
        }
        println!("total variation {:.4}", total_variation(&post, &sampled));
    }
    Ok(())
}

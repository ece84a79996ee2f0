use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use mixk::sampler::{hyper_median_table, run_hyper_chain, suggest_hyper, ChainConfig, HyperState, DEFAULT_QUANTILES};

use super::{model_spec, resolve_mu, DataArgs, PriorArg, ScanArg};
use crate::config::Echo;
use crate::format::{num, Csv};
use crate::OutArgs;

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 30)]
    pub kmax: usize,
    /// Prior mean of the component means [default: sample mean to one decimal]
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Starting value of τ.
    #[arg(long, default_value_t = 1.0)]
    pub tau_init: f64,
    /// Starting value of δ [default: half of the upper limit (γ−1)s²]
    #[arg(long)]
    pub delta_init: Option<f64>,
    #[arg(long, value_enum, default_value = "poisson1")]
    pub prior_k: PriorArg,
    #[arg(long, default_value_t = 200_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "systematic")]
    pub scan: ScanArg,
    /// Quantiles tabulated per k, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.005,0.25,0.5,0.75,0.995")]
    pub quantiles: Vec<f64>,
    /// Relative change in the median below which the medians count as level.
    #[arg(long, default_value_t = 0.25)]
    pub rel_tol: f64,
    /// Values of k with fewer draws are left out of the table.
    #[arg(long, default_value_t = 100)]
    pub min_draws: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn run(a: &HyperArgs) -> Result<ExitCode> {
    let ds = a.data.load()?;
    let upper = HyperState::delta_upper_for(a.gamma, ds.variance)?;
    let delta0 = a.delta_init.unwrap_or(upper / 2.0);
    let spec = model_spec(a.alpha, resolve_mu(a.mu, &ds), a.tau_init, a.gamma, delta0)?;
    let prior = a.prior_k.build(a.kmax)?;
    let config = ChainConfig {
        sweeps: a.sweeps,
        burnin: a.burnin,
        thin: a.thin,
        seed: a.seed,
        scan: a.scan.scan(),
        keep_trace: false,
        ..Default::default()
    };
    config.validate()?;

    let dir = a.out.dir("hyper")?;
    let mut echo = Echo::default();
    let qs = a.quantiles.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",");
    a.data.echo(&mut echo);
    echo.note("n", ds.n())
        .set("kmax", a.kmax)
        .set("alpha", spec.alpha)
        .set("mu", spec.mu)
        .set("gamma", spec.gamma)
        .set("tau-init", a.tau_init)
        .set("delta-init", delta0)
        .note("delta-upper", upper)
        .set("prior-k", a.prior_k.name())
        .set("sweeps", a.sweeps)
        .set("burnin", a.burnin)
        .set("thin", a.thin)
        .set("seed", a.seed)
        .set("scan", a.scan.name())
        .set("quantiles", qs)
        .set("rel-tol", a.rel_tol)
        .set("min-draws", a.min_draws);
    echo.write(&dir)?;

    let hyper = HyperState::new(a.tau_init, delta0, upper)?;
    let run = run_hyper_chain(ds.values.clone().into(), &spec, &prior, hyper, &config)?;
    eprintln!(
        "acceptance rates after burn-in: tau {:.3}, delta {:.3}",
        run.hyper.accept_tau.rate(),
        run.hyper.accept_delta.rate()
    );
    let quantiles = if a.quantiles.is_empty() { DEFAULT_QUANTILES.to_vec() } else { a.quantiles.clone() };
    let table = hyper_median_table(&run.draws, &quantiles, a.min_draws)?;
    for (k, c) in &table.excluded {
        eprintln!("note: k = {k} has only {c} draws (< {}) and is left out", a.min_draws);
    }

    let mut header = vec!["k".to_string(), "count".to_string()];
    header.extend(quantiles.iter().map(|q| format!("tau_q{q}")));
    header.extend(quantiles.iter().map(|q| format!("delta_q{q}")));
    let mut csv = Csv::new(&header);
    for r in &table.rows {
        let mut row = vec![r.k.to_string(), r.count.to_string()];
        row.extend(r.tau_quantiles.iter().map(|v| num(*v)));
        row.extend(r.delta_quantiles.iter().map(|v| num(*v)));
        csv.row(&row);
    }
    csv.write(&dir, "hyper_medians.csv")?;
    print!("{}", csv.as_str());

    let s = suggest_hyper(&table, a.rel_tol)?;
    let mut sug = Csv::new(&["tau", "delta", "k_cutoff_tau", "k_cutoff_delta"]);
    sug.row(&[num(s.tau), num(s.delta), s.k_cutoff_tau.to_string(), s.k_cutoff_delta.to_string()]);
    sug.write(&dir, "hyper_suggestion.csv")?;
    println!(
        "suggested tau = {} (k >= {}), delta = {} (k >= {})",
        num(s.tau),
        s.k_cutoff_tau,
        num(s.delta),
        s.k_cutoff_delta
    );
    Ok(ExitCode::SUCCESS)
}

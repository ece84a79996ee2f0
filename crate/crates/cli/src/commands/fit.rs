use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Result;
use clap::{Args, ValueEnum};
use mixk::marlik::{estimate, posterior_k, Estimator, MarlikResult, Pooling};
use mixk::sampler::{run_fixed_k_chains, run_vark_chain, ChainConfig, ChainSummary, Init, VarkSummary};
use mixk::PriorOnK;

use super::{echo_spec, model_spec, resolve_mu, DataArgs, PriorArg, ScanArg};
use crate::config::Echo;
use crate::format::{num, Csv};
use crate::OutArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Single-chain Bayes factors multiplied along k.
    Bf,
    Fstar,
    Fdagger,
    /// Variable-k sampler; the posterior is the frequency of each k.
    Vark,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Bf => "bf",
            MethodArg::Fstar => "fstar",
            MethodArg::Fdagger => "fdagger",
            MethodArg::Vark => "vark",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// Chain k starts from the final allocation of chain k−1.
    Warm,
    AllInOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolingArg {
    Equal,
    Adjacent,
    InverseVariance,
}

impl PoolingArg {
    fn pooling(self) -> Pooling {
        match self {
            PoolingArg::Equal => Pooling::Equal,
            PoolingArg::Adjacent => Pooling::AdjacentOnly,
            PoolingArg::InverseVariance => Pooling::InverseVariance,
        }
    }

    fn name(self) -> &'static str {
        match self {
            PoolingArg::Equal => "equal",
            PoolingArg::Adjacent => "adjacent",
            PoolingArg::InverseVariance => "inverse-variance",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 50)]
    pub kmax: usize,
    /// Prior mean of the component means [default: sample mean to one decimal]
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = 0.04)]
    pub tau: f64,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 2.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "fdagger")]
    pub estimator: MethodArg,
    #[arg(long, value_enum, default_value = "uniform")]
    pub prior_k: PriorArg,
    #[arg(long, value_enum, default_value = "equal")]
    pub pooling: PoolingArg,
    /// Post-burn-in sweeps per chain.
    #[arg(long, default_value_t = 20_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 1_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "warm")]
    pub init: InitArg,
    #[arg(long, value_enum, default_value = "systematic")]
    pub scan: ScanArg,
    /// Batches for batch-means standard errors.
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    /// Worker threads for the fixed-k chains; warm starts run one after another.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn run(a: &FitArgs) -> Result<ExitCode> {
    let ds = a.data.load()?;
    let spec = model_spec(a.alpha, resolve_mu(a.mu, &ds), a.tau, a.gamma, a.delta)?;
    let prior = a.prior_k.build(a.kmax)?;
    let config = ChainConfig {
        sweeps: a.sweeps,
        burnin: a.burnin,
        thin: a.thin,
        seed: a.seed,
        init: match a.init {
            InitArg::Warm => Init::WarmStart,
            InitArg::AllInOne => Init::AllInOne,
        },
        scan: a.scan.scan(),
        batches: a.batches,
        keep_trace: false,
    };
    config.validate()?;

    let dir = a.out.dir("fit")?;
    let mut echo = Echo::default();
    a.data.echo(&mut echo);
    echo.note("n", ds.n()).set("kmax", a.kmax);
    echo_spec(&mut echo, &spec);
    echo.set("estimator", a.estimator.name())
        .set("prior-k", a.prior_k.name())
        .set("sweeps", a.sweeps)
        .set("burnin", a.burnin)
        .set("thin", a.thin)
        .set("seed", a.seed)
        .set("scan", a.scan.name())
        .set("batches", a.batches);
    if a.estimator != MethodArg::Vark {
        echo.set("pooling", a.pooling.name())
            .set("init", if a.init == InitArg::Warm { "warm" } else { "all-in-one" })
            .set("jobs", a.jobs);
    }
    echo.write(&dir)?;

    let data: Arc<[f64]> = ds.values.clone().into();
    if a.estimator == MethodArg::Vark {
        let s = run_vark_chain(data, &spec, &prior, &config)?;
        write_vark(&dir, &s, &prior)?;
        return Ok(ExitCode::SUCCESS);
    }

    let chains = run_fixed_k_chains(data, &spec, a.kmax, &config, a.jobs.max(1))?;
    for s in &chains {
        write_summary(&dir, s)?;
    }
    let method = match a.estimator {
        MethodArg::Bf => Estimator::BfChain,
        MethodArg::Fstar => Estimator::FStar,
        _ => Estimator::FDagger,
    };
    let m = estimate(method, &chains, spec.alpha, None, a.pooling.pooling())?;
    for d in &m.diagnostics {
        eprintln!("note: {d}");
    }
    write_marlik(&dir, &m)?;
    let post = posterior_k(&m, &prior)?;
    let mut csv = Csv::new(&["k", "prior", "posterior"]);
    for k in 1..=a.kmax {
        csv.row(&[k.to_string(), num(prior.ln_pmf(k).exp()), num(post[k - 1])]);
    }
    csv.write(&dir, "posterior_k.csv")?;
    print!("{}", csv.as_str());
    Ok(ExitCode::SUCCESS)
}

fn write_summary(dir: &Path, s: &ChainSummary) -> Result<()> {
    let mut csv = Csv::new(&["pattern", "index", "frequency", "se"]);
    for (label, freq, se) in [("star", s.visits_star(), s.se_star()), ("tilde", s.visits_tilde(), s.se_tilde())] {
        for (i, (f, e)) in freq.iter().zip(&se).enumerate() {
            csv.row(&[label.to_string(), (i + 1).to_string(), num(*f), num(*e)]);
        }
    }
    csv.write(dir, &format!("summary_k{}.csv", s.k))
}

fn write_marlik(dir: &Path, m: &MarlikResult) -> Result<()> {
    let mut csv = Csv::new(&["k", "log_f", "f", "se_f", "log_partial", "log_bf"]);
    let f = m.f();
    for k in 1..=m.kmax {
        let se = m.se_f.as_ref().map_or(String::new(), |s| num(s[k - 1]));
        let partial = m.log_partial.get(k - 1).map_or(String::new(), |v| num(*v));
        let bf = if k >= 2 { num(m.log_bayes_factor(k)) } else { String::new() };
        csv.row(&[k.to_string(), num(m.log_f[k - 1]), num(f[k - 1]), se, partial, bf]);
    }
    csv.write(dir, "marlik.csv")
}

fn write_vark(dir: &Path, s: &VarkSummary, prior: &PriorOnK) -> Result<()> {
    let post = s.posterior();
    let se = s.se();
    let mut csv = Csv::new(&["k", "prior", "posterior", "se"]);
    for k in 1..=s.kmax {
        csv.row(&[k.to_string(), num(prior.ln_pmf(k).exp()), num(post[k - 1]), num(se[k - 1])]);
    }
    csv.write(dir, "posterior_k.csv")?;
    print!("{}", csv.as_str());
    let mut moves = Csv::new(&["move", "proposed", "accepted", "rate"]);
    for (name, st) in [("birth", s.birth), ("death", s.death)] {
        moves.row(&[name.to_string(), st.proposed.to_string(), st.accepted.to_string(), num(st.rate())]);
    }
    moves.write(dir, "moves.csv")
}

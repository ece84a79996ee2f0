use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use mixk::marlik::{bf_empty_component, estimate, Estimator, Pooling};
use mixk::model::{log_a_kt, log_component_marginal};
use mixk::oracle::{enumerate_exact, quad_component_marginal, quadrature_settings, toy_dataset, toy_spec};
use mixk::sampler::{run_fixed_k_chains, run_vark_chain, ChainConfig};
use mixk::special::{ln_binomial, log_sum_exp};
use mixk::{ModelSpec, PriorOnK, SuffStats};

use super::echo_spec;
use crate::config::Echo;
use crate::format::{num, Csv};
use crate::OutArgs;

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Built-in toy data set size (5, 6 or 8).
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Small data file used instead of the built-in toy set.
    #[arg(long, value_name = "FILE")]
    pub data: Option<std::path::PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub kmax: usize,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Post-burn-in sweeps per chain.
    #[arg(long, default_value_t = 100_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 1_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Allowed deviation in standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub z: f64,
    /// Relative tolerance of the exact identities.
    #[arg(long, default_value_t = 1e-10)]
    pub identity_tol: f64,
    /// Check the closed-form component marginal against quadrature instead.
    #[arg(long)]
    pub quadrature: bool,
    /// Relative tolerance of the quadrature check.
    #[arg(long, default_value_t = 1e-6)]
    pub quad_tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

struct Report {
    csv: Csv,
    failed: usize,
    total: usize,
}

impl Report {
    fn new() -> Self {
        Self {
            csv: Csv::new(&["check", "k", "exact", "estimate", "se", "deviation", "pass"]),
            failed: 0,
            total: 0,
        }
    }

    /// Monte Carlo comparison; `deviation` is in standard errors.
    fn mc(&mut self, check: &str, k: usize, exact: f64, est: f64, se: f64, z: f64) {
        let diff = (est - exact).abs();
        let dev = if se > 0.0 { diff / se } else if diff <= 1e-12 { 0.0 } else { f64::INFINITY };
        self.push(check, k, exact, est, num(se), dev, dev <= z);
    }

    /// Exact comparison; `deviation` is relative.
    fn exact(&mut self, check: &str, k: usize, exact: f64, est: f64, tol: f64) {
        let dev = if exact == est { 0.0 } else { (est - exact).abs() / exact.abs() };
        self.push(check, k, exact, est, String::new(), dev, dev <= tol);
    }

    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, check: &str, k: usize, exact: f64, est: f64, se: String, dev: f64, pass: bool) {
        self.total += 1;
        self.failed += usize::from(!pass);
        self.csv.row(&[
            check.to_string(),
            k.to_string(),
            num(exact),
            num(est),
            se,
            num(dev),
            if pass { "yes" } else { "NO" }.to_string(),
        ]);
    }
}

fn resolve_spec(a: &OracleArgs) -> Result<ModelSpec> {
    let d = toy_spec();
    Ok(ModelSpec::new(
        a.alpha.unwrap_or(d.alpha),
        a.mu.unwrap_or(d.mu),
        a.tau.unwrap_or(d.tau),
        a.gamma.unwrap_or(d.gamma),
        a.delta.unwrap_or(d.delta),
    )?)
}

pub fn run(a: &OracleArgs) -> Result<ExitCode> {
    let dir = a.out.dir("oracle")?;
    let mut echo = Echo::default();
    let mut report = Report::new();
    if a.quadrature {
        echo.set("quadrature", true).set("quad-tol", a.quad_tol);
        echo.write(&dir)?;
        for (x, spec) in quadrature_settings() {
            let closed = log_component_marginal(&SuffStats::recompute(&x), &spec);
            let quad = quad_component_marginal(&x, &spec)?;
            // relative error of the marginal itself
            let rel = (quad - closed).exp_m1().abs();
            report.push("component-marginal", x.len(), closed, quad, String::new(), rel, rel <= a.quad_tol);
        }
    } else {
        run_toy(a, &mut echo, &mut report)?;
        echo.write(&dir)?;
    }
    report.csv.write(&dir, "oracle_report.csv")?;
    print!("{}", report.csv.as_str());
    println!("{} of {} checks passed", report.total - report.failed, report.total);
    Ok(if report.failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run_toy(a: &OracleArgs, echo: &mut Echo, report: &mut Report) -> Result<()> {
    let x = match &a.data {
        Some(p) => {
            echo.set("data", p.display());
            mixk::read_dataset(p)?.values
        }
        None => {
            echo.set("n", a.n);
            toy_dataset(a.n).with_context(|| format!("no built-in toy data set of size {}", a.n))?
        }
    };
    if a.kmax < 2 {
        bail!("--kmax must be at least 2 for a comparison");
    }
    let spec = resolve_spec(a)?;
    let n = x.len();
    echo.set("kmax", a.kmax);
    echo_spec(echo, &spec);
    echo.set("sweeps", a.sweeps)
        .set("burnin", a.burnin)
        .set("seed", a.seed)
        .set("z", a.z)
        .set("identity-tol", a.identity_tol);

    let exact = enumerate_exact(&x, a.kmax, &spec, false)?;
    let lf = &exact.log_f;
    let alpha = spec.alpha;

    // identities between the representations
    for k in 1..=a.kmax {
        let via_star: Vec<f64> = (1..=k)
            .map(|t| log_a_kt(k, t, alpha, n).map(|v| v + exact.log_fstar[t - 1]))
            .collect::<mixk::Result<_>>()?;
        let via_dagger: Vec<f64> = (1..=k.min(n))
            .map(|h| log_a_kt(k, h, alpha, n).map(|v| v + ln_binomial(k, h) + exact.log_fdagger[h - 1]))
            .collect::<mixk::Result<_>>()?;
        let f = lf[k - 1].exp();
        report.exact("f-via-fstar", k, f, log_sum_exp(&via_star).exp(), a.identity_tol);
        report.exact("f-via-fdagger", k, f, log_sum_exp(&via_dagger).exp(), a.identity_tol);
        if k >= 2 {
            let rec = log_sum_exp(&[log_a_kt(k, k - 1, alpha, n)? + lf[k - 2], exact.log_fstar[k - 1]]);
            report.exact("f-recursion", k, f, rec.exp(), a.identity_tol);
        }
    }
    report.exact("fstar1-equals-f1", 1, lf[0].exp(), exact.log_fstar[0].exp(), a.identity_tol);
    report.exact("fdagger1-equals-f1", 1, lf[0].exp(), exact.log_fdagger[0].exp(), a.identity_tol);

    // estimators from fixed-k chains
    let config = ChainConfig {
        sweeps: a.sweeps,
        burnin: a.burnin,
        seed: a.seed,
        keep_trace: false,
        ..Default::default()
    };
    let data: Arc<[f64]> = x.clone().into();
    let chains = run_fixed_k_chains(data.clone(), &spec, a.kmax, &config, 1)?;
    let truth = exact.normalized_f();
    for (label, method) in [("fstar", Estimator::FStar), ("fdagger", Estimator::FDagger)] {
        let m = estimate(method, &chains, alpha, None, Pooling::Equal)?;
        let est = m.f();
        let se = m.se_f.clone().unwrap_or_else(|| vec![0.0; a.kmax]);
        for k in 1..=a.kmax {
            report.mc(label, k, truth[k - 1], est[k - 1], se[k - 1], a.z);
        }
    }
    for s in chains.iter().skip(1) {
        let bf = bf_empty_component(s, alpha, n)?;
        report.mc("log-bayes-factor", s.k, lf[s.k - 1] - lf[s.k - 2], bf.log_bf, bf.se_log_bf, a.z);
    }

    // variable-k sampler under a uniform prior
    let prior = PriorOnK::uniform(a.kmax)?;
    let v = run_vark_chain(data, &spec, &prior, &config)?;
    let post = v.posterior();
    let se = v.se();
    for k in 1..=a.kmax {
        report.mc("vark-posterior", k, truth[k - 1], post[k - 1], se[k - 1], a.z);
    }
    Ok(())
}

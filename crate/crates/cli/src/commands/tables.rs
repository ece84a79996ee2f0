use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{ArgGroup, Args, ValueEnum};
use mixk::tables::{hypothetical_ratio_table, posterior_bounds, RatioMode};

use super::PriorArg;
use crate::config::Echo;
use crate::format::{num, Csv};
use crate::OutArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    WithBinomial,
    WithoutBinomial,
    Poi1Posterior,
}

impl ModeArg {
    fn mode(self) -> RatioMode {
        match self {
            ModeArg::WithBinomial => RatioMode::WithBinomial,
            ModeArg::WithoutBinomial => RatioMode::WithoutBinomial,
            ModeArg::Poi1Posterior => RatioMode::Poi1Posterior,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("kind").required(true).args(["bounds", "hypothetical"])))]
pub struct TablesArgs {
    /// Upper bounds on π(k | x) over all data sets of size n.
    #[arg(long)]
    pub bounds: bool,
    /// Ratios for data whose likelihood sits on exactly h0 occupied components.
    #[arg(long)]
    pub hypothetical: bool,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "20,50,100,500")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 9)]
    pub h0: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 50)]
    pub kmax: usize,
    /// Rows printed; all of 1..=kmax when omitted.
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long, value_enum, default_value = "uniform")]
    pub prior: PriorArg,
    #[arg(long, value_enum, default_value = "with-binomial")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn run(a: &TablesArgs) -> Result<ExitCode> {
    if a.n.is_empty() {
        bail!("--n needs at least one sample size");
    }
    let dir = a.out.dir("tables")?;
    let mut echo = Echo::default();
    let ns = a.n.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
    echo.set("n", &ns).set("alpha", a.alpha).set("kmax", a.kmax);

    let (csv, name) = if a.bounds {
        echo.set("bounds", true).set("prior", a.prior.name());
        let prior = a.prior.build(a.kmax)?;
        let cols: Vec<Vec<f64>> = a
            .n
            .iter()
            .map(|&n| posterior_bounds(n, a.alpha, &prior))
            .collect::<mixk::Result<_>>()?;
        let mut header = vec!["k".to_string()];
        header.extend(a.n.iter().map(|n| format!("n{n}")));
        let mut csv = Csv::new(&header);
        for k in 1..=a.rows.unwrap_or(a.kmax).min(a.kmax) {
            let mut row = vec![k.to_string()];
            row.extend(cols.iter().map(|c| num(c[k - 1])));
            csv.row(&row);
        }
        (csv, format!("bounds_{}.csv", a.prior.name()))
    } else {
        let mode = a.mode.mode();
        echo.set("hypothetical", true).set("h0", a.h0).set("mode", mode);
        let mut csv = Csv::new(&["n", "k", "ratio"]);
        for &n in &a.n {
            let t = hypothetical_ratio_table(n, a.h0, a.alpha, a.kmax, mode)?;
            for (k, r) in t.into_iter().take(a.rows.unwrap_or(usize::MAX)) {
                csv.row(&[n.to_string(), k.to_string(), num(r)]);
            }
        }
        (csv, format!("hypothetical_{mode}.csv"))
    };
    if let Some(r) = a.rows {
        echo.set("rows", r);
    }
    echo.write(&dir)?;
    csv.write(&dir, &name)?;
    print!("{}", csv.as_str());
    Ok(ExitCode::SUCCESS)
}

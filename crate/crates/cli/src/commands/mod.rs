pub mod fit;
pub mod hyper;
pub mod oracle;
pub mod tables;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use mixk::{Dataset, ModelSpec, PriorFamily, PriorOnK, Scan};

use crate::config::Echo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Uniform,
    #[value(alias = "poi1")]
    Poisson1,
}

impl PriorArg {
    pub fn build(self, kmax: usize) -> Result<PriorOnK> {
        let family = match self {
            PriorArg::Uniform => PriorFamily::Uniform,
            PriorArg::Poisson1 => PriorFamily::Poisson1,
        };
        Ok(PriorOnK::family(family, kmax)?)
    }

    pub fn name(self) -> &'static str {
        match self {
            PriorArg::Uniform => "uniform",
            PriorArg::Poisson1 => "poisson1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanArg {
    Systematic,
    Random,
}

impl ScanArg {
    pub fn scan(self) -> Scan {
        match self {
            ScanArg::Systematic => Scan::Systematic,
            ScanArg::Random => Scan::Random,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScanArg::Systematic => "systematic",
            ScanArg::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Data file, one value per line, `#` comments. Defaults to the bundled
    /// galaxy velocities.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
}

impl DataArgs {
    pub fn load(&self) -> Result<Dataset> {
        match &self.data {
            Some(p) => mixk::read_dataset(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(Dataset::galaxy()),
        }
    }

    /// Records the data source; the bundled set has no flag value.
    pub fn echo(&self, echo: &mut Echo) {
        match &self.data {
            Some(p) => echo.set("data", p.display()),
            None => echo.note("data", "bundled galaxy velocities"),
        };
    }
}

/// Sample mean rounded to one decimal place unless given.
pub fn resolve_mu(mu: Option<f64>, data: &Dataset) -> f64 {
    mu.unwrap_or_else(|| data.rounded_mean())
}

pub fn model_spec(alpha: f64, mu: f64, tau: f64, gamma: f64, delta: f64) -> Result<ModelSpec> {
    Ok(ModelSpec::new(alpha, mu, tau, gamma, delta)?)
}

pub fn echo_spec(echo: &mut Echo, spec: &ModelSpec) {
    echo.set("alpha", spec.alpha)
        .set("mu", spec.mu)
        .set("tau", spec.tau)
        .set("gamma", spec.gamma)
        .set("delta", spec.delta);
}

use std::path::Path;

use crate::error::{Error, Result};

const GALAXY: &str = include_str!("../data/galaxy.txt");

/// A univariate sample with its moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
}

impl Dataset {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Data(format!("need at least 2 observations, got {}", values.len())));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite observation {bad}")));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self { values, mean, variance })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Sample mean rounded to one decimal place.
    pub fn rounded_mean(&self) -> f64 {
        (self.mean * 10.0).round() / 10.0
    }

    /// The 82 galaxy velocities, in units of 1000 km/s.
    pub fn galaxy() -> Self {
        parse_dataset(GALAXY).expect("bundled data is valid")
    }
}

/// Parses whitespace-separated reals; `#` starts a comment.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            let v = tok
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("line {}: cannot parse `{tok}` as a number", lineno + 1)))?;
            values.push(v);
        }
    }
    Dataset::new(values)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    parse_dataset(&text)
}

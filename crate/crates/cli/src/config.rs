//! Flat `key = value` configuration files.
//!
//! Keys are long flag names without the leading dashes (`_` and `-` are
//! interchangeable). `true` turns a switch on, `false` leaves it off. The
//! entries are spliced in right after the subcommand, ahead of the user's
//! own flags, so the latter win.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses a config file into command-line tokens.
pub fn parse_config(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", lineno + 1);
        };
        let key = key.trim().trim_start_matches('-').replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            bail!("config line {}: empty key", lineno + 1);
        }
        if key == "config" {
            bail!("config line {}: nested config files are not supported", lineno + 1);
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => {
                out.push(format!("--{key}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

fn read_config(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

/// Splices the entries of any `--config FILE` into `args`.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            config = args.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(OsString::from(p));
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(sub)) = (config, sub) else {
        return Ok(args);
    };
    let extra = read_config(Path::new(&path))?;
    let mut out = args[..=sub].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

/// Resolved settings of a run, written next to its outputs in the same
/// format that [`parse_config`] reads.
/// Derived values that are not flags are written as comments.
#[derive(Debug, Default)]
pub struct Echo(Vec<(String, String, bool)>);

impl Echo {
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string(), false));
        self
    }

    pub fn note(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string(), true));
        self
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v, comment) in &self.0 {
            let hash = if *comment { "# " } else { "" };
            let _ = writeln!(s, "{hash}{k} = {v}");
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("config.echo");
        fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_switches() {
        let t = parse_config("# c\nkmax = 10\nprior_k=poisson1\nbounds = true\nquadrature = false\n").unwrap();
        assert_eq!(t, vec!["--kmax", "10", "--prior-k", "poisson1", "--bounds"]);
        assert!(parse_config("oops").is_err());
    }

    #[test]
    fn entries_precede_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        fs::write(&p, "kmax = 10\n").unwrap();
        let args = os(&["mixk", "--config", p.to_str().unwrap(), "fit", "--kmax", "3"]);
        let out = expand_args(args).unwrap();
        let s: Vec<String> = out.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        let fit = s.iter().position(|a| a == "fit").unwrap();
        assert_eq!(&s[fit..], ["fit", "--kmax", "10", "--kmax", "3"]);
    }

    #[test]
    fn echo_round_trips() {
        let mut e = Echo::default();
        e.set("kmax", 5).note("n", 82).set("prior-k", "uniform");
        assert_eq!(parse_config(&e.render()).unwrap(), vec!["--kmax", "5", "--prior-k", "uniform"]);
    }
}

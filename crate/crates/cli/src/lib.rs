//! `dei`: run the index, econometrics, portfolio, option and factor stages
//! from one flat JSON config.

pub mod config;
pub mod output;
pub mod stages;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::config::{RunConfig, Stage};
use crate::output::Writer;

/// A configured input file does not exist. Exits with status 2.
#[derive(Debug)]
pub struct MissingInput(pub PathBuf);

impl std::fmt::Display for MissingInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "input file not found: {}", self.0.display())
    }
}

impl std::error::Error for MissingInput {}

#[derive(Debug, Parser)]
#[command(name = "dei", version, about = "Dollar environmental index pipeline")]
pub struct Cli {
    /// Flat JSON config; every field is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub panel: Option<PathBuf>,
    /// Comma-separated country codes.
    #[arg(long, global = true, value_delimiter = ',')]
    pub countries: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub scenarios: Option<usize>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub rf: Option<f64>,
    /// Any config field, as `key=value` with a JSON value (bare words are
    /// taken as strings). Repeatable; applied after the named flags.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Normalize indicators and build EI, DEI and the global index.
    BuildIndex,
    /// Exponential price map and log returns.
    Transform,
    /// Volatility model fits and selection.
    Fit {
        #[arg(long)]
        criterion: Option<String>,
    },
    /// Joint one-step-ahead scenarios.
    Simulate,
    /// Country returns regressed on the global returns.
    Regress,
    /// Sharpe, Sortino, Rachev, Jensen's alpha, VaR and CVaR.
    Metrics,
    /// Mean-variance and mean-CVaR frontiers on the scenarios.
    Frontier,
    /// Monte Carlo option surface on the global index.
    PriceOptions,
    /// Maximum-likelihood factor analysis of the country returns.
    Factors,
    /// Every stage in order.
    Pipeline,
}

fn parse_set(item: &str) -> Result<(String, Value)> {
    let (k, v) = item
        .split_once('=')
        .with_context(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

impl Cli {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut o: Vec<(String, Value)> = Vec::new();
        let mut push = |k: &str, v: Value| o.push((k.to_string(), v));
        if let Some(v) = self.seed {
            push("seed", v.into());
        }
        if let Some(v) = &self.out {
            push("out", v.to_string_lossy().into_owned().into());
        }
        if let Some(v) = &self.panel {
            push("panel", v.to_string_lossy().into_owned().into());
        }
        if let Some(v) = &self.countries {
            push("countries", v.clone().into());
        }
        if let Some(v) = self.scenarios {
            push("scenarios", v.into());
        }
        if let Some(v) = self.paths {
            push("paths", v.into());
        }
        if let Some(v) = self.rf {
            push("rf", v.into());
        }
        if let Command::Fit { criterion: Some(c) } = &self.command {
            push("criterion", c.to_ascii_lowercase().into());
        }
        for item in &self.set {
            o.push(parse_set(item)?);
        }
        RunConfig::resolve(self.config.as_deref(), &o)
    }
}

/// Run one subcommand; returns the files written.
pub fn run(command: &Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut w = Writer::new(&cfg.out, cfg)?;
    let at = |s: Stage| format!("stage {}", s.name());

    let index = stages::index(cfg).with_context(|| at(Stage::Index))?;
    if matches!(command, Command::BuildIndex | Command::Pipeline) {
        output::index(&mut w, &index)?;
    }
    if matches!(command, Command::BuildIndex) {
        w.config()?;
        return Ok(w.written);
    }

    let t = stages::transform(cfg, &index).with_context(|| at(Stage::Transform))?;
    let all = matches!(command, Command::Pipeline);
    if all || matches!(command, Command::Transform) {
        output::transform(&mut w, cfg, &t)?;
    }
    if all || matches!(command, Command::Regress) {
        let rows = stages::regress(&t).with_context(|| at(Stage::Regress))?;
        output::regress(&mut w, &rows)?;
    }
    if all || matches!(command, Command::Metrics) {
        let reports = stages::metrics(cfg, &t).with_context(|| at(Stage::Metrics))?;
        output::metrics(&mut w, &reports)?;
    }
    let needs_fit = matches!(
        command,
        Command::Fit { .. } | Command::Simulate | Command::Frontier | Command::PriceOptions | Command::Pipeline
    );
    if needs_fit {
        let fit = stages::fit(cfg, &t).with_context(|| at(Stage::Fit))?;
        if all || matches!(command, Command::Fit { .. }) {
            output::fit(&mut w, cfg, &fit)?;
        }
        if all || matches!(command, Command::Simulate | Command::Frontier) {
            let sim = stages::simulate(cfg, &fit).with_context(|| at(Stage::Simulate))?;
            if all || matches!(command, Command::Simulate) {
                output::simulate(&mut w, &sim)?;
            }
            if all || matches!(command, Command::Frontier) {
                let f = stages::frontier(cfg, &sim).with_context(|| at(Stage::Frontier))?;
                output::frontier(&mut w, &f)?;
            }
        }
        if all || matches!(command, Command::PriceOptions) {
            let o = stages::options(cfg, &t, &fit).with_context(|| at(Stage::Options))?;
            output::options(&mut w, &o)?;
        }
    }
    if all || matches!(command, Command::Factors) {
        let f = stages::factors(cfg, &t).with_context(|| at(Stage::Factors))?;
        output::factors(&mut w, &f)?;
    }
    w.config()?;
    Ok(w.written)
}

/// Process exit status for an error: 2 for a missing input, 1 otherwise.
pub fn exit_status(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.downcast_ref::<MissingInput>().is_some()) {
        2
    } else {
        1
    }
}

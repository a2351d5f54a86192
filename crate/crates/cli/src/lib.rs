//! Command-line front end: configuration, the synthetic trace generator,
//! parameter sweeps and the subcommands that chain the library pipeline.

use std::path::PathBuf;

use clap::Parser;

pub mod commands;
pub mod config;
pub mod sweep;
pub mod synth;

/// A solver that ran but did not reach an optimum. Everything else that
/// stops a command is an input error.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct SolverFailure(pub String);

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

/// Exit code for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<SolverFailure>()) {
        EXIT_SOLVER
    } else {
        EXIT_INPUT
    }
}

#[derive(Debug, Parser)]
#[command(name = "vanet", version, about = "Vehicular network graphs, metrics and optimization")]
pub struct Cli {
    /// Run seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Configuration override `key=value`, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: commands::Command,
}

impl Cli {
    /// Defaults, config file, `--set` overrides, then explicit flags.
    pub fn resolve(&self) -> anyhow::Result<config::RunConfig> {
        let mut cfg = config::RunConfig::load(self.config.as_deref(), &self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        commands::apply_flags(&mut cfg, &self.command);
        Ok(cfg)
    }

    pub fn run(&self) -> anyhow::Result<Vec<PathBuf>> {
        commands::run(&self.resolve()?, &self.command)
    }
}

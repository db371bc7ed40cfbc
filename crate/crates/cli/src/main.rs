//! `qudit`: command-line front end for the spin-3/2 ensemble simulator.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use output::Writer;

#[derive(Parser, Debug)]
#[command(name = "qudit", version, about = "Spin-3/2 ODMR, hole-burning and Ramsey simulator")]
struct Cli {
    /// TOML or JSON run configuration (a previous run's .meta.json works too).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "QUDIT_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Eigenlevels and the five transition lines at one field.
    Levels {
        /// µT
        #[arg(long)]
        bz: Option<f64>,
        /// µT
        #[arg(long)]
        bperp: Option<f64>,
    },
    /// Ensemble ODMR spectrum without a pump tone.
    Odmr,
    /// Pump-on, pump-off and lock-in difference spectra.
    Holeburn,
    /// Lock-in spectra swept over B_z.
    Modemap {
        /// µT
        #[arg(long)]
        bperp: Option<f64>,
    },
    /// Ensemble Rabi nutation.
    Rabi,
    /// Two-frequency Ramsey trace with FFT and fit.
    Ramsey {
        /// MHz
        #[arg(long)]
        nu_probe: Option<f64>,
        /// Skip the selection pulse (control run).
        #[arg(long)]
        no_select: bool,
    },
    /// Recover (B_z, B_⊥, 2D) from line positions.
    InvertField,
    /// Effective field from a Ramsey fringe frequency.
    Beff {
        /// MHz
        #[arg(long)]
        nu_probe: Option<f64>,
        /// MHz
        #[arg(long)]
        f_r: Option<f64>,
        /// deg
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Quick consistency checks; exits nonzero on failure.
    Selftest,
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Levels { .. } => "levels",
            Cmd::Odmr => "odmr",
            Cmd::Holeburn => "holeburn",
            Cmd::Modemap { .. } => "modemap",
            Cmd::Rabi => "rabi",
            Cmd::Ramsey { .. } => "ramsey",
            Cmd::InvertField => "invert-field",
            Cmd::Beff { .. } => "beff",
            Cmd::Selftest => "selftest",
        }
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        match *self {
            Cmd::Levels { bz, bperp } => {
                if let Some(v) = bz {
                    cfg.field.bz = v;
                }
                if let Some(v) = bperp {
                    cfg.field.bperp = v;
                }
            }
            Cmd::Modemap { bperp: Some(v) } => cfg.modemap.bperp = v,
            Cmd::Ramsey { nu_probe, no_select } => {
                if let Some(v) = nu_probe {
                    cfg.ramsey.nu_probe = v;
                }
                if no_select {
                    cfg.ramsey.select = false;
                }
            }
            Cmd::Beff { nu_probe, f_r, theta } => {
                if let Some(v) = nu_probe {
                    cfg.beff.nu_probe = v;
                }
                if let Some(v) = f_r {
                    cfg.beff.f_r = v;
                }
                if let Some(v) = theta {
                    cfg.beff.theta = v;
                }
            }
            _ => {}
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("--workers")?;
    }
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cli.cmd.apply(&mut cfg);
    let cfg = cfg.resolve(cli.seed)?;
    let mut w = Writer::new(&cli.out)?;
    let result = match cli.cmd {
        Cmd::Levels { .. } => commands::levels(&cfg, &mut w),
        Cmd::Odmr => commands::odmr(&cfg, &mut w),
        Cmd::Holeburn => commands::holeburn(&cfg, &mut w),
        Cmd::Modemap { .. } => commands::modemap(&cfg, &mut w),
        Cmd::Rabi => commands::rabi(&cfg, &mut w),
        Cmd::Ramsey { .. } => commands::ramsey(&cfg, &mut w),
        Cmd::InvertField => commands::invert_field(&cfg, &mut w),
        Cmd::Beff { .. } => commands::beff(&cfg, &mut w),
        Cmd::Selftest => commands::selftest(&cfg, &mut w),
    };
    // The sidecar is written even for a failed self-test, so the run can be replayed.
    let dir = w.dir().to_path_buf();
    let files = w.sidecar(cli.cmd.name(), &cfg)?;
    eprintln!("wrote {} file(s) to {}", files.len(), dir.display());
    result
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

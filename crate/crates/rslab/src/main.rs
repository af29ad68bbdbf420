//! `rslab`: run stability experiments from TOML configs.
//!
//! Exit status is 0 when every report of the run passes, 1 when some report fails and 2
//! when the run could not be carried out (bad config, refused hypothesis, I/O).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rslab_core::lab::{self, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "rslab", version, about = "Stability lab for the delayed generalized Rayleigh-Stokes equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Relaxation-function suite: cross-method agreement and the qualitative bounds.
    VerifyOmega {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Halanay suite on extremal instances.
    Halanay {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Decay family for `f(t,v) = e^{-t}‖v‖v`.
    Decay {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// Output directory (default: the config's `out`, else `runs/<kind>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon `T`.
    #[arg(long)]
    horizon: Option<f64>,
    /// Number of modes `N`.
    #[arg(long)]
    modes: Option<usize>,
    /// Time step `h`.
    #[arg(long = "grid-h")]
    grid_h: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.horizon {
            cfg.grid.t = Some(t);
        }
        if let Some(n) = self.modes {
            cfg.domain.n = n;
        }
        if let Some(h) = self.grid_h {
            cfg.grid.h = h;
        }
    }
}

fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Dissipativity => "dissipativity",
        ExperimentKind::AsymptoticStability => "asymptotic_stability",
        ExperimentKind::DecayFamily => "decay_family",
        ExperimentKind::HalanaySuite => "halanay_suite",
        ExperimentKind::RelaxationSuite => "relaxation_suite",
    }
}

fn builtin(kind: ExperimentKind) -> ExperimentConfig {
    let text = match kind {
        ExperimentKind::DecayFamily => {
            "[experiment]\nkind = \"decay_family\"\n[nonlin]\nkind = \"quadratic\"\nparams = { p0 = 1.0, rate = 1.0 }\n[grid]\nh = 0.05\n"
        }
        ExperimentKind::HalanaySuite => "[experiment]\nkind = \"halanay_suite\"\n",
        _ => "[experiment]\nkind = \"relaxation_suite\"\n",
    };
    ExperimentConfig::from_toml_str(text).expect("built-in config parses")
}

fn load_or_builtin(path: Option<&Path>, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => builtin(kind),
    };
    if cfg.experiment.kind != kind {
        anyhow::bail!("config kind {:?} does not match this subcommand ({:?})", cfg.experiment.kind, kind);
    }
    Ok(cfg)
}

fn execute(mut cfg: ExperimentConfig, overrides: &Overrides) -> Result<bool> {
    overrides.apply(&mut cfg);
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(kind_name(cfg.experiment.kind)));
    let record = lab::run(&cfg)?;
    record.save(&out).with_context(|| format!("writing {}", out.display()))?;
    print!("{}", record.summary());
    println!("outputs: {}", out.display());
    Ok(record.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, overrides } => {
            ExperimentConfig::load(config).map_err(Into::into).and_then(|c| execute(c, overrides))
        }
        Command::VerifyOmega { config, overrides } => {
            load_or_builtin(config.as_deref(), ExperimentKind::RelaxationSuite).and_then(|c| execute(c, overrides))
        }
        Command::Halanay { config, overrides } => {
            load_or_builtin(config.as_deref(), ExperimentKind::HalanaySuite).and_then(|c| execute(c, overrides))
        }
        Command::Decay { config, overrides } => {
            load_or_builtin(config.as_deref(), ExperimentKind::DecayFamily).and_then(|c| execute(c, overrides))
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

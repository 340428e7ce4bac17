//! Command-line driver. Exit codes: 0 success, 2 configuration or input
//! error, 3 numerical failure, 4 integrity failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use slipinv::config::PipelineConfig;
use slipinv::design::DesignKind;
use slipinv::fit::FitMethod;
use slipinv::io::fmt_f64;
use slipinv::pipeline::{self, Layout};
use slipinv::{Error, Result};

#[derive(Parser)]
#[command(name = "slipinv", version, about = "Polynomial-chaos surrogates and Bayesian slip inversion")]
struct Cli {
    /// Configuration file; built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output root for every stage.
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    lhs_seed: Option<u64>,
    #[arg(long, global = true)]
    mcmc_seed: Option<u64>,
    #[arg(long, global = true)]
    noise_seed: Option<u64>,
    /// MCMC chain length.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Smolyak,
    Lhs,
    Both,
}

impl Kind {
    fn kinds(self) -> Vec<DesignKind> {
        match self {
            Kind::Smolyak => vec![DesignKind::Smolyak],
            Kind::Lhs => vec![DesignKind::Lhs],
            Kind::Both => vec![DesignKind::Smolyak, DesignKind::Lhs],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Nisp,
    Bpdn,
}

impl From<Method> for FitMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Nisp => FitMethod::Nisp,
            Method::Bpdn => FitMethod::Bpdn,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration as TOML.
    InitConfig,
    /// Write the Smolyak and/or LHS design.
    Design {
        #[arg(long, value_enum, default_value = "both")]
        kind: Kind,
    },
    /// Run the forward model at every design point.
    Ensemble {
        #[arg(long, value_enum, default_value = "both")]
        kind: Kind,
    },
    /// Fit a PC expansion.
    Fit {
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// NRE and CDF comparison against the holdout ensemble.
    Validate {
        /// Expansion directory; defaults to the configured method and order.
        #[arg(long)]
        expansion: Option<PathBuf>,
    },
    /// Mean and two-sigma bands plus Sobol indices.
    Moments {
        #[arg(long)]
        expansion: Option<PathBuf>,
    },
    /// Sample the slip posterior given gauge observations.
    Infer {
        #[arg(long)]
        expansion: Option<PathBuf>,
        /// CSV with columns gauge,time_s,eta_m.
        #[arg(long)]
        observations: PathBuf,
    },
    /// Synthetic recovery of planted slips.
    Twin,
    /// Arrival time and peak amplitude along each slip axis.
    Sweep,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.lhs_seed {
        cfg.design.lhs_seed = s;
    }
    if let Some(s) = cli.mcmc_seed {
        cfg.mcmc.seed = s;
    }
    if let Some(s) = cli.noise_seed {
        cfg.twin.noise_seed = s;
    }
    if let Some(n) = cli.iterations {
        cfg.mcmc.iterations = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let layout = Layout::new(&cli.out);
    let default_expansion = || layout.expansion_dir(cfg.fit.method, cfg.basis.order);
    match cli.command {
        Command::InitConfig => print!("{}", cfg.to_toml()),
        Command::Design { kind } => pipeline::cmd_design(&cfg, &layout, &kind.kinds())?,
        Command::Ensemble { kind } => {
            for k in kind.kinds() {
                let ens = pipeline::cmd_ensemble(&cfg, &layout, k)?;
                println!("{}: {} runs, {} failed", k.as_str(), ens.len(), ens.failures());
            }
        }
        Command::Fit { method, order } => {
            let method = method.map(FitMethod::from).unwrap_or(cfg.fit.method);
            let dir = pipeline::cmd_fit(&cfg, &layout, method, order.unwrap_or(cfg.basis.order))?;
            println!("{}", dir.display());
        }
        Command::Validate { expansion } => {
            let r = pipeline::cmd_validate(&cfg, &layout, &expansion.unwrap_or_else(default_expansion))?;
            for s in &r.summaries {
                println!("{}: mean NRE {} peak NRE {} at {} s", s.gauge, fmt_f64(s.mean), fmt_f64(s.peak), s.peak_time_s);
            }
            for (g, d) in &r.ks {
                println!("{g}: KS distance {}", fmt_f64(*d));
            }
        }
        Command::Moments { expansion } => {
            let dir = pipeline::cmd_moments(&cfg, &layout, &expansion.unwrap_or_else(default_expansion))?;
            println!("{}", dir.display());
        }
        Command::Infer { expansion, observations } => {
            let r = pipeline::cmd_infer(&cfg, &layout, &expansion.unwrap_or_else(default_expansion), &observations)?;
            print_parameters(&r);
        }
        Command::Twin => {
            let r = pipeline::cmd_twin(&cfg, &layout)?;
            print_parameters(&r.inference);
            println!(
                "recovered {}/{} slips, sigma_hat {:?}: {}",
                r.slips_recovered(),
                r.planted.len(),
                r.sigma_hat,
                if r.passed() { "recovered" } else { "not recovered" }
            );
        }
        Command::Sweep => {
            let path = pipeline::cmd_sweep(&cfg, &layout)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn print_parameters(r: &pipeline::InferenceReport) {
    println!("acceptance rate {:.3}", r.acceptance_rate);
    for p in &r.parameters {
        println!("{:>10}  MAP {:>10.4}  mean {:>10.4}  HPD [{:.4}, {:.4}]", p.name, p.map, p.mean, p.hpd.0, p.hpd.1);
    }
    println!("Mw (MAP) {:.3}", r.moment_map.1);
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Integrity(_)) {
                eprintln!("hint: rerun the upstream stages so their manifests match");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Argument parsing and dispatch.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use aprsim_core::network::Method;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Config, LayoutKind};
use crate::error::CliError;
use crate::report::{write_atomic, Format, Output, RunReport};
use crate::{calibrate, commands};

#[derive(Debug, Parser)]
#[command(name = "aprsim", version, about = "All-photonic quantum repeater simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// JSON config file; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the machine-readable result here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Print the effective config and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Rate ratio all-photonic / (upper + lower) over a range of p.
    RatioScan(RatioScanArgs),
    /// Closed-form rates of an M-channel, N-node chain.
    Rates(RatesArgs),
    /// Pair weights, twofold rate and false-BSM estimate of the source model.
    Sources,
    /// Simulated tomography followed by maximum-likelihood reconstruction.
    Tomo {
        #[command(subcommand)]
        target: TomoTarget,
    },
    /// Outcome pattern to final pair and correction, checked by ideal enumeration.
    Table(TableArgs),
    /// XX/YY/ZZ fractions and fidelity of every heralded pair.
    Fidelity(FidelityArgs),
    /// Twelve-photon Z-basis distribution.
    Zbasis(ZbasisArgs),
    /// Fit visibility and white noise to the measured fidelities and predict
    /// the final-pair fidelities.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Enumerate,
    Sample,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Enumerate => Method::Enumerate,
            MethodArg::Sample => Method::Sample,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RatioScanArgs {
    #[arg(long, default_value_t = 0.0)]
    pub p_min: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p_max: f64,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Enumerate)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RatesArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TomoTarget {
    /// 81-setting state tomography of the four-photon GHZ state.
    Ghz4(Ghz4Args),
    /// 16-probe detector tomography of one PCM.
    Pcm(PcmArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Ghz4Args {
    /// Shots per setting (default from config).
    #[arg(long)]
    pub shots: Option<u64>,
    /// Visibility of the GHZ PBS.
    #[arg(long)]
    pub visibility: Option<f64>,
    /// White noise on each pair.
    #[arg(long)]
    pub white_noise: Option<f64>,
    /// Fit the white noise so the generated state has this fidelity.
    #[arg(long, conflicts_with = "white_noise")]
    pub target_fidelity: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PcmArgs {
    /// Shots per probe state (default from config).
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub visibility: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TableArgs {
    #[arg(long, value_enum, default_value_t = LayoutKind::AllPhotonic)]
    pub layout: LayoutKind,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FidelityArgs {
    #[arg(long, value_enum, default_value_t = LayoutKind::AllPhotonic)]
    pub layout: LayoutKind,
    /// Inspect this photon pair instead of the layout's own, e.g. `1,10`.
    #[arg(long, value_parser = parse_pair)]
    pub pair: Option<[u8; 2]>,
    #[arg(long, value_enum, default_value_t = MethodArg::Enumerate)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    /// Measured pairs per basis; 0 reports exact fractions.
    #[arg(long, default_value_t = 0)]
    pub shots: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ZbasisArgs {
    #[arg(long, default_value_t = 1.0)]
    pub visibility: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    /// Shots per setting and per probe (default from config).
    #[arg(long)]
    pub shots: Option<u64>,
    /// Skip the network prediction.
    #[arg(long)]
    pub no_network: bool,
}

fn parse_pair(s: &str) -> Result<[u8; 2], String> {
    let parts: Vec<&str> = s.split([',', '&']).collect();
    if parts.len() != 2 {
        return Err(format!("expected two photon ids like 1,10, got {s:?}"));
    }
    let id = |x: &str| x.trim().parse::<u8>().map_err(|e| format!("{x:?}: {e}"));
    Ok([id(parts[0])?, id(parts[1])?])
}

pub fn execute(cmd: &Command, cfg: &Config, seed: u64) -> Result<Output, CliError> {
    match cmd {
        Command::RatioScan(a) => commands::ratio_scan(cfg, a, seed),
        Command::Rates(a) => commands::rates(a),
        Command::Sources => commands::sources(cfg),
        Command::Tomo {
            target: TomoTarget::Ghz4(a),
        } => commands::tomo_ghz4(cfg, a, seed),
        Command::Tomo {
            target: TomoTarget::Pcm(a),
        } => commands::tomo_pcm(cfg, a, seed),
        Command::Table(a) => commands::table(cfg, a),
        Command::Fidelity(a) => commands::fidelity(cfg, a, seed),
        Command::Zbasis(a) => commands::zbasis(a),
        Command::Calibrate(a) => calibrate::calibrate(cfg, a, seed),
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<Config, CliError> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match run_inner(&cli) {
        Ok(code) => code,
        Err(CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("aprsim: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli) -> Result<i32, CliError> {
    let cfg = load_config(cli.config.as_ref())?;
    if cli.dump_config {
        writeln!(std::io::stdout().lock(), "{}", cfg.to_json())?;
        return Ok(0);
    }
    let Some(cmd) = &cli.command else {
        return Err(CliError::Config("no command given (see --help)".into()));
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let start = Instant::now();
    let output = pool.install(|| execute(cmd, &cfg, cli.seed))?;
    let report = RunReport {
        command: serde_json::to_value(cmd).expect("command serializes"),
        config: cfg,
        seed: cli.seed,
        results: output.results.clone(),
        duration_s: start.elapsed().as_secs_f64(),
    };
    let format = cli.format.unwrap_or(output.default_format);
    let machine = || -> Result<Vec<u8>, CliError> {
        Ok(match format {
            Format::Csv => output.table.to_csv()?,
            Format::Json => {
                let mut v = serde_json::to_vec_pretty(&report).expect("report serializes");
                v.push(b'\n');
                v
            }
        })
    };
    let mut stdout = std::io::stdout().lock();
    match (&cli.out, cli.format) {
        (Some(path), _) => {
            write_atomic(path, &machine()?)?;
            write!(stdout, "{}", output.shown().render())?;
        }
        (None, Some(_)) => stdout.write_all(&machine()?)?,
        (None, None) => write!(stdout, "{}", output.shown().render())?,
    }
    if cli.format.is_none() || cli.out.is_some() {
        for n in &output.notes {
            writeln!(stdout, "{n}")?;
        }
    }
    if let Some(msg) = &output.not_converged {
        eprintln!("aprsim: warning: {msg}");
        return Ok(3);
    }
    Ok(0)
}

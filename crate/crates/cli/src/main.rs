#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;
mod placement_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sown_core::{ArrivalProcess, PacketSize};
use toml::{Table, Value};

use config::{parse_assignment, Format, RateModel, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sown",
    version,
    about = "Relay placement for seafloor optical wireless networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Args)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel preset (red, green, blue, or a file in $SOWN_PRESET_DIR).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum)]
    rate_model: Option<RateModel>,
    /// Override any config key, e.g. `--param attenuation_per_m=0.05`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Absolute bisection tolerance on q.
    #[arg(long)]
    tol_q: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal placement of N relays over length L.
    Solve {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        l: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Stability limit of the placement in a file.
    Eval {
        #[arg(long)]
        placement: PathBuf,
        /// Area length; defaults to the sum of the distances.
        #[arg(long)]
        l: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Stability limit and per-node throughput against N.
    SweepN {
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 30)]
        n_max: usize,
        #[arg(long)]
        l: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Stability limit against area length for several N.
    SweepL {
        /// Comma-separated node counts.
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 50.0)]
        l_min: f64,
        #[arg(long, default_value_t = 1000.0)]
        l_max: f64,
        #[arg(long, default_value_t = 20)]
        l_steps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Optimal rectangular grid over an L x H area.
    Solve2d {
        #[arg(long)]
        n_h: Option<usize>,
        #[arg(long)]
        l: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        /// Fix the column count instead of searching for it.
        #[arg(long)]
        n_l: Option<usize>,
        #[arg(long, default_value_t = sown_core::solver2d::DEFAULT_NL_MAX)]
        n_l_max: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo robustness of the optimal placement to position noise.
    Perturb {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        l: Option<f64>,
        /// Comma-separated noise levels in metres.
        #[arg(long, value_delimiter = ',')]
        sigma: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Perturb this placement instead of the optimal one.
        #[arg(long)]
        placement: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Queue simulation over a grid of loads relative to the analytic limit.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        l: Option<f64>,
        /// Comma-separated loads as multiples of q_sup.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.8,0.9,0.95,1.05,1.1,1.2"
        )]
        factors: Vec<f64>,
        #[arg(long, default_value_t = 1e6)]
        packet_bits: f64,
        #[arg(long, value_enum, default_value = "poisson")]
        arrivals: ArrivalArg,
        #[arg(long, value_enum, default_value = "fixed")]
        sizes: SizeArg,
        /// Horizon in mean packet inter-generation times.
        #[arg(long, default_value_t = 1e6)]
        horizon_packets: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        placement: Option<PathBuf>,
        /// Write per-node queue lengths of the first load to this CSV file.
        #[arg(long)]
        series: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Optimal, constant-spacing and vertical-chain layouts side by side.
    Compare {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        l: Option<f64>,
        #[arg(long, default_value_t = 3000.0)]
        vertical_depth: f64,
        #[arg(long, default_value_t = 5)]
        vertical_nl: usize,
        /// Relays per vertical chain; defaults to matching the node count N.
        #[arg(long)]
        vertical_nv: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ArrivalArg {
    Poisson,
    Deterministic,
}

impl From<ArrivalArg> for ArrivalProcess {
    fn from(a: ArrivalArg) -> Self {
        match a {
            ArrivalArg::Poisson => ArrivalProcess::Poisson,
            ArrivalArg::Deterministic => ArrivalProcess::Deterministic,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SizeArg {
    Fixed,
    Exponential,
}

impl From<SizeArg> for PacketSize {
    fn from(s: SizeArg) -> Self {
        match s {
            SizeArg::Fixed => PacketSize::Fixed,
            SizeArg::Exponential => PacketSize::Exponential,
        }
    }
}

/// Flag values that map onto config keys.
#[derive(Default)]
struct Overrides(Table);

impl Overrides {
    fn set(&mut self, key: &str, value: Option<impl Into<Value>>) {
        if let Some(v) = value {
            self.0.insert(key.to_string(), v.into());
        }
    }

    fn count(&mut self, key: &str, value: Option<usize>) {
        self.set(key, value.map(|v| v as i64));
    }
}

fn resolve(common: &Common, f: impl FnOnce(&mut Overrides)) -> Result<RunConfig, CliError> {
    let mut o = Overrides::default();
    for p in &common.params {
        let (k, v) = parse_assignment(p)?;
        o.0.insert(k, v);
    }
    o.set("preset", common.preset.clone());
    o.set(
        "rate_model",
        common.rate_model.map(|m| format!("{m:?}").to_lowercase()),
    );
    o.set("tol_q", common.tol_q);
    o.set(
        "format",
        common.format.map(|m| format!("{m:?}").to_lowercase()),
    );
    o.set(
        "output",
        common.output.as_ref().map(|p| p.display().to_string()),
    );
    f(&mut o);
    RunConfig::resolve(common.config.as_deref(), o.0)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { n, l, common } => {
            let cfg = resolve(&common, |o| {
                o.count("N", n);
                o.set("L", l);
            })?;
            commands::solve(&cfg)
        }
        Command::Eval {
            placement,
            l,
            common,
        } => {
            let cfg = resolve(&common, |o| o.set("L", l))?;
            commands::eval(&cfg, &placement, l.is_some())
        }
        Command::SweepN {
            n_min,
            n_max,
            l,
            common,
        } => {
            let cfg = resolve(&common, |o| o.set("L", l))?;
            commands::sweep_n(&cfg, n_min, n_max)
        }
        Command::SweepL {
            n,
            l_min,
            l_max,
            l_steps,
            common,
        } => {
            let cfg = resolve(&common, |_| {})?;
            commands::sweep_l(&cfg, &n, l_min, l_max, l_steps)
        }
        Command::Solve2d {
            n_h,
            l,
            h,
            n_l,
            n_l_max,
            common,
        } => {
            let cfg = resolve(&common, |o| {
                o.count("N_H", n_h);
                o.set("L", l);
                o.set("H", h);
            })?;
            commands::solve_2d(&cfg, n_l, n_l_max)
        }
        Command::Perturb {
            n,
            l,
            sigma,
            trials,
            seed,
            placement,
            common,
        } => {
            let cfg = resolve(&common, |o| {
                o.count("N", n);
                o.set("L", l);
                o.count("trials", trials);
                o.set("seed", seed.map(|s| s as i64));
            })?;
            commands::perturb(&cfg, &sigma, placement.as_deref())
        }
        Command::Simulate {
            n,
            l,
            factors,
            packet_bits,
            arrivals,
            sizes,
            horizon_packets,
            seed,
            placement,
            series,
            common,
        } => {
            let cfg = resolve(&common, |o| {
                o.count("N", n);
                o.set("L", l);
                o.set("seed", seed.map(|s| s as i64));
            })?;
            let sim = commands::SimArgs {
                factors,
                packet_bits,
                arrivals: arrivals.into(),
                sizes: sizes.into(),
                horizon_packets,
                placement,
                series,
            };
            commands::simulate(&cfg, &sim)
        }
        Command::Compare {
            n,
            l,
            vertical_depth,
            vertical_nl,
            vertical_nv,
            common,
        } => {
            let cfg = resolve(&common, |o| {
                o.count("N", n);
                o.set("L", l);
            })?;
            commands::compare(&cfg, vertical_depth, vertical_nl, vertical_nv)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

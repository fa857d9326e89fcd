use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use curbflow::commands::{self, CommandOutput, Format};
use curbflow::network::FixedPointOptions;
use curbflow::plot::{PlotKind, PlotOptions};
use curbflow::report::{build_report, FlowMode, Report, ReportOptions};
use curbflow::{load_scenario, Error, Result};

#[derive(Parser)]
#[command(name = "curbflow", version, about = "Curbside parking as a network of loss queues")]
struct Cli {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Directory for machine-readable output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulation seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable format. Without --out, printed instead of the summary.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Total arrival rate for an observed occupancy.
    Invert {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        u: f64,
    },
    /// Arrival rate in a d-regular network of identical blocks.
    Uniform {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        degree: u32,
    },
    /// Network flows from demand (solve) or from occupancy (estimate).
    Network {
        #[command(subcommand)]
        mode: NetworkMode,
    },
    /// Congestion-capped prices.
    Optimize(ScenarioArg),
    /// Discrete-event simulation.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Full report: flows, cruising shares, pricing and simulation.
    Report(ScenarioArg),
    /// Plot-ready CSV (and optionally SVG) series.
    Plot {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Reuse a saved report instead of solving the scenario.
        #[arg(long)]
        report: Option<PathBuf>,
        /// arrival-curves, cruising-share, pricing, simulation; all available when omitted.
        #[arg(long = "kind")]
        kinds: Vec<String>,
        /// Stall counts for arrival curves.
        #[arg(long = "k", value_delimiter = ',')]
        ks: Vec<u32>,
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Subcommand)]
enum NetworkMode {
    Solve(ScenarioArg),
    Estimate(ScenarioArg),
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario JSON file (same as --scenario).
    path: Option<PathBuf>,
}

fn scenario_path(cli: &Cli, arg: &ScenarioArg) -> Result<PathBuf> {
    arg.path
        .clone()
        .or_else(|| cli.scenario.clone())
        .ok_or_else(|| Error::InvalidInput("a scenario file is required (--scenario <path>)".into()))
}

fn emit(cli: &Cli, out: &CommandOutput) -> Result<()> {
    let format = match cli.format {
        Some(FormatArg::Csv) => Format::Csv,
        _ => Format::Json,
    };
    match (&cli.out, cli.format) {
        (Some(dir), _) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(out.file_name(format)), out.machine(format))?;
            print!("{}", out.summary);
        }
        (None, Some(_)) => print!("{}", out.machine(format)),
        (None, None) => print!("{}", out.summary),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let output = match &cli.command {
        Command::Invert { k, mu, u } => commands::cmd_invert(*k, *mu, *u)?,
        Command::Uniform { k, mu, lambda, degree } => commands::cmd_uniform(*k, *mu, *lambda, *degree)?,
        Command::Network { mode } => {
            let (arg, mode) = match mode {
                NetworkMode::Solve(a) => (a, FlowMode::Forward),
                NetworkMode::Estimate(a) => (a, FlowMode::Estimate),
            };
            let scenario = load_scenario(&scenario_path(cli, arg)?)?;
            commands::cmd_network(scenario, mode, &FixedPointOptions::default())?
        }
        Command::Optimize(arg) => commands::cmd_optimize(load_scenario(&scenario_path(cli, arg)?)?)?,
        Command::Simulate {
            scenario,
            horizon,
            replications,
        } => {
            let scenario = load_scenario(&scenario_path(cli, scenario)?)?;
            let mut cfg = commands::sim_config(&scenario, cli.seed);
            if let Some(h) = horizon {
                cfg.horizon = *h;
            }
            if let Some(r) = replications {
                cfg.replications = *r;
            }
            commands::cmd_simulate(scenario, &cfg)?
        }
        Command::Report(arg) => commands::cmd_report(load_scenario(&scenario_path(cli, arg)?)?, cli.seed)?,
        Command::Plot {
            scenario,
            report,
            kinds,
            ks,
            svg,
        } => {
            let report = match report {
                Some(p) => load_report(p)?,
                None => {
                    let s = load_scenario(&scenario_path(cli, scenario)?)?;
                    let opts = ReportOptions {
                        sim: s.sim.as_ref().map(|_| commands::sim_config(&s, cli.seed)),
                        ..ReportOptions::full()
                    };
                    build_report(s, &opts)?
                }
            };
            let kinds = kinds
                .iter()
                .map(|k| k.parse::<PlotKind>())
                .collect::<Result<Vec<_>>>()?;
            let opts = PlotOptions {
                ks: ks.clone(),
                svg: *svg,
                ..Default::default()
            };
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("plots"));
            for f in commands::cmd_plot(&report, &kinds, &opts, &dir)? {
                println!("{}", f.display());
            }
            return Ok(());
        }
    };
    emit(cli, &output)
}

fn load_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CURBFLOW_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

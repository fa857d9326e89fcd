//! Subcommand bodies behind the `curbflow` binary.
//!
//! Each command returns a human summary and its machine-readable output in
//! both formats; the binary decides where they go.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::inversion::{self, OccupancyTarget, UniformSolution};
use crate::loss_queue::QueueParams;
use crate::network::FixedPointOptions;
use crate::plot::{self, PlotKind, PlotOptions};
use crate::report::{build_report, FlowMode, Report, ReportOptions};
use crate::scenario::Scenario;
use crate::simulate::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    /// Stem for files written under `--out`.
    pub name: &'static str,
    pub summary: String,
    pub json: String,
    pub csv: String,
}

impl CommandOutput {
    pub fn machine(&self, format: Format) -> &str {
        match format {
            Format::Json => &self.json,
            Format::Csv => &self.csv,
        }
    }

    pub fn file_name(&self, format: Format) -> String {
        match format {
            Format::Json => format!("{}.json", self.name),
            Format::Csv => format!("{}.csv", self.name),
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct InvertOutput {
    k: u32,
    mu: f64,
    u: f64,
    y: f64,
}

pub fn cmd_invert(k: u32, mu: f64, u: f64) -> Result<CommandOutput> {
    let params = QueueParams::new(k, mu)?;
    let y = inversion::invert_occupancy(params, OccupancyTarget::new(u)?)?;
    let out = InvertOutput { k, mu, u, y };
    Ok(CommandOutput {
        name: "invert",
        summary: format!("y = {y:.6}\n"),
        json: json(&out)?,
        csv: format!("k,mu,u,y\n{k},{mu},{u},{y}\n"),
    })
}

#[derive(Serialize)]
struct UniformOutput {
    k: u32,
    mu: f64,
    lambda: f64,
    degree: u32,
    #[serde(flatten)]
    solution: UniformSolution,
}

pub fn cmd_uniform(k: u32, mu: f64, lambda: f64, degree: u32) -> Result<CommandOutput> {
    let params = QueueParams::new(k, mu)?;
    let sol = inversion::solve_uniform(params, lambda, degree)?;
    let csv = format!(
        "k,mu,lambda,degree,y,x\n{k},{mu},{lambda},{degree},{},{}\n",
        sol.y, sol.per_neighbor_rejection
    );
    let summary = format!("y = {:.6}\nx = {:.6}\n", sol.y, sol.per_neighbor_rejection);
    let out = UniformOutput {
        k,
        mu,
        lambda,
        degree,
        solution: sol,
    };
    Ok(CommandOutput {
        name: "uniform",
        summary,
        json: json(&out)?,
        csv,
    })
}

fn flows_table(report: &Report) -> Result<String> {
    let f = report.flows()?;
    let mut csv = String::from("id,y,rejection_out,rejection_in,occupancy,lambda\n");
    for i in 0..f.ids.len() {
        let lambda = match &f.lambda_inferred {
            Some(l) => l[i].to_string(),
            None => report
                .scenario
                .blocks
                .iter()
                .find(|b| b.id == f.ids[i])
                .and_then(|b| b.lambda)
                .map(|l| l.to_string())
                .unwrap_or_default(),
        };
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            f.ids[i], f.y[i], f.rejection_out[i], f.rejection_in[i], f.occupancy[i], lambda
        )
        .unwrap();
    }
    Ok(csv)
}

fn warnings_summary(report: &Report, s: &mut String) {
    for w in &report.warnings {
        writeln!(s, "warning: {w}").unwrap();
    }
}

pub fn cmd_network(scenario: Scenario, mode: FlowMode, opts: &FixedPointOptions) -> Result<CommandOutput> {
    let mut report = Report::new(scenario)?;
    report.solve_flows(mode, opts)?;
    let f = report.flows()?;
    let mut summary = String::new();
    writeln!(
        summary,
        "{:<12} {:>12} {:>12} {:>12} {:>9}",
        "block", "y", "rejected", "inflow", "u"
    )
    .unwrap();
    for i in 0..f.ids.len() {
        writeln!(
            summary,
            "{:<12} {:>12.6} {:>12.6} {:>12.6} {:>9.6}",
            f.ids[i], f.y[i], f.rejection_out[i], f.rejection_in[i], f.occupancy[i]
        )
        .unwrap();
    }
    if mode == FlowMode::Forward {
        writeln!(summary, "converged in {} iterations", f.iterations).unwrap();
    }
    for c in &report.cruising {
        writeln!(summary, "cruising share {}: {:.4}", c.block, c.share).unwrap();
    }
    warnings_summary(&report, &mut summary);
    Ok(CommandOutput {
        name: "network",
        csv: flows_table(&report)?,
        json: report.to_json()?,
        summary,
    })
}

pub fn cmd_optimize(scenario: Scenario) -> Result<CommandOutput> {
    let mut report = Report::new(scenario)?;
    report.optimize()?;
    let p = report.pricing.as_ref().expect("optimize fills pricing");
    let s = &p.solution;
    let mut summary = String::new();
    let mut csv = String::from("id,baseline_price,price,floor,baseline_occupancy,occupancy,rejection\n");
    writeln!(
        summary,
        "{:<12} {:>10} {:>10} {:>9} {:>9} {:>11}",
        "block", "price0", "price", "u0", "u", "rejected"
    )
    .unwrap();
    for i in 0..s.ids.len() {
        writeln!(
            summary,
            "{:<12} {:>10.4} {:>10.4} {:>9.4} {:>9.4} {:>11.6}",
            s.ids[i], p.baseline_prices[i], s.prices[i], p.baseline_occupancies[i], s.occupancies[i], s.rejections[i]
        )
        .unwrap();
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.ids[i], p.baseline_prices[i], s.prices[i], s.floors[i], p.baseline_occupancies[i], s.occupancies[i], s.rejections[i]
        )
        .unwrap();
    }
    writeln!(
        summary,
        "objective {:.6}, {} iterations, kkt residual {:.3e}",
        s.objective, s.iterations, s.kkt_residual
    )
    .unwrap();
    warnings_summary(&report, &mut summary);
    Ok(CommandOutput {
        name: "optimize",
        json: report.to_json()?,
        csv,
        summary,
    })
}

/// Simulation settings: the scenario's, else defaults, with a seed override.
pub fn sim_config(scenario: &Scenario, seed: Option<u64>) -> SimConfig {
    let mut cfg = scenario.sim.clone().unwrap_or_default();
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg
}

pub fn cmd_simulate(scenario: Scenario, config: &SimConfig) -> Result<CommandOutput> {
    let mut report = Report::new(scenario)?;
    if let Some(mode) = FlowMode::infer(&report.scenario) {
        report.solve_flows(mode, &FixedPointOptions::default())?;
    }
    report.simulate(config)?;
    let sim = report.sim.as_ref().expect("simulate fills sim");
    let r = &sim.result;
    let mut summary = String::new();
    let mut csv = String::from("id,occupancy,half_width,blocking,rejection_rate,analytic_occupancy\n");
    writeln!(
        summary,
        "{:<12} {:>9} {:>9} {:>9} {:>9}",
        "block", "u_sim", "+/-", "u_model", "gap"
    )
    .unwrap();
    for (i, id) in r.ids.iter().enumerate() {
        let gap = sim.comparison.iter().find(|g| &g.block == id);
        writeln!(
            summary,
            "{:<12} {:>9.5} {:>9.5} {:>9} {:>9}",
            id,
            r.occupancy[i].mean,
            r.occupancy[i].half_width,
            gap.map(|g| format!("{:.5}", g.analytic)).unwrap_or_default(),
            gap.and_then(|g| g.relative_gap)
                .map(|v| format!("{:.2}%", 100.0 * v))
                .unwrap_or_default()
        )
        .unwrap();
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            id,
            r.occupancy[i].mean,
            r.occupancy[i].half_width,
            r.blocking[i].mean,
            r.rejection_rate[i].mean,
            gap.map(|g| g.analytic.to_string()).unwrap_or_default()
        )
        .unwrap();
    }
    let a = &r.accounting;
    writeln!(
        summary,
        "drivers: {} arrived, {} parked, {} circulating, {} hop-capped, {} exited",
        a.arrivals, a.parked, a.circulating, a.hop_capped, a.exited
    )
    .unwrap();
    warnings_summary(&report, &mut summary);
    Ok(CommandOutput {
        name: "simulate",
        json: report.to_json()?,
        csv,
        summary,
    })
}

pub fn cmd_report(scenario: Scenario, seed: Option<u64>) -> Result<CommandOutput> {
    let opts = ReportOptions {
        sim: scenario.sim.as_ref().map(|_| sim_config(&scenario, seed)),
        ..ReportOptions::full()
    };
    let report = build_report(scenario, &opts)?;
    let mut summary = String::new();
    if let Some(name) = &report.scenario.name {
        writeln!(summary, "scenario {name}").unwrap();
    }
    writeln!(summary, "input hash {}", report.input_hash).unwrap();
    if let Some(f) = &report.flows {
        let total: f64 = f.flows.rejection_out.iter().sum();
        writeln!(
            summary,
            "network ({:?}): {} blocks, total rejection {:.4} veh/hr",
            f.mode,
            f.flows.ids.len(),
            total
        )
        .unwrap();
    }
    if let Some(p) = &report.pricing {
        writeln!(
            summary,
            "pricing: {} blocks priced, objective {:.4}",
            p.solution.ids.len(),
            p.solution.objective
        )
        .unwrap();
    }
    if let Some(s) = &report.sim {
        writeln!(
            summary,
            "simulation: {} replication(s), {} drivers",
            s.result.replications, s.result.accounting.arrivals
        )
        .unwrap();
    }
    warnings_summary(&report, &mut summary);
    let csv = if report.flows.is_some() {
        flows_table(&report)?
    } else {
        String::new()
    };
    Ok(CommandOutput {
        name: "report",
        json: report.to_json()?,
        csv,
        summary,
    })
}

pub fn cmd_plot(report: &Report, kinds: &[PlotKind], opts: &PlotOptions, dir: &Path) -> Result<Vec<PathBuf>> {
    plot::emit_plot_data(report, kinds, opts, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_examples() {
        assert_eq!(cmd_invert(2, 1.0, 0.4).unwrap().summary, "y = 1.000000\n");
        let u = cmd_uniform(1, 1.0, 0.5, 4).unwrap();
        assert_eq!(u.summary, "y = 1.000000\nx = 0.125000\n");
        assert!(u.csv.starts_with("k,mu,lambda,degree,y,x\n1,1,0.5,4,"));
    }

    #[test]
    fn invert_rejects_out_of_range() {
        assert_eq!(cmd_invert(2, 1.0, 1.2).unwrap_err().exit_code(), 2);
        assert_eq!(cmd_uniform(1, 1.0, 2.0, 4).unwrap_err().exit_code(), 3);
    }
}

//! Plot-ready CSV series, with optional static SVG renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inversion::{invert_occupancy, OccupancyTarget};
use crate::loss_queue::QueueParams;
use crate::report::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlotKind {
    /// Total arrival rate against occupancy, one series per stall count.
    ArrivalCurves,
    /// Share of through-traffic that is cruising, per block.
    Cruising,
    /// Prices, occupancy and rejections before and after optimization.
    Pricing,
    /// Simulated against analytic occupancy.
    Simulation,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::ArrivalCurves,
        PlotKind::Cruising,
        PlotKind::Pricing,
        PlotKind::Simulation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ArrivalCurves => "arrival_curves",
            PlotKind::Cruising => "cruising_share",
            PlotKind::Pricing => "pricing",
            PlotKind::Simulation => "simulation",
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| Error::invalid(format!("unknown plot kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    /// Stall counts for the arrival curves; empty means those in the scenario.
    pub ks: Vec<u32>,
    pub mu: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub points: usize,
    pub svg: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            ks: Vec::new(),
            mu: 1.0,
            u_min: 0.30,
            u_max: 0.98,
            points: 69,
            svg: false,
        }
    }
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn u_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSeries {
    pub k: u32,
    pub mu: f64,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn arrival_curves(ks: &[u32], mu: f64, grid: &[f64]) -> Result<Vec<CurveSeries>> {
    ks.iter()
        .map(|&k| {
            let params = QueueParams::new(k, mu)?;
            let y = grid
                .iter()
                .map(|u| invert_occupancy(params, OccupancyTarget::new(*u)?))
                .collect::<Result<Vec<_>>>()?;
            Ok(CurveSeries {
                k,
                mu,
                u: grid.to_vec(),
                y,
            })
        })
        .collect()
}

/// Write the requested series into `dir`. When `kinds` is empty, every
/// series the report supports is written and the rest are skipped.
pub fn emit_plot_data(
    report: &Report,
    kinds: &[PlotKind],
    opts: &PlotOptions,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if report.scenario.blocks.is_empty() {
        return Err(Error::MissingResult(
            "empty scenario: no block-faces to plot".into(),
        ));
    }
    let explicit = !kinds.is_empty();
    let kinds: Vec<PlotKind> = if explicit {
        kinds.to_vec()
    } else {
        PlotKind::ALL.to_vec()
    };
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for kind in kinds {
        let charts = match kind {
            PlotKind::ArrivalCurves => Some(arrivals(report, opts)?),
            PlotKind::Cruising => cruising(report, explicit)?,
            PlotKind::Pricing => pricing(report, explicit)?,
            PlotKind::Simulation => simulation(report, explicit)?,
        };
        let Some(chart) = charts else { continue };
        let csv_path = dir.join(format!("{}.csv", kind.name()));
        fs::write(&csv_path, &chart.csv)?;
        written.push(csv_path);
        if opts.svg {
            let svg_path = dir.join(format!("{}.svg", kind.name()));
            fs::write(&svg_path, chart.svg)?;
            written.push(svg_path);
        }
    }
    Ok(written)
}

struct Chart {
    csv: String,
    svg: String,
}

fn missing(explicit: bool, what: &str) -> Result<Option<Chart>> {
    if explicit {
        Err(Error::MissingResult(format!("report has no {what}")))
    } else {
        Ok(None)
    }
}

fn arrivals(report: &Report, opts: &PlotOptions) -> Result<Chart> {
    let mut ks = opts.ks.clone();
    if ks.is_empty() {
        ks = report.scenario.blocks.iter().map(|b| b.params.k()).collect();
        ks.sort_unstable();
        ks.dedup();
    }
    let grid = u_grid(opts.u_min, opts.u_max, opts.points);
    let curves = arrival_curves(&ks, opts.mu, &grid)?;
    let mut csv = String::from("k,mu,u,y\n");
    for c in &curves {
        for (u, y) in c.u.iter().zip(&c.y) {
            writeln!(csv, "{},{},{},{}", c.k, c.mu, u, y).unwrap();
        }
    }
    let series: Vec<(String, Vec<(f64, f64)>)> = curves
        .iter()
        .map(|c| {
            (
                format!("k = {}", c.k),
                c.u.iter().copied().zip(c.y.iter().copied()).collect(),
            )
        })
        .collect();
    let svg = line_svg("Total arrival rate vs occupancy", "occupancy u", "y (veh/hr)", &series);
    Ok(Chart { csv, svg })
}

fn cruising(report: &Report, explicit: bool) -> Result<Option<Chart>> {
    if report.flows.is_none() || report.cruising.is_empty() {
        return missing(explicit, "cruising shares (needs a network solve and through_traffic)");
    }
    let mut csv = String::from("block,circulating_inflow,through_traffic,share,out_of_range\n");
    for c in &report.cruising {
        writeln!(
            csv,
            "{},{},{},{},{}",
            c.block, c.inflow, c.through_traffic, c.share, c.out_of_range
        )
        .unwrap();
    }
    let cats: Vec<String> = report.cruising.iter().map(|c| c.block.clone()).collect();
    let vals: Vec<f64> = report.cruising.iter().map(|c| c.share).collect();
    let svg = bar_svg(
        "Share of through-traffic cruising for parking",
        &cats,
        &[("share".into(), vals)],
    );
    Ok(Some(Chart { csv, svg }))
}

fn pricing(report: &Report, explicit: bool) -> Result<Option<Chart>> {
    let Some(p) = &report.pricing else {
        return missing(explicit, "pricing solution");
    };
    let s = &p.solution;
    let mut csv = String::from(
        "block,price_before,price_after,occupancy_before,occupancy_after,rejection_before,rejection_after\n",
    );
    for i in 0..s.ids.len() {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.ids[i],
            p.baseline_prices[i],
            s.prices[i],
            p.baseline_occupancies[i],
            s.occupancies[i],
            p.baseline_rejections[i],
            s.rejections[i]
        )
        .unwrap();
    }
    let svg = bar_svg(
        "Occupancy before and after pricing",
        &s.ids,
        &[
            ("before".into(), p.baseline_occupancies.clone()),
            ("after".into(), s.occupancies.clone()),
        ],
    );
    Ok(Some(Chart { csv, svg }))
}

fn simulation(report: &Report, explicit: bool) -> Result<Option<Chart>> {
    let Some(sim) = &report.sim else {
        return missing(explicit, "simulation");
    };
    let r = &sim.result;
    let mut csv = String::from("block,simulated,half_width,analytic,relative_gap\n");
    for (i, id) in r.ids.iter().enumerate() {
        let gap = sim.comparison.iter().find(|g| &g.block == id);
        let analytic = gap.map(|g| g.analytic.to_string()).unwrap_or_default();
        let rel = gap
            .and_then(|g| g.relative_gap)
            .map(|v| v.to_string())
            .unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{},{}",
            id, r.occupancy[i].mean, r.occupancy[i].half_width, analytic, rel
        )
        .unwrap();
    }
    let mut groups = vec![(
        "simulated".to_string(),
        r.occupancy.iter().map(|e| e.mean).collect::<Vec<_>>(),
    )];
    if !sim.comparison.is_empty() {
        groups.push((
            "analytic".into(),
            sim.comparison.iter().map(|g| g.analytic).collect(),
        ));
    }
    let svg = bar_svg("Simulated and analytic occupancy", &r.ids, &groups);
    Ok(Some(Chart { csv, svg }))
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    )
    .unwrap();
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn line_svg(title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0_f64);
    for (x, y) in pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y1 = y1.max(*y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / y1 * (H - 2.0 * PAD);
    let mut s = svg_open(title);
    for (i, (name, p)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let d: Vec<String> = p
            .iter()
            .enumerate()
            .map(|(j, (x, y))| format!("{}{:.2} {:.2}", if j == 0 { 'M' } else { 'L' }, sx(*x), sy(*y)))
            .collect();
        writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.join(" ")).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            PAD + 10.0,
            PAD + 14.0 * (i + 1) as f64,
            escape(name)
        )
        .unwrap();
    }
    axis_labels(&mut s, xlabel, ylabel, (x0, x1), y1);
    s.push_str("</svg>\n");
    s
}

fn axis_labels(s: &mut String, xlabel: &str, ylabel: &str, x: (f64, f64), ymax: f64) {
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(xlabel)).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    )
    .unwrap();
    writeln!(s, r#"<text x="{PAD}" y="{}" text-anchor="middle">{:.2}</text>"#, H - PAD + 16.0, x.0).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{:.2}</text>"#, W - PAD, H - PAD + 16.0, x.1).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, PAD - 4.0, PAD + 4.0, ymax).unwrap();
}

fn bar_svg(title: &str, categories: &[String], groups: &[(String, Vec<f64>)]) -> String {
    let ymax = groups
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut s = svg_open(title);
    let slot = (W - 2.0 * PAD) / categories.len().max(1) as f64;
    let bar = slot * 0.8 / groups.len().max(1) as f64;
    for (g, (name, vals)) in groups.iter().enumerate() {
        let color = COLORS[g % COLORS.len()];
        for (c, v) in vals.iter().enumerate() {
            let h = v / ymax * (H - 2.0 * PAD);
            let x = PAD + c as f64 * slot + slot * 0.1 + g as f64 * bar;
            writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="{bar:.2}" height="{h:.2}" fill="{color}"/>"#,
                H - PAD - h
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 80.0,
            PAD + 14.0 * (g + 1) as f64,
            escape(name)
        )
        .unwrap();
    }
    for (c, name) in categories.iter().enumerate() {
        let x = PAD + (c as f64 + 0.5) * slot;
        writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, H - PAD + 14.0, escape(name)).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, PAD - 4.0, PAD + 4.0, ymax).unwrap();
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::BlockFace;
    use crate::report::{build_report, ReportOptions};
    use crate::scenario::Scenario;

    #[test]
    fn curves_are_increasing_and_convex() {
        let grid = u_grid(0.30, 0.98, 69);
        for c in arrival_curves(&[1, 5, 10], 1.0, &grid).unwrap() {
            let d: Vec<f64> = c.y.windows(2).map(|w| w[1] - w[0]).collect();
            assert!(d.iter().all(|x| *x > 0.0), "k={}", c.k);
            assert!(d.windows(2).all(|w| w[1] > w[0]), "k={}", c.k);
        }
    }

    #[test]
    fn simulation_series_absent_without_sim() {
        let s = Scenario {
            blocks: vec![BlockFace::new("a", QueueParams::new(3, 1.0).unwrap()).with_lambda(1.0)],
            ..Default::default()
        };
        let r = build_report(s, &ReportOptions::full()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&r, &[], &PlotOptions { svg: true, ..Default::default() }, dir.path()).unwrap();
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"arrival_curves.csv".to_string()));
        assert!(names.contains(&"arrival_curves.svg".to_string()));
        assert!(!names.iter().any(|n| n.starts_with("simulation")));
        let err = emit_plot_data(&r, &[PlotKind::Simulation], &PlotOptions::default(), dir.path());
        assert!(matches!(err, Err(Error::MissingResult(_))));
    }

    #[test]
    fn empty_scenario_is_named_error() {
        let r = Report::new(Scenario::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = emit_plot_data(&r, &[], &PlotOptions::default(), dir.path()).unwrap_err();
        assert!(err.to_string().contains("empty scenario"));
    }

    #[test]
    fn kind_names_parse() {
        for k in PlotKind::ALL {
            assert_eq!(k.name().parse::<PlotKind>().unwrap(), k);
        }
        assert!("pie".parse::<PlotKind>().is_err());
    }
}

//! Write plot-ready CSV and SVG series for the bundled scenario.
//!
//! `cargo run --example plot_data -- <out-dir>`

use std::path::{Path, PathBuf};

use curbflow::plot::{emit_plot_data, PlotOptions};
use curbflow::report::{build_report, ReportOptions};
use curbflow::simulate::SimConfig;

fn main() -> curbflow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "plots".into());
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/mission/scenario.json");
    let scenario = curbflow::load_scenario(&path)?;
    let opts = ReportOptions {
        sim: Some(SimConfig {
            horizon: 1_000.0,
            warmup: 20.0,
            seed: 7,
            ..Default::default()
        }),
        ..ReportOptions::full()
    };
    let report = build_report(scenario, &opts)?;
    let plot = PlotOptions {
        ks: vec![1, 5, 10, 20],
        svg: true,
        ..Default::default()
    };
    for file in emit_plot_data(&report, &[], &plot, &out)? {
        println!("{}", file.display());
    }
    Ok(())
}

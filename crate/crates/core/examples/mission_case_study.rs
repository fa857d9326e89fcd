//! The bundled Mission-style grid: two saturated block-faces, caps at 20% of
//! their current rejection, priced so the caps hold.

use std::path::Path;

use curbflow::report::{build_report, ReportOptions};

fn main() -> curbflow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/mission/scenario.json");
    let scenario = curbflow::load_scenario(&path)?;
    let opts = ReportOptions {
        simulate: false,
        ..ReportOptions::full()
    };
    let report = build_report(scenario, &opts)?;

    let flows = report.flows()?;
    let total: f64 = flows.rejection_out.iter().sum();
    println!("{} block-faces, {total:.2} rejected veh/hr in total", flows.ids.len());

    let pricing = report.pricing.as_ref().expect("scenario carries elasticities");
    let s = &pricing.solution;
    let mut before = 0.0;
    let mut after = 0.0;
    for i in 0..s.ids.len() {
        if s.prices[i] != pricing.baseline_prices[i] {
            println!(
                "{:<14} u {:.2} -> {:.4}, price ${:.2} -> ${:.2}, rejected {:.2} -> {:.2} veh/hr",
                s.ids[i],
                pricing.baseline_occupancies[i],
                s.occupancies[i],
                pricing.baseline_prices[i],
                s.prices[i],
                pricing.baseline_rejections[i],
                s.rejections[i]
            );
            before += pricing.baseline_rejections[i];
            after += s.rejections[i];
        }
    }
    println!("capped blocks: {before:.2} -> {after:.2} veh/hr ({:.0}% less)", 100.0 * (1.0 - after / before));
    for c in report.cruising.iter().filter(|c| c.share > 0.03) {
        println!("{} carries {:.1}% cruising traffic", c.block, 100.0 * c.share);
    }
    Ok(())
}

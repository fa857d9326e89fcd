//! Cheapest prices that keep each block under its rejection cap.

use curbflow::loss_queue::QueueParams;
use curbflow::pricing::{optimize_prices, ElasticityModel, PricedBlock, PricingProblem};

fn main() -> curbflow::Result<()> {
    let alpha = ElasticityModel::slope_from_elasticity(-0.21, 3.0, 0.8)?;
    let block = |id: &str, k: u32, cap: f64| -> curbflow::Result<PricedBlock> {
        Ok(PricedBlock {
            id: id.into(),
            params: QueueParams::new(k, 0.75)?,
            model: ElasticityModel::with_full_range(alpha)?,
            cap,
        })
    };
    let problem = PricingProblem {
        blocks: vec![
            block("busy", 20, 2.0)?,
            block("steady", 15, 0.5)?,
            block("quiet", 8, f64::INFINITY)?,
        ],
        ..Default::default()
    };
    let s = optimize_prices(&problem)?;
    println!("slope alpha = {alpha:.5} occupancy per dollar");
    for i in 0..s.ids.len() {
        println!(
            "{:<7} price ${:>6.3}/hr  occupancy {:.4}  rejected {:>7.4}/hr",
            s.ids[i], s.prices[i], s.occupancies[i], s.rejections[i]
        );
    }
    println!(
        "gradient path agrees with the per-block floors to {:.1e} after {} steps",
        s.closed_form_gap, s.iterations
    );
    Ok(())
}

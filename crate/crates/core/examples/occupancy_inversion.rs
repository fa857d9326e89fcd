//! From an observed occupancy back to the total arrival rate, and how
//! steeply that rate climbs near full occupancy.

use curbflow::inversion::{arrival_curvature, arrival_sensitivity, invert_occupancy, OccupancyTarget};
use curbflow::loss_queue::QueueParams;

fn main() -> curbflow::Result<()> {
    for k in [1, 5, 10, 20] {
        let block = QueueParams::new(k, 1.0)?;
        println!("k = {k}");
        for u in [0.5, 0.7, 0.85, 0.9, 0.95, 0.98] {
            let target = OccupancyTarget::new(u)?;
            println!(
                "  u = {u:.2}  y = {:>9.4}  dy/du = {:>10.3}  d2y/du2 = {:>12.3}",
                invert_occupancy(block, target)?,
                arrival_sensitivity(block, target)?,
                arrival_curvature(block, target)?
            );
        }
    }
    Ok(())
}

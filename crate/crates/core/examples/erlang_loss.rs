//! Blocking and occupancy of a single block-face as demand grows.

use curbflow::loss_queue::{erlang_blocking, occupancy, stationary_distribution, QueueParams};

fn main() -> curbflow::Result<()> {
    // 12 stalls, two-hour average stay
    let block = QueueParams::new(12, 0.5)?;
    println!("{:>8} {:>10} {:>10}", "y/hr", "blocking", "occupancy");
    for y in [1.0, 3.0, 5.0, 6.0, 8.0, 12.0, 20.0] {
        println!(
            "{y:>8.1} {:>10.5} {:>10.5}",
            erlang_blocking(block, y)?,
            occupancy(block, y)?
        );
    }

    let profile = stationary_distribution(block, 6.0)?;
    let busiest = profile
        .pi
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    println!("at 6 veh/hr the most likely state is {busiest} stalls taken");
    Ok(())
}

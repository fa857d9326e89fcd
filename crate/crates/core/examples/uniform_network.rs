//! A grid where every block-face looks the same: one queue stands in for all.

use curbflow::inversion::solve_uniform;
use curbflow::loss_queue::{occupancy, QueueParams};

fn main() -> curbflow::Result<()> {
    let block = QueueParams::new(8, 1.0)?;
    let degree = 4;
    for lambda in [2.0, 4.0, 6.0, 7.0, 7.5, 7.9] {
        let s = solve_uniform(block, lambda, degree)?;
        println!(
            "lambda {lambda:>4.1}: y = {:>8.4}, u = {:.4}, circulating to each neighbour {:.4}/hr",
            s.y,
            occupancy(block, s.y)?,
            s.per_neighbor_rejection
        );
    }
    match solve_uniform(block, 8.0, degree) {
        Err(e) => println!("lambda 8.0: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

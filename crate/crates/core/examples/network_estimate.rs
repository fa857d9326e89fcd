//! Infer demand and cruising traffic on a small street loop from occupancy
//! counts, then check by solving forward from the inferred demand.

use curbflow::loss_queue::QueueParams;
use curbflow::network::{cruising_share, BlockFace, Edge, FixedPointOptions, Network, StreetGraph};

fn main() -> curbflow::Result<()> {
    let ids = ["north", "east", "south", "west"];
    let observed = [0.92, 0.75, 0.60, 0.81];
    let blocks: Vec<BlockFace> = ids
        .iter()
        .zip(observed)
        .map(|(id, u)| {
            BlockFace::new(*id, QueueParams::new(10, 1.0).unwrap())
                .with_observed_u(u)
                .with_through_traffic(40.0)
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..4 {
        edges.push(Edge::weighted(ids[i], ids[(i + 1) % 4], 0.7));
        edges.push(Edge::new(ids[i], ids[(i + 3) % 4]));
    }
    let graph = StreetGraph::new(ids.iter().map(|s| s.to_string()).collect(), edges);
    let net = Network::new(&graph, &blocks)?;

    let est = net.estimate_from_occupancy()?;
    let lambda = est.lambda_inferred.clone().unwrap_or_default();
    for (i, b) in blocks.iter().enumerate() {
        let share = cruising_share(&est, b)?;
        println!(
            "{:<6} y = {:>7.3}  lambda = {:>7.3}  circulating in = {:>6.3}  cruising share {:.1}%",
            b.id,
            est.y[i],
            lambda[i],
            est.rejection_in[i],
            100.0 * share.share
        );
    }

    let with_demand: Vec<BlockFace> = blocks
        .iter()
        .zip(&lambda)
        .map(|(b, l)| BlockFace::new(b.id.clone(), b.params).with_lambda(*l))
        .collect();
    let fwd = Network::new(&graph, &with_demand)?.forward_solve(&FixedPointOptions::default())?;
    let worst = fwd
        .occupancy
        .iter()
        .zip(observed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("forward solve reproduces the observations to {worst:.1e} in {} iterations", fwd.iterations);
    Ok(())
}

//! Drive the discrete-event simulator on a two-block loop and compare with
//! the analytic fixed point, under three parking-duration distributions.

use curbflow::loss_queue::QueueParams;
use curbflow::network::{BlockFace, Edge, FixedPointOptions, Network, StreetGraph};
use curbflow::simulate::{compare_occupancy, replicate, ServiceDist, SimConfig};

fn main() -> curbflow::Result<()> {
    let graph = StreetGraph::new(
        vec!["a".into(), "b".into()],
        vec![Edge::new("a", "b"), Edge::new("b", "a")],
    );
    let p = QueueParams::new(4, 1.0)?;
    let net = Network::new(
        &graph,
        &[BlockFace::new("a", p).with_lambda(3.0), BlockFace::new("b", p).with_lambda(2.0)],
    )?;
    let flows = net.forward_solve(&FixedPointOptions::default())?;

    for service in [
        ServiceDist::Exponential,
        ServiceDist::Deterministic,
        ServiceDist::LogNormal { cv: 2.0 },
    ] {
        let cfg = SimConfig {
            horizon: 5_000.0,
            warmup: 50.0,
            seed: 42,
            service,
            replications: 4,
            ..Default::default()
        };
        let sim = replicate(&net, &cfg)?;
        println!("{service:?}");
        for gap in compare_occupancy(&sim, &flows)? {
            println!(
                "  {}: simulated {:.4} +/- {:.4}, analytic {:.4}",
                gap.block, gap.simulated.mean, gap.simulated.half_width, gap.analytic
            );
        }
        let a = sim.accounting;
        println!("  {} drivers, {} parked, {} still circulating", a.arrivals, a.parked, a.circulating);
    }
    Ok(())
}

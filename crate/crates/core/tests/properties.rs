use proptest::prelude::*;

use curbflow::inversion::{
    eval_poly, implicit_derivatives, invert_occupancy, occupancy_poly_coeffs, sign_changes, solve_uniform,
    uniform_poly_coeffs, OccupancyTarget,
};
use curbflow::loss_queue::{self, erlang_blocking, occupancy, stationary_distribution, QueueParams};
use curbflow::network::{self, BlockFace, Edge, FixedPointOptions, StreetGraph};
use curbflow::pricing::{self, ElasticityModel};
use curbflow::simulate::{self, SimConfig};
use curbflow::Scenario;

fn q(k: u32, mu: f64) -> QueueParams {
    QueueParams::new(k, mu).unwrap()
}

fn t(u: f64) -> OccupancyTarget {
    OccupancyTarget::new(u).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distribution_normalized(k in 1u32..=170, load in 0.0f64..10.0, mu in 0.1f64..5.0) {
        let y = load * f64::from(k) * mu;
        let p = stationary_distribution(q(k, mu), y).unwrap();
        let s: f64 = p.pi.iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        prop_assert!((p.blocking - erlang_blocking(q(k, mu), y).unwrap()).abs() <= 1e-12);
        prop_assert!((p.occupancy - occupancy(q(k, mu), y).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn occupancy_and_blocking_increase(k in 1u32..=60, mu in 0.2f64..3.0, y in 0.01f64..100.0, step in 1e-3f64..5.0) {
        let p = q(k, mu);
        prop_assert!(occupancy(p, y + step).unwrap() > occupancy(p, y).unwrap());
        prop_assert!(erlang_blocking(p, y + step).unwrap() > erlang_blocking(p, y).unwrap());
    }

    #[test]
    fn slope_matches_finite_difference(k in 1u32..=30, mu in 0.3f64..3.0, load in 0.05f64..3.0) {
        let p = q(k, mu);
        let y = load * f64::from(k) * mu;
        let h = 1e-5 * y.max(1.0);
        let fd = (occupancy(p, y + h).unwrap() - occupancy(p, y - h).unwrap()) / (2.0 * h);
        let s = loss_queue::occupancy_slope(p, y).unwrap();
        prop_assert!((s - fd).abs() <= 1e-6 * fd.abs().max(1e-3), "{} vs {}", s, fd);
    }

    #[test]
    fn inversion_round_trip(k in 1u32..=120, mu in 0.2f64..4.0, u in 0.0f64..0.99) {
        let p = q(k, mu);
        let y = invert_occupancy(p, t(u)).unwrap();
        prop_assert!((occupancy(p, y).unwrap() - u).abs() <= 1e-9);
    }

    #[test]
    fn inversion_is_increasing(k in 1u32..=60, u in 0.01f64..0.95, du in 1e-4f64..0.04) {
        let p = q(k, 1.0);
        prop_assert!(invert_occupancy(p, t(u + du)).unwrap() > invert_occupancy(p, t(u)).unwrap());
    }

    #[test]
    fn one_sign_change_and_root(k in 1u32..=40, mu in 0.3f64..3.0, u in 0.01f64..0.98) {
        let p = q(k, mu);
        let c = occupancy_poly_coeffs(p, t(u));
        prop_assert_eq!(sign_changes(&c).unwrap(), 1);
        let y = invert_occupancy(p, t(u)).unwrap();
        let (value, scale) = eval_poly(&c, y);
        prop_assert!(value.abs() <= 1e-9 * scale, "{} at scale {}", value, scale);
    }

    #[test]
    fn uniform_coefficients_one_sign_change(k in 1u32..=40, mu in 0.3f64..3.0, frac in 0.001f64..0.999) {
        let p = q(k, mu);
        let lambda = frac * p.capacity();
        prop_assert_eq!(sign_changes(&uniform_poly_coeffs(p, lambda)).unwrap(), 1);
    }

    #[test]
    fn uniform_exceeds_demand(k in 1u32..=40, mu in 0.3f64..3.0, frac in 0.01f64..0.99, d in 1u32..8) {
        let p = q(k, mu);
        let lambda = frac * p.capacity();
        let s = solve_uniform(p, lambda, d).unwrap();
        prop_assert!(s.y >= lambda && s.per_neighbor_rejection > 0.0);
        let parked = s.y * (1.0 - erlang_blocking(p, s.y).unwrap());
        prop_assert!((parked - lambda).abs() <= 1e-10 * lambda.max(1.0));
    }

    #[test]
    fn implicit_derivatives_positive_and_consistent(k in 1u32..=40, u in 0.05f64..0.98) {
        let p = q(k, 1.0);
        let d = implicit_derivatives(p, t(u)).unwrap();
        prop_assert!(d.dy_dx > 0.0);
        prop_assert!(d.h >= -1e-8);
        let h = 1e-5;
        let fd = (invert_occupancy(p, t(u + h)).unwrap() - invert_occupancy(p, t(u - h)).unwrap()) / (2.0 * h);
        let dy_du = f64::from(k) * d.dy_dx;
        prop_assert!(((dy_du - fd) / fd).abs() <= 1e-6, "{} vs {}", dy_du, fd);
    }

    #[test]
    fn rejection_identity(k in 1u32..=50, mu in 0.2f64..3.0, u in 0.0f64..0.98) {
        let p = q(k, mu);
        let y = invert_occupancy(p, t(u)).unwrap();
        let g = loss_queue::rejection_rate(p, y).unwrap();
        prop_assert!((g - (y - u * p.capacity())).abs() <= 1e-9 * y.max(1.0));
    }

    #[test]
    fn price_chain_is_monotone(k in 1u32..=30, alpha in 0.05f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let m = ElasticityModel::with_full_range(alpha).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let (p1, p2) = (lo * m.p_max(), hi * m.p_max());
        let u1 = pricing::occupancy_of_price(&m, p1).unwrap();
        let u2 = pricing::occupancy_of_price(&m, p2).unwrap();
        prop_assert!(u2 <= u1);
        let g1 = pricing::rejection_of_price(q(k, 1.0), &m, p1).unwrap();
        let g2 = pricing::rejection_of_price(q(k, 1.0), &m, p2).unwrap();
        prop_assert!(g2 <= g1);
        if u2 < u1 && u1 > 0.0 {
            prop_assert!(g2 < g1);
        }
    }
}

/// Directed cycle, optionally with chords, and loads that keep it stable.
fn network_strategy() -> impl Strategy<Value = (StreetGraph, Vec<BlockFace>)> {
    (2usize..=8)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((1u32..=8, 0.3f64..2.0, 0.05f64..0.5), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_map(|(n, specs, chords)| {
            let ids: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
            let mut edges = Vec::new();
            for i in 0..n {
                edges.push(Edge::new(ids[i].clone(), ids[(i + 1) % n].clone()));
                let j = (i + n / 2) % n;
                if chords[i] && j != i && j != (i + 1) % n {
                    edges.push(Edge::new(ids[i].clone(), ids[j].clone()));
                }
            }
            let blocks = ids
                .iter()
                .zip(specs)
                .map(|(id, (k, mu, load))| BlockFace::new(id.clone(), q(k, mu)).with_lambda(load * f64::from(k) * mu))
                .collect();
            (StreetGraph::new(ids, edges), blocks)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn damping_does_not_change_the_solution((g, blocks) in network_strategy()) {
        let solve = |damping| {
            network::forward_solve(&g, &blocks, &FixedPointOptions { damping, ..Default::default() }).unwrap()
        };
        let base = solve(0.5);
        for theta in [0.3, 0.8] {
            let other = solve(theta);
            for (a, b) in base.y.iter().zip(&other.y) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn more_demand_never_lowers_arrivals((g, blocks) in network_strategy(), pick in any::<prop::sample::Index>(), bump in 0.01f64..0.5) {
        let opts = FixedPointOptions::default();
        let before = network::forward_solve(&g, &blocks, &opts).unwrap();
        let mut more = blocks.clone();
        let i = pick.index(more.len());
        let cap = more[i].params.capacity();
        more[i].lambda = Some(more[i].lambda.unwrap() + bump * cap * 0.2);
        let after = network::forward_solve(&g, &more, &opts).unwrap();
        for (a, b) in before.y.iter().zip(&after.y) {
            prop_assert!(*b >= *a - 1e-9);
        }
    }

    #[test]
    fn forward_then_inverse((g, blocks) in network_strategy()) {
        let fwd = network::forward_solve(&g, &blocks, &FixedPointOptions::default()).unwrap();
        let observed: Vec<BlockFace> = blocks
            .iter()
            .map(|b| BlockFace::new(b.id.clone(), b.params).with_observed_u(fwd.occupancy[fwd.index_of(&b.id).unwrap()]))
            .collect();
        let est = network::estimate_from_occupancy(&g, &observed).unwrap();
        let lambda = est.lambda_inferred.unwrap();
        for b in &blocks {
            let i = fwd.index_of(&b.id).unwrap();
            prop_assert!((est.y[i] - fwd.y[i]).abs() <= 1e-6);
            prop_assert!((lambda[i] - b.lambda.unwrap()).abs() <= 1e-6);
        }
        let parked: f64 = fwd.y.iter().zip(&fwd.rejection_out).map(|(y, r)| y - r).sum();
        let demand: f64 = blocks.iter().map(|b| b.lambda.unwrap()).sum();
        prop_assert!((parked - demand).abs() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simulation_accounting_balances((g, blocks) in network_strategy(), seed in any::<u64>(), hops in prop::option::of(0u32..4)) {
        let net = network::Network::new(&g, &blocks).unwrap();
        let cfg = SimConfig { horizon: 200.0, warmup: 5.0, seed, max_hops: hops, ..Default::default() };
        let r = simulate::run(&net, &cfg).unwrap();
        prop_assert!(r.accounting.balanced());
        prop_assert!(r.occupancy.iter().all(|e| (0.0..=1.0).contains(&e.mean)));
        if let Some(h) = hops {
            prop_assert!(r.hop_histogram.len() <= h as usize + 1);
        }
    }

    #[test]
    fn scenario_echo_round_trips((g, blocks) in network_strategy(), alpha in 0.01f64..0.3) {
        let s = Scenario {
            blocks: blocks
                .into_iter()
                .map(|mut b| {
                    b.alpha = Some(alpha);
                    b
                })
                .collect(),
            edges: g.edges,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(&path, serde_json::to_string_pretty(&s).unwrap()).unwrap();
        let loaded = curbflow::load_scenario(&path).unwrap();
        prop_assert_eq!(loaded.content_hash().unwrap(), s.content_hash().unwrap());
        let report = curbflow::build_report(loaded, &curbflow::report::ReportOptions::full()).unwrap();
        std::fs::write(&path, serde_json::to_string(&report.scenario).unwrap()).unwrap();
        let again = curbflow::load_scenario(&path).unwrap();
        prop_assert_eq!(again.content_hash().unwrap(), report.input_hash);
    }
}

/// The bound `2/y' + 1 >= x` (with `y' = dy/dx`, `x = k u`) holds for a
/// single stall, and the looser `2/y' + 2 >= x` for up to two.
#[test]
fn intermediate_bound_small_k() {
    for i in 1..99 {
        let u = i as f64 / 100.0;
        let d = implicit_derivatives(q(1, 1.0), t(u)).unwrap();
        assert!(2.0 / d.dy_dx + 1.0 >= d.x, "k=1 u={u}");
        let d = implicit_derivatives(q(2, 1.0), t(u)).unwrap();
        assert!(2.0 / d.dy_dx + 2.0 >= d.x, "k=2 u={u}");
    }
    let d = implicit_derivatives(q(2, 1.0), t(0.69)).unwrap();
    assert!(2.0 / d.dy_dx + 1.0 < d.x);
}

/// For larger blocks the same bound fails, even though the curvature it was
/// meant to establish is still non-negative.
#[test]
fn intermediate_bound_fails_for_larger_blocks() {
    let d = implicit_derivatives(q(10, 1.0), t(0.5)).unwrap();
    assert!(2.0 / d.dy_dx + 2.0 < d.x);
    assert!(d.h >= 0.0 && d.d2y_dx2 > 0.0);
}

#[test]
fn sharp_elbow() {
    let p = q(10, 1.0);
    let f = |u| invert_occupancy(p, t(u)).unwrap();
    assert!(f(0.98) - f(0.90) > f(0.90) - f(0.82));
}

//! Curbside parking as a network of Erlang loss queues.
//!
//! Each block-face is a loss system with `k` stalls. Drivers rejected at one
//! block-face circulate to its neighbours, so the arrival rate at every block
//! is the sum of its own demand and the overflow routed to it. The crate
//! computes that fixed point, inverts it from observed occupancies, prices
//! block-faces against congestion caps, and simulates the whole thing.
//!
//! ```
//! use curbflow::inversion::{invert_occupancy, OccupancyTarget};
//! use curbflow::loss_queue::QueueParams;
//!
//! let p = QueueParams::new(2, 1.0).unwrap();
//! let y = invert_occupancy(p, OccupancyTarget::new(0.4).unwrap()).unwrap();
//! assert!((y - 1.0).abs() < 1e-10);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod inversion;
pub mod loss_queue;
pub mod network;
pub mod plot;
pub mod pricing;
pub mod report;
pub mod scenario;
pub mod simulate;

pub use error::{Error, Result};
pub use inversion::{invert_occupancy, solve_uniform, OccupancyTarget, U_CAP};
pub use loss_queue::{erlang_blocking, occupancy, QueueParams};
pub use network::{BlockFace, Edge, Network, NetworkFlows, StreetGraph};
pub use pricing::{optimize_prices, ElasticityModel, PricingProblem, PricingSolution};
pub use simulate::{SimConfig, SimResult};
pub use report::{build_report, Report};
pub use scenario::{load_scenario, Scenario};

//! Congestion-capped occupancy maximisation through posted prices.
//!
//! Each block-face has linear demand `U(p) = 1 - alpha p`. Through the
//! occupancy inversion, a price fixes the total arrival rate and so the
//! rejection rate `g(p) = f(U(p)) B(f(U(p)))`, which is non-increasing and
//! convex in `p`. The program
//!
//! ```text
//! maximize   sum_i w_i U_i(p_i)
//! subject to g_i(p_i) <= cap_i,  p_min_i <= p_i <= p_max_i
//! ```
//!
//! is therefore convex, and it decouples by block: each constraint turns into
//! a lower bound on that block's price. [`optimize_prices`] runs projected
//! gradient over that feasible box and checks it against the per-block floors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{self, OccupancyTarget, U_CAP};
use crate::loss_queue::{self, QueueParams};
use crate::network::BlockFace;

/// Linear price response of one block-face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticityModel {
    alpha: f64,
    p_min: f64,
    p_max: f64,
}

impl ElasticityModel {
    /// `alpha` is in occupancy per dollar. Requires `0 <= p_min <= p_max <= 1/alpha`.
    pub fn new(alpha: f64, p_min: f64, p_max: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!(
                "elasticity slope alpha must be positive, got {alpha}"
            )));
        }
        let ceiling = 1.0 / alpha;
        if !(p_min.is_finite() && p_min >= 0.0) {
            return Err(Error::invalid(format!("p_min must be non-negative, got {p_min}")));
        }
        if !(p_max.is_finite() && p_max >= p_min) {
            return Err(Error::invalid(format!(
                "p_max {p_max} must be finite and at least p_min {p_min}"
            )));
        }
        if p_max > ceiling * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "p_max {p_max} exceeds 1/alpha = {ceiling}, where demand reaches zero"
            )));
        }
        Ok(Self {
            alpha,
            p_min,
            p_max: p_max.min(ceiling),
        })
    }

    /// Prices from zero up to where demand vanishes.
    pub fn with_full_range(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0, 1.0 / alpha)
    }

    /// Slope implied by a point elasticity `e` (a ratio of percentage
    /// changes) at the reference `(price, occupancy)`: `alpha = -e u0 / p0`.
    pub fn slope_from_elasticity(elasticity: f64, price: f64, occupancy: f64) -> Result<f64> {
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::invalid(format!(
                "reference price must be positive, got {price}"
            )));
        }
        if !(occupancy.is_finite() && occupancy > 0.0 && occupancy < 1.0) {
            return Err(Error::invalid(format!(
                "reference occupancy must lie in (0, 1), got {occupancy}"
            )));
        }
        Ok(-elasticity * occupancy / price)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// Price at which raw linear demand equals `u`.
    pub fn price_for_occupancy(&self, u: f64) -> f64 {
        (1.0 - u) / self.alpha
    }

    fn check(&self, p: f64) -> Result<()> {
        if p.is_finite() && p >= self.p_min && p <= self.p_max {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "price {p} outside [{}, {}]",
                self.p_min, self.p_max
            )))
        }
    }
}

/// `U(p) = 1 - alpha p`, clamped into `[0, U_CAP]`.
pub fn occupancy_of_price(model: &ElasticityModel, p: f64) -> Result<f64> {
    model.check(p)?;
    Ok((1.0 - model.alpha * p).clamp(0.0, U_CAP))
}

/// Rejection rate `g(p)` of a block-face priced at `p`.
pub fn rejection_of_price(params: QueueParams, model: &ElasticityModel, p: f64) -> Result<f64> {
    let u = occupancy_of_price(model, p)?;
    rejection_at_occupancy(params, u)
}

pub(crate) fn rejection_at_occupancy(params: QueueParams, u: f64) -> Result<f64> {
    let y = inversion::invert_occupancy(params, OccupancyTarget::new(u)?)?;
    loss_queue::rejection_rate(params, y)
}

/// Smallest price in range whose rejection rate respects `cap`.
pub fn congestion_price_floor(block: &BlockFace, model: &ElasticityModel, cap: f64) -> Result<f64> {
    price_floor(&block.id, block.params, model, cap)
}

fn price_floor(id: &str, params: QueueParams, model: &ElasticityModel, cap: f64) -> Result<f64> {
    if cap.is_nan() || cap < 0.0 {
        return Err(Error::invalid(format!(
            "block {id}: congestion cap must be non-negative, got {cap}"
        )));
    }
    let g = |p: f64| rejection_of_price(params, model, p);
    let mut lo = model.p_min;
    let mut hi = model.p_max;
    if cap.is_infinite() || g(lo)? <= cap {
        return Ok(lo);
    }
    let g_hi = g(hi)?;
    if g_hi > cap {
        return Err(Error::Infeasible {
            block: id.to_string(),
            cap,
            min_rejection: g_hi,
        });
    }
    // invariant: g(lo) > cap >= g(hi)
    let width_tol = 1e-13 * hi.max(1.0);
    for _ in 0..200 {
        if hi - lo <= width_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid)? <= cap {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// How block occupancies are aggregated in the objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `sum k_i U_i`: expected occupied stalls.
    #[default]
    StallWeighted,
    /// `sum U_i`
    Unweighted,
}

impl Objective {
    fn weight(self, params: QueueParams) -> f64 {
        match self {
            Objective::StallWeighted => f64::from(params.k()),
            Objective::Unweighted => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricedBlock {
    pub id: String,
    pub params: QueueParams,
    pub model: ElasticityModel,
    /// Maximum tolerable rejection rate; `f64::INFINITY` when uncapped.
    pub cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientOptions {
    /// Step as a fraction of the widest price range, scaled by the largest gradient entry.
    pub step_fraction: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            step_fraction: 0.1,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PricingProblem {
    pub blocks: Vec<PricedBlock>,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub options: GradientOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSolution {
    pub ids: Vec<String>,
    pub prices: Vec<f64>,
    /// Per-block lower price bounds that make each cap hold.
    pub floors: Vec<f64>,
    pub occupancies: Vec<f64>,
    pub rejections: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    /// `max_i |p_i - floor_i|` between the gradient path and the closed form.
    pub closed_form_gap: f64,
    pub iterations: usize,
}

/// Feasibility and constraint tolerance on returned solutions.
const CAP_TOL: f64 = 1e-8;

pub fn optimize_prices(problem: &PricingProblem) -> Result<PricingSolution> {
    let blocks = &problem.blocks;
    let floors = blocks
        .par_iter()
        .map(|b| price_floor(&b.id, b.params, &b.model, b.cap))
        .collect::<Result<Vec<_>>>()?;

    // gradient of -sum w_i (1 - alpha_i p_i)
    let grad: Vec<f64> = blocks
        .iter()
        .map(|b| problem.objective.weight(b.params) * b.model.alpha())
        .collect();
    let project = |i: usize, p: f64| p.clamp(floors[i], blocks[i].model.p_max());

    let opts = &problem.options;
    let widest = blocks
        .iter()
        .map(|b| b.model.p_max() - b.model.p_min())
        .fold(0.0, f64::max);
    let steepest = grad.iter().copied().fold(0.0, f64::max);
    let step = if steepest > 0.0 {
        opts.step_fraction * widest / steepest
    } else {
        0.0
    };

    let mut prices: Vec<f64> = blocks.iter().map(|b| b.model.p_max()).collect();
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let mut update = 0.0_f64;
        for i in 0..prices.len() {
            let next = project(i, prices[i] - step * grad[i]);
            update = update.max((next - prices[i]).abs());
            prices[i] = next;
        }
        iterations += 1;
        if update < opts.tol {
            break;
        }
    }

    let kkt_residual = (0..prices.len())
        .map(|i| (prices[i] - project(i, prices[i] - grad[i])).abs())
        .fold(0.0, f64::max);
    let closed_form_gap = prices
        .iter()
        .zip(&floors)
        .map(|(p, f)| (p - f).abs())
        .fold(0.0, f64::max);

    let mut occupancies = Vec::with_capacity(blocks.len());
    let mut rejections = Vec::with_capacity(blocks.len());
    let mut objective = 0.0;
    for (b, p) in blocks.iter().zip(&prices) {
        let u = occupancy_of_price(&b.model, *p)?;
        let g = rejection_at_occupancy(b.params, u)?;
        if g > b.cap + CAP_TOL {
            return Err(Error::Numeric(format!(
                "block {}: rejection {g} exceeds cap {} at the returned price",
                b.id, b.cap
            )));
        }
        objective += problem.objective.weight(b.params) * u;
        occupancies.push(u);
        rejections.push(g);
    }

    Ok(PricingSolution {
        ids: blocks.iter().map(|b| b.id.clone()).collect(),
        prices,
        floors,
        occupancies,
        rejections,
        objective,
        kkt_residual,
        closed_form_gap,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondDifference {
    /// Middle price of the three-point stencil.
    pub p: f64,
    pub value: f64,
    pub tolerance: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTerm {
    pub p: f64,
    pub u: f64,
    pub h: f64,
    pub ok: bool,
}

/// Numeric convexity evidence for `g` over a price grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub second_differences: Vec<SecondDifference>,
    pub curvature_terms: Vec<CurvatureTerm>,
}

impl ConvexityReport {
    pub fn is_empty(&self) -> bool {
        self.second_differences.is_empty() && self.curvature_terms.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.second_differences.iter().all(|s| s.ok) && self.curvature_terms.iter().all(|c| c.ok)
    }
}

/// Relative tolerance on second differences of `g`.
pub const SECOND_DIFF_TOL: f64 = 1e-6;
/// Absolute tolerance on the (scaled) implicit curvature term `h`.
pub const CURVATURE_TOL: f64 = 1e-8;

/// Check second differences of `g` on a strictly increasing price grid and
/// the sign of the implicit curvature term at each grid point.
///
/// Grids with fewer than three points give an empty report.
pub fn verify_convexity(
    params: QueueParams,
    model: &ElasticityModel,
    grid: &[f64],
) -> Result<ConvexityReport> {
    let mut report = ConvexityReport::default();
    if grid.len() < 3 {
        return Ok(report);
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("convexity grid must be strictly increasing"));
    }
    let u: Vec<f64> = grid
        .iter()
        .map(|p| occupancy_of_price(model, *p))
        .collect::<Result<_>>()?;
    let g: Vec<f64> = u
        .iter()
        .map(|u| rejection_at_occupancy(params, *u))
        .collect::<Result<_>>()?;

    for i in 1..grid.len() - 1 {
        let (x0, x1, x2) = (grid[i - 1], grid[i], grid[i + 1]);
        // (x2-x1) g0 - (x2-x0) g1 + (x1-x0) g2, normalised to g0 - 2 g1 + g2 on even spacing
        let value = ((x2 - x1) * g[i - 1] - (x2 - x0) * g[i] + (x1 - x0) * g[i + 1])
            / (0.5 * (x2 - x0));
        let scale = g[i - 1].abs().max(g[i].abs()).max(g[i + 1].abs());
        let tolerance = SECOND_DIFF_TOL * scale;
        report.second_differences.push(SecondDifference {
            p: x1,
            value,
            tolerance,
            ok: value >= -tolerance,
        });
    }
    for (p, u) in grid.iter().zip(&u) {
        if *u <= 0.0 {
            continue;
        }
        let d = inversion::implicit_derivatives(params, OccupancyTarget::new(*u)?)?;
        report.curvature_terms.push(CurvatureTerm {
            p: *p,
            u: *u,
            h: d.h,
            ok: d.h >= -CURVATURE_TOL,
        });
    }
    Ok(report)
}

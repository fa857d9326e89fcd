//! Occupancy inversion: from an observed occupancy back to the total arrival
//! rate that sustains it, plus the implicit derivatives of that map.
//!
//! At fixed `(k, mu)` the occupancy `u(y)` is strictly increasing in `y`, so
//! the polynomial equation
//!
//! ```text
//! F(y, u) = sum_{i=0..k} (i - u k) / (i! mu^(i-1)) * y^i = 0
//! ```
//!
//! has exactly one positive root. Its coefficients change sign once, which
//! is what [`sign_changes`] lets callers check. The root itself is located on
//! the monotone scalar form `u(y) = u` rather than from the raw coefficients,
//! whose magnitudes span `k!`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_queue::{self, QueueParams};

/// Largest occupancy accepted for inversion. The map diverges as `u -> 1`.
pub const U_CAP: f64 = 0.999;

/// Maximum number of bracket doublings before giving up.
const MAX_DOUBLINGS: usize = 200;

/// An occupancy in `[0, U_CAP]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OccupancyTarget(f64);

impl OccupancyTarget {
    pub fn new(u: f64) -> Result<Self> {
        if u.is_finite() && (0.0..=U_CAP).contains(&u) {
            Ok(Self(u))
        } else {
            Err(Error::invalid(format!(
                "occupancy {u} outside [0, {U_CAP}]; inversion diverges as occupancy approaches 1"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for OccupancyTarget {
    type Error = Error;

    fn try_from(u: f64) -> Result<Self> {
        Self::new(u)
    }
}

impl From<OccupancyTarget> for f64 {
    fn from(u: OccupancyTarget) -> f64 {
        u.0
    }
}

/// Solve `occupancy(params, y) = u` for `u in [0, 1)`.
///
/// Brackets by doubling from `k mu`, then runs Newton steps that fall back
/// to bisection whenever a step leaves the bracket. Iterates to the limit of
/// `f64` resolution.
pub(crate) fn solve_occupancy(params: QueueParams, u: f64) -> Result<f64> {
    if u == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = params.capacity();
    let mut doublings = 0;
    while loss_queue::occupancy(params, hi)? < u {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Numeric(format!(
                "could not bracket arrival rate for occupancy {u} (k = {}, mu = {}) within {MAX_DOUBLINGS} doublings; occupancy is too close to 1",
                params.k(),
                params.mu()
            )));
        }
    }

    let mut y = 0.5 * (lo + hi);
    for _ in 0..400 {
        let g = loss_queue::occupancy(params, y)? - u;
        if g == 0.0 {
            return Ok(y);
        }
        if g < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let slope = loss_queue::occupancy_slope(params, y)?;
        let mut next = y - g / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 4.0 * f64::EPSILON * y || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        y = next;
    }
    Ok(y)
}

/// Total arrival rate `y = f(u)` that sustains occupancy `u`.
pub fn invert_occupancy(params: QueueParams, u: OccupancyTarget) -> Result<f64> {
    solve_occupancy(params, u.value())
}

/// Implicit derivatives of the root `y(x)` of `F`, with `x = k u`.
///
/// The partial derivatives of `F` are evaluated after dividing through by
/// `sum rho^i / i!`, which turns every sum into a moment of the stationary
/// distribution and keeps large `k` in range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplicitDerivatives {
    pub y: f64,
    pub x: f64,
    /// `dy/dx`
    pub dy_dx: f64,
    /// `d^2y/dx^2`
    pub d2y_dx2: f64,
    /// `D_y^2 F y' + 2 D_yx F`, scaled by the positive factor `rho / sum(rho^i/i!)`
    /// and signed so that `D_x F > 0`. Convexity of `f` corresponds to `h >= 0`.
    pub h: f64,
}

pub fn implicit_derivatives(params: QueueParams, u: OccupancyTarget) -> Result<ImplicitDerivatives> {
    if u.value() <= 0.0 {
        return Err(Error::invalid(
            "implicit derivatives need a strictly positive occupancy",
        ));
    }
    let y = invert_occupancy(params, u)?;
    let profile = loss_queue::stationary_distribution(params, y)?;
    let x = f64::from(params.k()) * u.value();

    let (mut mean, mut centered, mut residual, mut cubic) = (0.0, 0.0, 0.0, 0.0);
    for (i, p) in profile.pi.iter().enumerate() {
        let i = i as f64;
        let d = i - x;
        mean += i * p;
        centered += d * d * p;
        residual += d * p;
        cubic += i * (i - 1.0) * d * p;
    }
    // sum i (i - x) pi_i, split so the large terms do not cancel
    let a = centered + x * residual;
    let dy_dx = y / a;
    let d2y_dx2 = y * (2.0 * mean * a - cubic) / (a * a * a);
    let h = 2.0 * mean - cubic / a;
    Ok(ImplicitDerivatives {
        y,
        x,
        dy_dx,
        d2y_dx2,
        h,
    })
}

/// `dy/du` at the inverted solution.
pub fn arrival_sensitivity(params: QueueParams, u: OccupancyTarget) -> Result<f64> {
    let d = implicit_derivatives(params, u)?;
    Ok(f64::from(params.k()) * d.dy_dx)
}

/// `d^2y/du^2` at the inverted solution.
pub fn arrival_curvature(params: QueueParams, u: OccupancyTarget) -> Result<f64> {
    let d = implicit_derivatives(params, u)?;
    let k = f64::from(params.k());
    Ok(k * k * d.d2y_dx2)
}

/// Coefficients of `F(., u)` in ascending powers of `y`:
/// `(i - u k) / (i! mu^(i-1))` for `i = 0..=k`.
pub fn occupancy_poly_coeffs(params: QueueParams, u: OccupancyTarget) -> Vec<f64> {
    let uk = u.value() * f64::from(params.k());
    ascending_coeffs(params, uk)
}

/// Coefficients of the uniform-network polynomial in ascending powers of `y`,
/// `(i - lambda/mu) / (i! mu^(i-1))`, whose constant term is `-lambda`.
pub fn uniform_poly_coeffs(params: QueueParams, lambda: f64) -> Vec<f64> {
    ascending_coeffs(params, lambda / params.mu())
}

fn ascending_coeffs(params: QueueParams, shift: f64) -> Vec<f64> {
    let mu = params.mu();
    let mut scale = mu;
    (0..=params.k())
        .map(|i| {
            if i > 0 {
                scale /= f64::from(i) * mu;
            }
            (f64::from(i) - shift) * scale
        })
        .collect()
}

/// Horner evaluation, returning the value together with the largest term
/// magnitude `|c_i y^i|` as a scale for residual checks.
pub fn eval_poly(coeffs: &[f64], y: f64) -> (f64, f64) {
    let value = coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c);
    let mut power = 1.0;
    let mut scale = 0.0_f64;
    for c in coeffs {
        scale = scale.max((c * power).abs());
        power *= y;
    }
    (value, scale)
}

/// Strict sign alternations in `seq`, ignoring zero entries.
pub fn sign_changes(seq: &[f64]) -> Result<usize> {
    let mut signs = seq.iter().filter(|c| **c != 0.0).map(|c| c.is_sign_positive());
    let Some(mut last) = signs.next() else {
        return Err(Error::invalid("sign count of an all-zero sequence"));
    };
    let mut changes = 0;
    for s in signs {
        if s != last {
            changes += 1;
            last = s;
        }
    }
    Ok(changes)
}

/// The single-queue view of a `d`-regular network of identical block-faces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformSolution {
    pub y: f64,
    /// Rejection rate sent along each out-edge, `y B(y) / d`.
    pub per_neighbor_rejection: f64,
    pub degree: u32,
}

/// Solve `y - lambda = y B(y)` for the uniform network.
///
/// Requires `0 < lambda < k mu`; the solution always exceeds `lambda`.
pub fn solve_uniform(params: QueueParams, lambda: f64, degree: u32) -> Result<UniformSolution> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!(
            "exogenous rate must be positive, got {lambda}"
        )));
    }
    if degree == 0 {
        return Err(Error::invalid("uniform network degree must be at least 1"));
    }
    let capacity = params.capacity();
    if lambda >= capacity {
        return Err(Error::Unstable(format!(
            "exogenous rate {lambda} is not below the stall capacity k*mu = {capacity}"
        )));
    }
    // y (1 - B) = lambda  <=>  occupancy(y) = lambda / (k mu)
    let root = solve_occupancy(params, lambda / capacity)?;
    // one step of y <- lambda + y B(y) keeps the root and guarantees y >= lambda
    let y = lambda + loss_queue::rejection_rate(params, root)?;
    let rejected = loss_queue::rejection_rate(params, y)?;
    Ok(UniformSolution {
        y,
        per_neighbor_rejection: rejected / f64::from(degree),
        degree,
    })
}

//! Single block-face as an Erlang loss system (M/G/k/k).
//!
//! A block-face with `k` stalls, each turning over at rate `mu` (mean parking
//! duration `1/mu` hours), fed by a total arrival rate `y`. Arrivals that find
//! every stall taken are rejected and leave; in the network model they go on
//! to circulate. Everything here is a pure function of `(k, mu, y)`.
//!
//! The loss formula is insensitive to the parking-duration distribution past
//! its mean, so nothing below depends on anything but `mu`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stall count and per-stall service rate of one block-face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQueueParams")]
pub struct QueueParams {
    k: u32,
    mu: f64,
}

#[derive(Deserialize)]
struct RawQueueParams {
    k: u32,
    mu: f64,
}

impl TryFrom<RawQueueParams> for QueueParams {
    type Error = Error;

    fn try_from(raw: RawQueueParams) -> Result<Self> {
        QueueParams::new(raw.k, raw.mu)
    }
}

impl QueueParams {
    pub fn new(k: u32, mu: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("stall count k must be at least 1"));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(format!(
                "service rate mu must be positive and finite, got {mu}"
            )));
        }
        Ok(Self { k, mu })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Total service capacity `k * mu` in vehicles per hour.
    pub fn capacity(&self) -> f64 {
        f64::from(self.k) * self.mu
    }

    /// Offered load `y / mu`.
    pub fn load(&self, y: f64) -> f64 {
        y / self.mu
    }
}

/// Stationary state of one block-face at a fixed total arrival rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossProfile {
    pub y: f64,
    /// `pi[i]` is the long-run probability that exactly `i` stalls are taken.
    pub pi: Vec<f64>,
    pub blocking: f64,
    pub occupancy: f64,
}

pub(crate) fn check_rate(y: f64) -> Result<()> {
    if y.is_finite() && y >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "arrival rate must be finite and non-negative, got {y}"
        )))
    }
}

/// Stationary distribution of the birth-death chain with birth rate `y` and
/// death rate `i * mu` in state `i`.
///
/// Terms follow `t_i = t_{i-1} * rho / i` and are rescaled whenever they
/// approach the top of the `f64` range, so large `k` never overflows.
pub fn stationary_distribution(params: QueueParams, y: f64) -> Result<LossProfile> {
    check_rate(y)?;
    let k = params.k as usize;
    let rho = params.load(y);

    let mut terms = Vec::with_capacity(k + 1);
    terms.push(1.0_f64);
    for i in 1..=k {
        let next = terms[i - 1] * rho / i as f64;
        terms.push(next);
        if next > 1e280 {
            for t in terms.iter_mut() {
                *t *= 1e-280;
            }
        }
    }
    let total: f64 = terms.iter().sum();
    let pi: Vec<f64> = terms.iter().map(|t| t / total).collect();
    let blocking = pi[k];
    let occupancy = y * (1.0 - blocking) / params.capacity();
    Ok(LossProfile {
        y,
        pi,
        blocking,
        occupancy,
    })
}

/// Erlang-B state after running the recursion to `k`.
#[derive(Debug, Clone, Copy)]
struct ErlangRecursion {
    /// `B_{k-1}`
    prev: f64,
    /// `dB_{k-1}/drho`
    prev_slope: f64,
    /// `B_k`
    blocking: f64,
}

fn erlang_recursion(k: u32, rho: f64) -> ErlangRecursion {
    // B_0 = 1, B_j = rho B_{j-1} / (j + rho B_{j-1})
    let mut b = 1.0_f64;
    let mut db = 0.0_f64;
    let mut prev = b;
    let mut prev_slope = db;
    for j in 1..=k {
        prev = b;
        prev_slope = db;
        let j = f64::from(j);
        let a = rho * b;
        let denom = j + a;
        db = j / (denom * denom) * (b + rho * db);
        b = a / denom;
    }
    ErlangRecursion {
        prev,
        prev_slope,
        blocking: b,
    }
}

/// Probability that an arrival finds all `k` stalls taken.
pub fn erlang_blocking(params: QueueParams, y: f64) -> Result<f64> {
    check_rate(y)?;
    Ok(erlang_recursion(params.k, params.load(y)).blocking)
}

/// Long-run fraction of stalls in use, `y (1 - B) / (k mu)`.
///
/// Evaluated as `rho / (k + rho B_{k-1})`, which avoids forming `1 - B`
/// when blocking is close to one.
pub fn occupancy(params: QueueParams, y: f64) -> Result<f64> {
    check_rate(y)?;
    let rho = params.load(y);
    let rec = erlang_recursion(params.k, rho);
    Ok(rho / (f64::from(params.k) + rho * rec.prev))
}

/// `du/dy`, from differentiating the blocking recursion alongside it.
pub fn occupancy_slope(params: QueueParams, y: f64) -> Result<f64> {
    check_rate(y)?;
    let rho = params.load(y);
    let k = f64::from(params.k);
    let rec = erlang_recursion(params.k, rho);
    let denom = k + rho * rec.prev;
    Ok((k - rho * rho * rec.prev_slope) / (denom * denom) / params.mu)
}

/// Rejection (overflow) rate `y * B(y)` in vehicles per hour.
pub fn rejection_rate(params: QueueParams, y: f64) -> Result<f64> {
    Ok(y * erlang_blocking(params, y)?)
}

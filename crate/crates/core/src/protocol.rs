//! Per-node medium-access rules: weights, attempt decisions and the
//! neighbor-weight estimators.
//!
//! All logarithms are natural and clamped at zero: `[log x]_+` and
//! `[log log x]_+`. The estimator function is `g(x) = exp(([log log x]_+)^alpha)`
//! with `alpha = 4` by default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GParamsRepr", into = "GParamsRepr")]
pub struct GParams {
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct GParamsRepr {
    alpha: f64,
}

impl TryFrom<GParamsRepr> for GParams {
    type Error = Error;
    fn try_from(r: GParamsRepr) -> Result<Self> {
        GParams::new(r.alpha)
    }
}

impl From<GParams> for GParamsRepr {
    fn from(p: GParams) -> Self {
        GParamsRepr { alpha: p.alpha }
    }
}

impl GParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 2.0) {
            return Err(Error::InvalidParameter(format!("g exponent alpha = {alpha} must be > 2")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for GParams {
    fn default() -> Self {
        Self { alpha: 4.0 }
    }
}

#[inline]
pub fn pos_log(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

#[inline]
pub fn pos_log_log(x: f64) -> f64 {
    pos_log(pos_log(x))
}

/// `log g(x) = ([log log x]_+)^alpha`. Finite where `g` itself overflows.
#[inline]
pub fn log_g(x: f64, params: &GParams) -> f64 {
    pos_log_log(x).powf(params.alpha)
}

pub fn g_of(x: f64, params: &GParams) -> f64 {
    log_g(x, params).exp()
}

/// `exp(exp(([log x]_+)^(1/alpha)))`; equals `e` on `[0, 1]`.
pub fn g_inverse(x: f64, params: &GParams) -> f64 {
    g_inverse_of_exp(pos_log(x), params)
}

/// `g_inverse(exp(log_x))` without forming `exp(log_x)`.
pub fn g_inverse_of_exp(log_x: f64, params: &GParams) -> f64 {
    log_x.max(0.0).powf(1.0 / params.alpha).exp().exp()
}

/// Weight `W = max{ [log Q]_+, max_j exp(sqrt(log g(A_j))), 1 }`.
pub fn compute_weight(
    queue: u64,
    neighbor_a: impl IntoIterator<Item = u64>,
    params: &GParams,
) -> f64 {
    let estimate = neighbor_a
        .into_iter()
        .map(|a| log_g(a as f64, params).sqrt().exp())
        .fold(1.0, f64::max);
    pos_log(queue as f64).max(estimate)
}

/// Right-hand side of the slow-variation bound on a large weight:
/// `W / g_inverse(exp(log^2 W))`.
pub fn weight_step_bound(weight: f64, params: &GParams) -> f64 {
    let lw = pos_log(weight);
    (lw - (lw * lw).powf(1.0 / params.alpha).exp()).exp()
}

/// Counters one node keeps about one neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NeighborCounter {
    pub neighbor: usize,
    /// Long-term estimate; `g(a)` tracks the neighbor's weight.
    pub a: u64,
    /// Length of the neighbor's current run of consecutive attempts.
    pub b: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub queue: u64,
    pub attempted_prev: bool,
    pub succeeded_prev: bool,
    /// One entry per neighbor, in the graph's neighbor order.
    pub counters: Vec<NeighborCounter>,
}

impl NodeState {
    pub fn new(queue: u64, neighbors: &[usize]) -> Self {
        Self {
            queue,
            attempted_prev: false,
            succeeded_prev: false,
            counters: neighbors
                .iter()
                .map(|&neighbor| NeighborCounter { neighbor, a: 0, b: 0 })
                .collect(),
        }
    }

    pub fn weight(&self, params: &GParams) -> f64 {
        compute_weight(self.queue, self.counters.iter().map(|c| c.a), params)
    }

    pub fn a_max(&self) -> u64 {
        self.counters.iter().map(|c| c.a).max().unwrap_or(0)
    }

    pub fn b_max(&self) -> u64 {
        self.counters.iter().map(|c| c.b).max().unwrap_or(0)
    }
}

/// Which of the three attempt rules applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttemptRule {
    /// Succeeded last slot: keep the channel with probability `1 - 1/W`.
    Hold,
    /// No neighbor attempted last slot: fair coin.
    Coin,
    /// Some neighbor attempted last slot: stay silent.
    Silent,
}

pub fn attempt_rule(state: &NodeState, any_neighbor_attempted_prev: bool) -> AttemptRule {
    if state.succeeded_prev {
        AttemptRule::Hold
    } else if !any_neighbor_attempted_prev {
        AttemptRule::Coin
    } else {
        AttemptRule::Silent
    }
}

pub fn attempt_probability(state: &NodeState, any_neighbor_attempted_prev: bool, weight: f64) -> f64 {
    debug_assert!(weight >= 1.0);
    match attempt_rule(state, any_neighbor_attempted_prev) {
        AttemptRule::Hold => 1.0 - 1.0 / weight,
        AttemptRule::Coin => 0.5,
        AttemptRule::Silent => 0.0,
    }
}

/// One slot of the `(A, B)` update for a single neighbor. `A` is clamped at 0.
pub fn update_counters(a: u64, b: u64, neighbor_attempted_prev: bool, params: &GParams) -> (u64, u64) {
    if neighbor_attempted_prev {
        (a, b + 1)
    } else if b >= 2 {
        if b as f64 >= g_of(a as f64, params) {
            (a + 1, 0)
        } else {
            (a.saturating_sub(1), 0)
        }
    } else {
        (a, 0)
    }
}

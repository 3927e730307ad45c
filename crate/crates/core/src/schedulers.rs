//! Baseline policies run through the same slot loop as the distributed MAC.
//!
//! Baselines only attempt when the queue is non-empty. The polynomial back-off
//! policy attempts with probability `1 / (1 + f)^beta` after `f` consecutive
//! collisions; it stands in for the polynomial back-off family and is not a
//! faithful reproduction of any particular published variant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{argmax_mask, independent_masks, IndependentSet, InterferenceGraph};
use crate::protocol::pos_log_log;

pub const DEFAULT_ALOHA_P: f64 = 0.5;
pub const DEFAULT_BACKOFF_BETA: f64 = 2.0;

/// Config string forms: `queue_mac`, `max_weight`, `aloha(p)`, `poly_backoff(beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchedulerKind {
    QueueMac,
    MaxWeight,
    Aloha { p: f64 },
    PolyBackoff { beta: f64 },
}

impl SchedulerKind {
    pub fn is_queue_mac(&self) -> bool {
        matches!(self, SchedulerKind::QueueMac)
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerKind::QueueMac => write!(f, "queue_mac"),
            SchedulerKind::MaxWeight => write!(f, "max_weight"),
            SchedulerKind::Aloha { p } => write!(f, "aloha({p})"),
            SchedulerKind::PolyBackoff { beta } => write!(f, "poly_backoff({beta})"),
        }
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(open) if s.ends_with(')') => {
                let arg = s[open + 1..s.len() - 1].trim();
                let value: f64 = arg
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad scheduler argument in {s:?}")))?;
                (&s[..open], Some(value))
            }
            Some(_) => return Err(Error::InvalidParameter(format!("unbalanced parentheses in {s:?}"))),
            None => (s, None),
        };
        let kind = match (name, arg) {
            ("queue_mac", None) => SchedulerKind::QueueMac,
            ("max_weight", None) => SchedulerKind::MaxWeight,
            ("aloha", p) => {
                let p = p.unwrap_or(DEFAULT_ALOHA_P);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!("aloha probability {p} not in [0, 1]")));
                }
                SchedulerKind::Aloha { p }
            }
            ("poly_backoff", beta) => {
                let beta = beta.unwrap_or(DEFAULT_BACKOFF_BETA);
                if !(beta.is_finite() && beta > 0.0) {
                    return Err(Error::InvalidParameter(format!("back-off exponent {beta} must be > 0")));
                }
                SchedulerKind::PolyBackoff { beta }
            }
            _ => return Err(Error::InvalidParameter(format!("unknown scheduler {s:?}"))),
        };
        Ok(kind)
    }
}

impl TryFrom<String> for SchedulerKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SchedulerKind> for String {
    fn from(k: SchedulerKind) -> Self {
        k.to_string()
    }
}

/// Centralized max-weight oracle with weights `[log log Q]_+`.
#[derive(Debug, Clone)]
pub struct MaxWeightOracle {
    n: usize,
    masks: Vec<u64>,
}

impl MaxWeightOracle {
    pub fn new(graph: &InterferenceGraph) -> Result<Self> {
        Ok(Self {
            n: graph.node_count(),
            masks: independent_masks(graph)?,
        })
    }

    pub fn schedule_mask(&self, queues: &[u64]) -> u64 {
        let weights: Vec<f64> = queues.iter().map(|&q| pos_log_log(q as f64)).collect();
        self.masks[argmax_mask(&self.masks, &weights)]
    }

    pub fn schedule(&self, queues: &[u64]) -> IndependentSet {
        IndependentSet::from_mask(self.n, self.schedule_mask(queues))
    }
}

pub fn max_weight_schedule(graph: &InterferenceGraph, queues: &[u64]) -> Result<IndependentSet> {
    if queues.len() != graph.node_count() {
        return Err(Error::InvalidParameter(format!(
            "{} queues for {} nodes",
            queues.len(),
            graph.node_count()
        )));
    }
    Ok(MaxWeightOracle::new(graph)?.schedule(queues))
}

/// `u` is a uniform draw in `[0, 1)`.
pub fn aloha_attempt(p: f64, queue: u64, u: f64) -> bool {
    queue > 0 && u < p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackoffState {
    pub failures: Vec<u32>,
    pub beta: f64,
}

impl BackoffState {
    pub fn new(n: usize, beta: f64) -> Self {
        Self {
            failures: vec![0; n],
            beta,
        }
    }

    pub fn attempt_probability(&self, node: usize) -> f64 {
        (1.0 + self.failures[node] as f64).powf(-self.beta)
    }

    /// Collision increments the failure count, success resets it.
    pub fn record(&mut self, node: usize, attempted: bool, succeeded: bool) {
        if succeeded {
            self.failures[node] = 0;
        } else if attempted {
            self.failures[node] = self.failures[node].saturating_add(1);
        }
    }
}

pub fn poly_backoff_attempt(state: &BackoffState, node: usize, queue: u64, u: f64) -> bool {
    queue > 0 && u < state.attempt_probability(node)
}

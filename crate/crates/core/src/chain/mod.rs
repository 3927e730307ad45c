//! Exact analysis of the fixed-weight schedule chain.
//!
//! With weights `W` held fixed, the pair `(sigma, a)` of last slot's successes
//! and attempts is a finite Markov chain on independent sets times attempt
//! vectors. This module builds its transition matrix two independent ways
//! (enumerating every coin and release draw, and a closed-form product),
//! restricts it to the recurrence class of the all-idle state, and provides
//! the stationary, product-form, conductance, spectral and mixing analyses
//! built on it.
//!
//! Total variation here is the full L1 sum `sum |nu - mu|`, twice the more
//! common half-sum convention.

mod compare;
mod mixing;
mod report;
mod stationary;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ArrivalRates, InterferenceGraph};
use crate::simulator::{SimConfig, Simulator};

pub use compare::{
    build_reversible_q, detailed_balance_residual, gibbs_check, product_form_reference, ratio_bound_check,
    reversible_q_from, transition_sensitivity, GibbsReport, RatioReport, SensitivityReport,
};
pub use mixing::{
    ceiling_from_log10, max_tv_after, squarings,
    cheeger_holds, conductance, conductance_lower_bound_ln, gap_bound_holds, gap_lower_bound_ln, ln_c_n,
    matrix_power, pp_star, spectral_gap, t_mix_bound_log10, t_mix_ceiling, time_reversal, tv_after,
    tv_distance, SpectralGap, MAX_CONDUCTANCE_STATES,
};
pub use report::{analyze_chain, ChainReport, CheckStatus};
pub use stationary::{period, stationarity_residual, stationary_distribution};

/// Largest graph accepted by the exact chain constructions.
pub const MAX_CHAIN_NODES: usize = 6;

/// Entrywise agreement required between the two constructions.
pub const CONSTRUCTION_TOLERANCE: f64 = 1e-12;

/// `(sigma, a)` as bitmasks with node 0 in the lowest bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainState {
    pub sigma: u64,
    pub attempts: u64,
}

impl ChainState {
    pub const IDLE: ChainState = ChainState { sigma: 0, attempts: 0 };

    pub fn new(sigma: u64, attempts: u64) -> Self {
        Self { sigma, attempts }
    }

    pub fn label(&self, n: usize) -> String {
        let members: Vec<_> = (0..n).filter(|i| self.sigma >> i & 1 == 1).map(|i| i.to_string()).collect();
        let bits: String = (0..n).map(|i| if self.attempts >> i & 1 == 1 { '1' } else { '0' }).collect();
        format!("({{{}}},{bits})", members.join(","))
    }
}

impl fmt::Display for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(sigma={:#b}, a={:#b})", self.sigma, self.attempts)
    }
}

/// Node weights, each at least 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("weight vector is empty".into()));
        }
        if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x >= 1.0)) {
            return Err(Error::InvalidParameter(format!("weight {x} is below 1 or not finite")));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize, w: f64) -> Result<Self> {
        Self::new(vec![w; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(1.0, f64::max)
    }

    /// `sigma . log W`.
    pub fn log_weight_of(&self, sigma: u64) -> f64 {
        (0..self.0.len()).filter(|i| sigma >> i & 1 == 1).map(|i| self.0[i].ln()).sum()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// Dense row-stochastic matrix over an ordered list of chain states.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    nodes: usize,
    states: Vec<ChainState>,
    matrix: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn index_of(&self, x: ChainState) -> Option<usize> {
        self.states.binary_search(&x).ok()
    }

    /// Transition probability between two states of the list; 0 if either is absent.
    pub fn prob(&self, from: ChainState, to: ChainState) -> f64 {
        match (self.index_of(from), self.index_of(to)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => 0.0,
        }
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `P_xy > 0  <=>  P_yx > 0` for every pair.
    pub fn support_is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| (self.matrix[(i, j)] > 0.0) == (self.matrix[(j, i)] > 0.0)))
    }

    /// Every `(sigma, sigma)` with `sigma` independent is present, so each
    /// schedule occurs on the recurrence class.
    pub fn contains_all_schedules(&self, graph: &InterferenceGraph) -> bool {
        crate::graph::independent_masks(graph)
            .map(|masks| masks.into_iter().all(|s| self.index_of(ChainState::new(s, s)).is_some()))
            .unwrap_or(false)
    }

    fn restrict(&self, keep: &[usize]) -> TransitionMatrix {
        let states = keep.iter().map(|&k| self.states[k]).collect();
        let matrix = DMatrix::from_fn(keep.len(), keep.len(), |i, j| self.matrix[(keep[i], keep[j])]);
        TransitionMatrix {
            nodes: self.nodes,
            states,
            matrix,
        }
    }

    fn from_rows(nodes: usize, rows: &BTreeMap<ChainState, Vec<(ChainState, f64)>>) -> Self {
        let states: Vec<ChainState> = rows.keys().copied().collect();
        let mut matrix = DMatrix::zeros(states.len(), states.len());
        for (i, (_, row)) in rows.iter().enumerate() {
            for &(y, p) in row {
                let j = states.binary_search(&y).expect("closure contains every successor");
                matrix[(i, j)] += p;
            }
        }
        TransitionMatrix { nodes, states, matrix }
    }
}

fn check_instance(graph: &InterferenceGraph, weights: &WeightVector) -> Result<()> {
    let n = graph.node_count();
    if n > MAX_CHAIN_NODES {
        return Err(Error::TooLarge {
            what: "exact chain analysis",
            size: n,
            limit: MAX_CHAIN_NODES,
        });
    }
    if weights.len() != n {
        return Err(Error::InvalidParameter(format!("{} weights for {n} nodes", weights.len())));
    }
    Ok(())
}

/// Successor distribution of `x` obtained by summing over every coin vector
/// and every release pattern of the current holders.
fn coin_successors(adj: &[u64], w: &[f64], x: ChainState) -> Vec<(ChainState, f64)> {
    let n = adj.len();
    let coin_prob = 0.5f64.powi(n as i32);
    let holders = x.sigma;
    let mut out: BTreeMap<ChainState, f64> = BTreeMap::new();
    for coins in 0..1u64 << n {
        // step 1: provisional attempts for nodes whose neighbors were all silent
        let mut provisional = 0u64;
        for i in 0..n {
            if adj[i] & x.attempts == 0 && coins >> i & 1 == 1 {
                provisional |= 1 << i;
            }
        }
        // step 2: each holder keeps or releases; subsets of holders enumerate the release draws
        let mut release = holders;
        loop {
            let mut prob = coin_prob;
            for i in 0..n {
                if holders >> i & 1 == 1 {
                    prob *= if release >> i & 1 == 1 { 1.0 / w[i] } else { 1.0 - 1.0 / w[i] };
                }
            }
            if prob > 0.0 {
                let mut attempts = provisional;
                for i in 0..n {
                    if holders >> i & 1 == 1 {
                        if release >> i & 1 == 1 {
                            attempts &= !(1 << i);
                        } else {
                            attempts |= 1 << i;
                        }
                    } else if adj[i] & x.attempts != 0 {
                        attempts &= !(1 << i);
                    }
                }
                let mut sigma = holders & !release;
                for i in 0..n {
                    let free = holders >> i & 1 == 0 && adj[i] & x.attempts == 0;
                    if free && attempts >> i & 1 == 1 && adj[i] & attempts == 0 {
                        sigma |= 1 << i;
                    }
                }
                *out.entry(ChainState::new(sigma, attempts)).or_default() += prob;
            }
            if release == 0 {
                break;
            }
            release = (release - 1) & holders;
        }
    }
    out.into_iter().collect()
}

/// Closed-form transition probability.
///
/// Free nodes (not holding, all neighbors silent) flip a fair coin; holders
/// keep with probability `1 - 1/W` or release; everyone else goes idle. A
/// free node succeeds iff it attempts and no neighbor does.
pub fn closed_form_probability(adj: &[u64], w: &[f64], x: ChainState, y: ChainState) -> f64 {
    let n = adj.len();
    let mut free_count = 0;
    let mut prob = 1.0;
    for i in 0..n {
        let bit = 1u64 << i;
        let (s_new, a_new) = (y.sigma & bit != 0, y.attempts & bit != 0);
        if x.sigma & bit != 0 {
            match (s_new, a_new) {
                (true, true) => prob *= 1.0 - 1.0 / w[i],
                (false, false) => prob *= 1.0 / w[i],
                _ => return 0.0,
            }
        } else if adj[i] & x.attempts == 0 {
            free_count += 1;
            if s_new != (a_new && adj[i] & y.attempts == 0) {
                return 0.0;
            }
        } else if s_new || a_new {
            return 0.0;
        }
    }
    prob * 0.5f64.powi(free_count)
}

fn closed_form_successors(adj: &[u64], w: &[f64], x: ChainState) -> Vec<(ChainState, f64)> {
    let n = adj.len();
    let mut out = Vec::new();
    for attempts in 0..1u64 << n {
        let mut sigma = attempts;
        loop {
            let y = ChainState::new(sigma, attempts);
            let p = closed_form_probability(adj, w, x, y);
            if p > 0.0 {
                out.push((y, p));
            }
            if sigma == 0 {
                break;
            }
            sigma = (sigma - 1) & attempts;
        }
    }
    out
}

/// Rows for every state reachable from the all-idle state.
fn reachable_rows<F>(successors: F) -> BTreeMap<ChainState, Vec<(ChainState, f64)>>
where
    F: Fn(ChainState) -> Vec<(ChainState, f64)>,
{
    let mut rows = BTreeMap::new();
    let mut queue = VecDeque::from([ChainState::IDLE]);
    let mut seen = BTreeSet::from([ChainState::IDLE]);
    while let Some(x) = queue.pop_front() {
        let row = successors(x);
        for &(y, _) in &row {
            if seen.insert(y) {
                queue.push_back(y);
            }
        }
        rows.insert(x, row);
    }
    rows
}

/// Indices of the strongly connected component containing `start`.
pub fn recurrence_class(p: &TransitionMatrix, start: usize) -> Vec<usize> {
    let n = p.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let positive = if forward { p.matrix[(u, v)] } else { p.matrix[(v, u)] } > 0.0;
                if positive && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    };
    let (fwd, bwd) = (reach(true), reach(false));
    (0..n).filter(|&k| fwd[k] && bwd[k]).collect()
}

fn build_with<F>(graph: &InterferenceGraph, successors: F) -> TransitionMatrix
where
    F: Fn(ChainState) -> Vec<(ChainState, f64)>,
{
    let closure = TransitionMatrix::from_rows(graph.node_count(), &reachable_rows(successors));
    let start = closure.index_of(ChainState::IDLE).expect("closure contains its start");
    closure.restrict(&recurrence_class(&closure, start))
}

/// Matrix from exhaustive enumeration of coin and release draws, on the
/// recurrence class of the all-idle state.
pub fn coin_enumeration_matrix(graph: &InterferenceGraph, weights: &WeightVector) -> Result<TransitionMatrix> {
    check_instance(graph, weights)?;
    let adj = graph.adjacency_masks();
    Ok(build_with(graph, |x| coin_successors(&adj, weights.as_slice(), x)))
}

/// Matrix from [`closed_form_probability`], on its own recurrence class.
pub fn closed_form_matrix(graph: &InterferenceGraph, weights: &WeightVector) -> Result<TransitionMatrix> {
    check_instance(graph, weights)?;
    let adj = graph.adjacency_masks();
    Ok(build_with(graph, |x| closed_form_successors(&adj, weights.as_slice(), x)))
}

/// Largest entrywise difference; infinite if the state lists differ.
pub fn max_entry_difference(a: &TransitionMatrix, b: &TransitionMatrix) -> f64 {
    if a.states != b.states {
        return f64::INFINITY;
    }
    (&a.matrix - &b.matrix).abs().max()
}

/// Builds `P` both ways and returns the enumeration result once they agree.
pub fn build_transition_matrix(graph: &InterferenceGraph, weights: &WeightVector) -> Result<TransitionMatrix> {
    let enumerated = coin_enumeration_matrix(graph, weights)?;
    let closed = closed_form_matrix(graph, weights)?;
    let diff = max_entry_difference(&enumerated, &closed);
    if diff > CONSTRUCTION_TOLERANCE {
        return Err(Error::ConstructionMismatch(diff));
    }
    Ok(enumerated)
}

/// Visit frequencies of the packet-level MAC run with weights pinned,
/// indexed like `p.states()`.
pub fn simulated_occupancy(
    graph: &InterferenceGraph,
    weights: &WeightVector,
    p: &TransitionMatrix,
    steps: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = graph.node_count();
    let mut cfg = SimConfig::new(graph.clone(), ArrivalRates::new(vec![0.0; n])?, steps, seed);
    cfg.frozen_weights = Some(weights.as_slice().to_vec());
    cfg.lipschitz_threshold = None;
    let sim = Simulator::new(&cfg)?;
    let mut state = sim.initial_state();
    let mut counts = vec![0u64; p.len()];
    for _ in 0..steps {
        sim.step(&mut state);
        let (sigma, attempts) = state.schedule_masks();
        let x = ChainState::new(sigma, attempts);
        let k = p
            .index_of(x)
            .ok_or_else(|| Error::Numerical(format!("simulated state {x} outside the recurrence class")))?;
        counts[k] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / steps as f64).collect())
}

//! Interference graphs, independent sets, and the capacity region.
//!
//! Nodes are `0..n`. An edge `(i, j)` means `i` and `j` cannot transmit in the
//! same slot. Independent sets are enumerated in increasing order of their
//! indicator read as a binary number with node 0 as the least significant bit;
//! that order is also the tie-break order for max-weight selection.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{CounterRng, Stream};

/// Largest node count accepted by [`enumerate_independent_sets`].
pub const MAX_ENUMERATION_NODES: usize = 20;

/// Margins within this distance of 1 are treated as on the boundary of the region.
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct InterferenceGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl InterferenceGraph {
    /// Builds a graph from an edge list. Duplicate and reversed edges are merged.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph must have at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self { n, edges, neighbors })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, [])
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGraph("cycle needs at least 3 nodes".into()));
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Node 0 is the hub.
    pub fn star(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (0, i)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// G(n, p) with each pair drawn from the counter generator keyed by `seed`.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("edge probability {p} not in [0, 1]")));
        }
        let rng = CounterRng::new(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.bernoulli(p, i as u64, j, Stream::Generator, 0) {
                    edges.push((i, j));
                }
            }
        }
        Self::new(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Neighbor bitmasks, one per node. Only valid for `n <= 64`.
    pub fn adjacency_masks(&self) -> Vec<u64> {
        assert!(self.n <= 64, "adjacency masks need n <= 64");
        self.neighbors
            .iter()
            .map(|list| list.iter().fold(0u64, |m, &j| m | 1 << j))
            .collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            n: self.n,
            edges: self.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl fmt::Display for InterferenceGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G(n={}, |E|={})", self.n, self.edges.len())
    }
}

/// On-disk form: `{"n": 3, "edges": [[0, 1], [1, 2]]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GraphFile {
    pub n: usize,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
}

impl From<InterferenceGraph> for GraphFile {
    fn from(g: InterferenceGraph) -> Self {
        g.to_file()
    }
}

impl TryFrom<GraphFile> for InterferenceGraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        InterferenceGraph::new(file.n, file.edges.into_iter().map(|[i, j]| (i, j)))
    }
}

/// Indicator vector of a conflict-free transmission pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndependentSet {
    indicator: Vec<bool>,
}

impl IndependentSet {
    pub fn empty(n: usize) -> Self {
        Self { indicator: vec![false; n] }
    }

    /// Validates the indicator against the graph's edges.
    pub fn new(graph: &InterferenceGraph, indicator: Vec<bool>) -> Result<Self> {
        if indicator.len() != graph.node_count() {
            return Err(Error::InvalidParameter(format!(
                "indicator has length {}, graph has {} nodes",
                indicator.len(),
                graph.node_count()
            )));
        }
        if let Some(&(i, j)) = graph.edges().iter().find(|&&(i, j)| indicator[i] && indicator[j]) {
            return Err(Error::InvalidParameter(format!(
                "nodes {i} and {j} are adjacent and cannot both be active"
            )));
        }
        Ok(Self { indicator })
    }

    pub(crate) fn from_indicator_unchecked(indicator: Vec<bool>) -> Self {
        Self { indicator }
    }

    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self {
            indicator: (0..n).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn mask(&self) -> u64 {
        assert!(self.indicator.len() <= 64);
        self.indicator
            .iter()
            .enumerate()
            .fold(0, |m, (i, &b)| m | (b as u64) << i)
    }

    pub fn indicator(&self) -> &[bool] {
        &self.indicator
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indicator[i]
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.indicator.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.indicator.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.indicator.iter().any(|&b| b)
    }

    pub fn is_independent_in(&self, graph: &InterferenceGraph) -> bool {
        self.indicator.len() == graph.node_count()
            && graph.edges().iter().all(|&(i, j)| !(self.indicator[i] && self.indicator[j]))
    }

    pub fn weight(&self, weights: &[f64]) -> f64 {
        self.members().map(|i| weights[i]).sum()
    }
}

impl fmt::Display for IndependentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let members: Vec<_> = self.members().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", members.join(","))
    }
}

/// Per-node Bernoulli arrival rates, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ArrivalRates(Vec<f64>);

impl ArrivalRates {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some((i, r)) = rates.iter().enumerate().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidRates(format!("rate {r} at node {i} is outside [0, 1]")));
        }
        Ok(Self(rates))
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

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|r| r * s).collect())
    }

    pub(crate) fn check_len(&self, graph: &InterferenceGraph) -> Result<()> {
        if self.0.len() != graph.node_count() {
            return Err(Error::InvalidRates(format!(
                "{} rates for a graph with {} nodes",
                self.0.len(),
                graph.node_count()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for ArrivalRates {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ArrivalRates> for Vec<f64> {
    fn from(r: ArrivalRates) -> Self {
        r.0
    }
}

/// Bitmasks of all independent sets, ascending.
pub fn independent_masks(graph: &InterferenceGraph) -> Result<Vec<u64>> {
    let n = graph.node_count();
    if n > MAX_ENUMERATION_NODES {
        return Err(Error::TooLarge {
            what: "independent-set enumeration",
            size: n,
            limit: MAX_ENUMERATION_NODES,
        });
    }
    let adj = graph.adjacency_masks();
    let independent = |mask: u64| {
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            if adj[i] & mask != 0 {
                return false;
            }
            rest &= rest - 1;
        }
        true
    };
    Ok((0..1u64 << n).filter(|&m| independent(m)).collect())
}

pub fn enumerate_independent_sets(graph: &InterferenceGraph) -> Result<Vec<IndependentSet>> {
    let n = graph.node_count();
    Ok(independent_masks(graph)?
        .into_iter()
        .map(|m| IndependentSet::from_mask(n, m))
        .collect())
}

/// Index into `masks` of the heaviest set; the earliest wins ties.
pub(crate) fn argmax_mask(masks: &[u64], weights: &[f64]) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (k, &m) in masks.iter().enumerate() {
        let mut value = 0.0;
        let mut rest = m;
        while rest != 0 {
            value += weights[rest.trailing_zeros() as usize];
            rest &= rest - 1;
        }
        if value > best_value {
            best_value = value;
            best = k;
        }
    }
    best
}

pub fn max_weight_independent_set(
    graph: &InterferenceGraph,
    weights: &[f64],
) -> Result<IndependentSet> {
    if weights.len() != graph.node_count() {
        return Err(Error::InvalidParameter(format!(
            "{} weights for {} nodes",
            weights.len(),
            graph.node_count()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite".into()));
    }
    let masks = independent_masks(graph)?;
    let k = argmax_mask(&masks, weights);
    Ok(IndependentSet::from_mask(graph.node_count(), masks[k]))
}

/// `1 / min{ sum(alpha) : alpha >= 0, sum_s alpha_s * s >= rates }` over independent sets.
///
/// Only maximal sets are used as LP columns: any cover can move mass from a set
/// to a superset without losing feasibility. Returns `+inf` for the zero vector.
pub fn capacity_margin(graph: &InterferenceGraph, rates: &ArrivalRates) -> Result<f64> {
    rates.check_len(graph)?;
    let lambda = rates.as_slice();
    if lambda.iter().all(|&r| r == 0.0) {
        return Ok(f64::INFINITY);
    }
    let adj = graph.adjacency_masks();
    let n = graph.node_count();
    let maximal: Vec<u64> = independent_masks(graph)?
        .into_iter()
        .filter(|&m| (0..n).all(|i| m >> i & 1 == 1 || adj[i] & m != 0))
        .collect();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = maximal.iter().map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for (i, &r) in lambda.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let row: Vec<_> = maximal
            .iter()
            .zip(&vars)
            .filter(|(m, _)| *m >> i & 1 == 1)
            .map(|(_, &v)| (v, 1.0))
            .collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Ge, r);
    }
    let solution = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
    Ok(1.0 / solution.objective())
}

/// Strict interior of the capacity region: margin above 1 by more than [`CAPACITY_TOLERANCE`].
pub fn is_in_capacity_region(graph: &InterferenceGraph, rates: &ArrivalRates) -> Result<bool> {
    Ok(capacity_margin(graph, rates)? > 1.0 + CAPACITY_TOLERANCE)
}

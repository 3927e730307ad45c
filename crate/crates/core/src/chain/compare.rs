use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{
    build_transition_matrix, check_instance, closed_form_probability, closed_form_successors, reachable_rows,
    ChainState, TransitionMatrix, WeightVector,
};
use crate::error::{Error, Result};
use crate::graph::InterferenceGraph;
use crate::rng::{CounterRng, Stream};

/// Comparison chain on the support of `p`, reversible with respect to the
/// product-form distribution.
pub fn reversible_q_from(p: &TransitionMatrix, weights: &WeightVector) -> TransitionMatrix {
    let n = p.node_count();
    let w = weights.as_slice();
    let scale = 0.5f64.powi(n as i32);
    let len = p.len();
    let mut q = DMatrix::zeros(len, len);
    for (i, x) in p.states().iter().enumerate() {
        let mut off = 0.0;
        for (j, y) in p.states().iter().enumerate() {
            if i == j || p.matrix()[(i, j)] <= 0.0 {
                continue;
            }
            let mut v = scale;
            for k in 0..n {
                if x.sigma >> k & 1 == 1 {
                    v *= if y.sigma >> k & 1 == 1 { 1.0 - 1.0 / w[k] } else { 1.0 / w[k] };
                }
            }
            q[(i, j)] = v;
            off += v;
        }
        assert!(off <= 1.0 + 1e-12, "off-diagonal mass {off} exceeds 1");
        q[(i, i)] = (1.0 - off).max(0.0);
    }
    TransitionMatrix {
        nodes: n,
        states: p.states().to_vec(),
        matrix: q,
    }
}

pub fn build_reversible_q(graph: &InterferenceGraph, weights: &WeightVector) -> Result<TransitionMatrix> {
    let p = build_transition_matrix(graph, weights)?;
    Ok(reversible_q_from(&p, weights))
}

/// `qpi_x` proportional to the product of `W_i` over `i` in `sigma`.
pub fn product_form_reference(weights: &WeightVector, states: &[ChainState]) -> Vec<f64> {
    let logs: Vec<f64> = states.iter().map(|x| weights.log_weight_of(x.sigma)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    unnorm.into_iter().map(|v| v / total).collect()
}

/// `max |mu_x Q_xy - mu_y Q_yx|`.
pub fn detailed_balance_residual(q: &TransitionMatrix, mu: &[f64]) -> f64 {
    let m = q.matrix();
    let len = q.len();
    let mut worst = 0.0f64;
    for i in 0..len {
        for j in i + 1..len {
            worst = worst.max((mu[i] * m[(i, j)] - mu[j] * m[(j, i)]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N")]
    pub n_states: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max |ln(pi_x / qpi_x)|`.
    pub max_log_ratio: f64,
    /// `N ln R`.
    pub log_bound: f64,
    /// `n 4^n ln 2`.
    pub loose_log_bound: f64,
    pub r_le_two_pow_n: bool,
    pub ratios_within_bound: bool,
    pub pass: bool,
}

/// Ratio `R` over off-diagonal transitions and the stationary comparison it implies.
pub fn ratio_bound_check(p: &TransitionMatrix, q: &TransitionMatrix, pi: &[f64], qpi: &[f64]) -> Result<RatioReport> {
    if p.states() != q.states() {
        return Err(Error::Numerical("P and Q are indexed by different states".into()));
    }
    let len = p.len();
    let mut r = 1.0f64;
    for i in 0..len {
        for j in 0..len {
            if i == j {
                continue;
            }
            let (a, b) = (p.matrix()[(i, j)], q.matrix()[(i, j)]);
            match (a > 0.0, b > 0.0) {
                (true, true) => r = r.max(a / b).max(b / a),
                (false, false) => {}
                _ => {
                    return Err(Error::Numerical(format!(
                        "P and Q supports differ at {} -> {}",
                        p.states()[i],
                        p.states()[j]
                    )))
                }
            }
        }
    }
    let ratios: Vec<f64> = pi.iter().zip(qpi).map(|(a, b)| a / b).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let max_log_ratio = ratios.iter().map(|x| x.ln().abs()).fold(0.0, f64::max);
    let n = p.node_count();
    let log_bound = len as f64 * r.ln();
    let r_le_two_pow_n = r <= 2f64.powi(n as i32) * (1.0 + 1e-12);
    let ratios_within_bound = max_log_ratio <= log_bound + 1e-12;
    Ok(RatioReport {
        r,
        n_states: len,
        min_ratio,
        max_ratio,
        max_log_ratio,
        log_bound,
        loose_log_bound: n as f64 * 4f64.powi(n as i32) * std::f64::consts::LN_2,
        r_le_two_pow_n,
        ratios_within_bound,
        pass: r_le_two_pow_n && ratios_within_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsReport {
    /// `E_qpi[T] + H(qpi)`.
    pub free_energy: f64,
    /// `ln sum exp(T)`, the maximal value.
    pub log_partition: f64,
    pub max_random_free_energy: f64,
    pub samples: usize,
    pub expected_t: f64,
    pub max_t: f64,
    pub log_states: f64,
    pub maximizer_ok: bool,
    pub expectation_ok: bool,
    pub pass: bool,
}

fn free_energy(mu: &[f64], t: &[f64]) -> f64 {
    mu.iter()
        .zip(t)
        .map(|(&m, &ti)| if m > 0.0 { m * (ti - m.ln()) } else { 0.0 })
        .sum()
}

/// Variational check that the product form maximizes `E[T] + H` and puts
/// enough mass on heavy schedules.
pub fn gibbs_check(weights: &WeightVector, states: &[ChainState], samples: usize, seed: u64) -> GibbsReport {
    let t: Vec<f64> = states.iter().map(|x| weights.log_weight_of(x.sigma)).collect();
    let qpi = product_form_reference(weights, states);
    let f_star = free_energy(&qpi, &t);
    let max_t = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_partition = max_t + t.iter().map(|x| (x - max_t).exp()).sum::<f64>().ln();

    let rng = CounterRng::new(seed);
    let mut max_random = f64::NEG_INFINITY;
    for s in 0..samples as u64 {
        // sharpness varies across samples so near-point masses are covered too
        let sharp = 1.0 + 8.0 * rng.uniform(s, 0, Stream::Analysis, u32::MAX);
        let raw: Vec<f64> = (0..states.len())
            .map(|k| (-rng.uniform(s, k, Stream::Analysis, 0).max(1e-300).ln()).powf(sharp))
            .collect();
        let total: f64 = raw.iter().sum();
        let mu: Vec<f64> = raw.iter().map(|v| v / total).collect();
        max_random = max_random.max(free_energy(&mu, &t));
    }
    let expected_t: f64 = qpi.iter().zip(&t).map(|(p, ti)| p * ti).sum();
    let log_states = (states.len() as f64).ln();
    let maximizer_ok = max_random <= f_star + 1e-12 && (f_star - log_partition).abs() <= 1e-9;
    let expectation_ok = expected_t >= max_t - log_states - 1e-12;
    GibbsReport {
        free_energy: f_star,
        log_partition,
        max_random_free_energy: max_random,
        samples,
        expected_t,
        max_t,
        log_states,
        maximizer_ok,
        expectation_ok,
        pass: maximizer_ok && expectation_ok,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub max_difference: f64,
    pub max_weight_difference: f64,
    /// `max_difference / max_weight_difference`, 0 when the weights coincide.
    pub fitted_constant: f64,
}

/// Largest entrywise change of the transition matrix between two weight vectors.
pub fn transition_sensitivity(
    graph: &InterferenceGraph,
    w1: &WeightVector,
    w2: &WeightVector,
) -> Result<SensitivityReport> {
    check_instance(graph, w1)?;
    check_instance(graph, w2)?;
    let adj = graph.adjacency_masks();
    let mut states: BTreeSet<ChainState> = BTreeSet::new();
    for w in [w1, w2] {
        states.extend(reachable_rows(|x| closed_form_successors(&adj, w.as_slice(), x)).into_keys());
    }
    let mut max_difference = 0.0f64;
    for &x in &states {
        for &y in &states {
            let a = closed_form_probability(&adj, w1.as_slice(), x, y);
            let b = closed_form_probability(&adj, w2.as_slice(), x, y);
            max_difference = max_difference.max((a - b).abs());
        }
    }
    let max_weight_difference = w1
        .as_slice()
        .iter()
        .zip(w2.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let fitted_constant = if max_weight_difference > 0.0 {
        max_difference / max_weight_difference
    } else {
        0.0
    };
    Ok(SensitivityReport {
        max_difference,
        max_weight_difference,
        fitted_constant,
    })
}

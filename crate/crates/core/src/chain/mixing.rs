use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use super::TransitionMatrix;
use crate::error::{Error, Result};

/// Largest state space for exact subset minimization in [`conductance`].
pub const MAX_CONDUCTANCE_STATES: usize = 24;

/// `P*_xy = pi_y P_yx / pi_x`.
pub fn time_reversal(p: &TransitionMatrix, pi: &[f64]) -> DMatrix<f64> {
    let m = p.matrix();
    DMatrix::from_fn(p.len(), p.len(), |x, y| pi[y] * m[(y, x)] / pi[x])
}

pub fn pp_star(p: &TransitionMatrix, pi: &[f64]) -> DMatrix<f64> {
    p.matrix() * time_reversal(p, pi)
}

/// `min Q(S, S^c) / (pi(S) pi(S^c))` over nonempty `S` with `pi(S) <= 1/2`,
/// where `Q(S, S^c)` is the stationary flow of `PP*` across the cut.
pub fn conductance(p: &TransitionMatrix, pi: &[f64]) -> Result<f64> {
    let len = p.len();
    if len > MAX_CONDUCTANCE_STATES {
        return Err(Error::TooLarge {
            what: "exact conductance",
            size: len,
            limit: MAX_CONDUCTANCE_STATES,
        });
    }
    if len < 2 {
        return Ok(f64::INFINITY);
    }
    let k = pp_star(p, pi);
    let flow = DMatrix::from_fn(len, len, |x, y| pi[x] * k[(x, y)]);
    let mut inside = vec![false; len];
    let (mut cut, mut mass) = (0.0f64, 0.0f64);
    let mut best = f64::INFINITY;
    // Gray-code walk over subsets, one membership flip per step
    for step in 1u64..1 << len {
        let bit = step.trailing_zeros() as usize;
        let entering = !inside[bit];
        let (mut out_flow, mut in_flow) = (0.0, 0.0);
        for y in 0..len {
            if y == bit {
                continue;
            }
            if inside[y] {
                in_flow += flow[(y, bit)] + flow[(bit, y)];
            } else {
                out_flow += flow[(bit, y)] + flow[(y, bit)];
            }
        }
        // flow is symmetric for the reversible PP*, both directions are averaged
        let delta = 0.5 * (out_flow - in_flow);
        if entering {
            cut += delta;
            mass += pi[bit];
        } else {
            cut -= delta;
            mass -= pi[bit];
        }
        inside[bit] = entering;
        if mass <= 0.5 + 1e-15 && mass > 0.0 {
            best = best.min(cut.max(0.0) / (mass * (1.0 - mass)));
        }
    }
    Ok(best)
}

/// `ln C_n` with `C_n = 4^(-n 4^n)`.
pub fn ln_c_n(n: usize) -> f64 {
    -(n as f64) * 4f64.powi(n as i32) * 4f64.ln()
}

/// `ln(C_n^2 W_max^(-3n))`.
pub fn conductance_lower_bound_ln(n: usize, w_max: f64) -> f64 {
    2.0 * ln_c_n(n) - 3.0 * n as f64 * w_max.ln()
}

/// `ln(C_n^4 W_max^(-6n) / 2)`, a lower bound on `1 - lambda_PP*`.
pub fn gap_lower_bound_ln(n: usize, w_max: f64) -> f64 {
    0.5f64.ln() + 4.0 * ln_c_n(n) - 6.0 * n as f64 * w_max.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralGap {
    /// Eigenvalues of `PP*`, descending.
    pub eigenvalues: Vec<f64>,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub lambda_min: f64,
    /// `max(|lambda_min|, lambda_2)`.
    pub lambda: f64,
}

/// Spectrum of `PP*` via the `pi`-symmetrization `D^(1/2) PP* D^(-1/2)`.
pub fn spectral_gap(p: &TransitionMatrix, pi: &[f64]) -> Result<SpectralGap> {
    let len = p.len();
    let k = pp_star(p, pi);
    let root: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
    let a = DMatrix::from_fn(len, len, |x, y| root[x] * k[(x, y)] / root[y]);
    let sym = (&a + a.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("eigen-solver did not converge".into()))?;
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let lambda_1 = eigenvalues[0];
    let lambda_2 = eigenvalues.get(1).copied().unwrap_or(0.0);
    let lambda_min = *eigenvalues.last().unwrap();
    Ok(SpectralGap {
        lambda: lambda_min.abs().max(lambda_2),
        eigenvalues,
        lambda_1,
        lambda_2,
        lambda_min,
    })
}

/// `lambda_PP* <= 1 - phi^2 / 2`.
pub fn cheeger_holds(gap: &SpectralGap, phi: f64) -> bool {
    gap.lambda <= 1.0 - phi * phi / 2.0 + 1e-12
}

/// `ln(1 - lambda_PP*) >= ln(C_n^4 W_max^(-6n) / 2)`.
pub fn gap_bound_holds(gap: &SpectralGap, n: usize, w_max: f64) -> bool {
    let slack = 1.0 - gap.lambda;
    slack > 0.0 && slack.ln() >= gap_lower_bound_ln(n, w_max)
}

/// `log10` of `4^(n 4^(n+1) + 1) W_max^(6n) ln(4^(n 4^n) W_max^n / (2 eps))`.
pub fn t_mix_bound_log10(n: usize, w_max: f64, eps: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("mixing bound needs n >= 2, got {n}")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter(format!("epsilon {eps} not in (0, 0.5)")));
    }
    if !(w_max.is_finite() && w_max >= 1.0) {
        return Err(Error::InvalidParameter(format!("W_max {w_max} must be >= 1")));
    }
    let nf = n as f64;
    let ln4 = 4f64.ln();
    let ln_prefactor = (nf * 4f64.powi(n as i32 + 1) + 1.0) * ln4 + 6.0 * nf * w_max.ln();
    let inner = nf * 4f64.powi(n as i32) * ln4 + nf * w_max.ln() - (2.0 * eps).ln();
    Ok((ln_prefactor + inner.ln()) / std::f64::consts::LN_10)
}

/// An integer at least `10^log10_t`.
pub fn ceiling_from_log10(log10_t: f64) -> BigUint {
    let log2_t = log10_t * std::f64::consts::LOG2_10;
    if log2_t < 52.0 {
        return BigUint::from(10f64.powf(log10_t).ceil().max(0.0) as u64);
    }
    let shift = log2_t.floor() - 52.0;
    let mantissa = (2f64.powf(log2_t - shift) * (1.0 + 1e-10)).ceil() as u64;
    BigUint::from(mantissa) << (shift as u64)
}

/// Slot count at least the mixing bound, as an exact integer.
pub fn t_mix_ceiling(n: usize, w_max: f64, eps: f64) -> Result<BigUint> {
    Ok(ceiling_from_log10(t_mix_bound_log10(n, w_max, eps)?))
}

/// `P^tau` by squaring; rows are renormalized after each product.
pub fn matrix_power(p: &DMatrix<f64>, tau: &BigUint) -> DMatrix<f64> {
    let normalize = |m: &mut DMatrix<f64>| {
        for mut row in m.row_iter_mut() {
            let s = row.sum();
            if s > 0.0 {
                row /= s;
            }
        }
    };
    let mut result = DMatrix::identity(p.nrows(), p.ncols());
    if tau.is_zero() {
        return result;
    }
    let mut base = p.clone();
    let bits = tau.bits();
    for i in 0..bits {
        if tau.bit(i) {
            result = &result * &base;
            normalize(&mut result);
        }
        if i + 1 < bits {
            base = &base * &base;
            normalize(&mut base);
        }
    }
    result
}

/// Full L1 distance `sum |a - b|`.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `||mu0 P^tau - pi||` in the full-L1 convention.
pub fn tv_after(p: &TransitionMatrix, mu0: &[f64], tau: &BigUint, pi: &[f64]) -> f64 {
    let power = matrix_power(p.matrix(), tau);
    let mu = power.tr_mul(&DVector::from_column_slice(mu0));
    tv_distance(mu.as_slice(), pi)
}

/// Worst full-L1 distance over point-mass starts.
pub fn max_tv_after(p: &TransitionMatrix, tau: &BigUint, pi: &[f64]) -> f64 {
    let power = matrix_power(p.matrix(), tau);
    power
        .row_iter()
        .map(|row| row.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Number of squarings performed for `tau`.
pub fn squarings(tau: &BigUint) -> u64 {
    if tau.is_zero() || tau.is_one() {
        0
    } else {
        tau.bits() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_transition_matrix, stationary_distribution, WeightVector};
    use crate::graph::InterferenceGraph;

    fn single() -> (TransitionMatrix, Vec<f64>) {
        let g = InterferenceGraph::empty(1).unwrap();
        let p = build_transition_matrix(&g, &WeightVector::new(vec![2.0]).unwrap()).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        (p, pi)
    }

    #[test]
    fn single_node_mixing_quantities() {
        let (p, pi) = single();
        let k = pp_star(&p, &pi);
        assert!(k.iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert!((conductance(&p, &pi).unwrap() - 1.0).abs() < 1e-12);
        let gap = spectral_gap(&p, &pi).unwrap();
        assert!((gap.lambda_1 - 1.0).abs() < 1e-12);
        assert!(gap.lambda.abs() < 1e-12);
        assert!(cheeger_holds(&gap, 1.0));
        let bound = conductance_lower_bound_ln(1, 2.0).exp();
        assert!((bound - 4f64.powi(-8) / 8.0).abs() < 1e-18);
    }

    #[test]
    fn tv_examples() {
        let (p, pi) = single();
        assert_eq!(tv_after(&p, &[1.0, 0.0], &BigUint::zero(), &pi), 1.0);
        assert!(tv_after(&p, &[1.0, 0.0], &BigUint::from(1_000_000u32), &pi) < 1e-10);
    }

    #[test]
    fn t_mix_log_domain() {
        let direct = 129.0 * 4f64.log10() + 12.0 * 2f64.log10() + (32.0 * 4f64.ln() + 4f64.ln() - 0.2f64.ln()).log10();
        assert!((t_mix_bound_log10(2, 2.0, 0.1).unwrap() - direct).abs() < 1e-12);
        assert!(t_mix_bound_log10(2, 2.0, 0.4).unwrap() < t_mix_bound_log10(2, 2.0, 0.1).unwrap());
        assert!(t_mix_bound_log10(1, 2.0, 0.1).is_err());
        assert!(t_mix_bound_log10(2, 2.0, 0.5).is_err());
    }

    #[test]
    fn ceiling_dominates_bound() {
        for l in [3.5, 20.0, 82.97, 140.2] {
            let c = ceiling_from_log10(l);
            let back = c.bits() as f64 * std::f64::consts::LOG10_2;
            assert!(back >= l, "{l}");
            let c_f = c.to_string();
            // leading digits of the ceiling agree with 10^l
            let k = c_f.len().min(15);
            let digits = c_f.len() as f64 - k as f64 + c_f[..k].parse::<f64>().unwrap().log10();
            assert!(digits >= l && (l < 20.0 || digits - l < 1e-9), "{l} vs {digits}");
        }
    }

    #[test]
    fn matrix_power_matches_repeated_products() {
        let m = DMatrix::from_row_slice(3, 3, &[0.5, 0.25, 0.25, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4]);
        let mut direct = DMatrix::identity(3, 3);
        for tau in 0u32..40 {
            let fast = matrix_power(&m, &BigUint::from(tau));
            assert!((&fast - &direct).abs().max() < 1e-14, "tau = {tau}");
            direct *= &m;
        }
    }
}

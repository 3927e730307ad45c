use nalgebra::{DMatrix, DVector};

use super::{recurrence_class, TransitionMatrix};
use crate::error::{Error, Result};

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible chain, from BFS levels out of state 0.
pub fn period(p: &TransitionMatrix) -> usize {
    let n = p.len();
    let m = p.matrix();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if m[(u, v)] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for u in 0..n {
        for v in 0..n {
            if m[(u, v)] > 0.0 && level[u] != usize::MAX && level[v] != usize::MAX {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g
}

/// `||pi P - pi||_1`.
pub fn stationarity_residual(p: &TransitionMatrix, pi: &[f64]) -> f64 {
    let v = DVector::from_column_slice(pi);
    let moved = p.matrix().tr_mul(&v);
    (moved - v).abs().sum()
}

/// Unique stationary distribution of an irreducible aperiodic chain, by LU
/// on `(P^T - I)` with the last equation replaced by normalization.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = p.len();
    if n == 0 {
        return Err(Error::NotErgodic("empty state space".into()));
    }
    if recurrence_class(p, 0).len() != n {
        return Err(Error::NotErgodic("transition matrix is reducible".into()));
    }
    let d = period(p);
    if d != 1 {
        return Err(Error::NotErgodic(format!("chain is periodic with period {d}")));
    }
    let mut a: DMatrix<f64> = p.matrix().transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular stationary system".into()))?;
    // one round of iterative refinement
    let r = &b - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite() || **v < -1e-12) {
        return Err(Error::Numerical(format!("stationary solve produced {bad}")));
    }
    let pi: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|v| v / total).collect())
}

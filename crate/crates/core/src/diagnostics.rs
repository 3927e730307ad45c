//! Potential function, drift estimation, stability classification and the
//! neighbor-weight estimator probe.

use std::f64::consts::{E, LN_2};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::InterferenceGraph;
use crate::protocol::{g_inverse, log_g, pos_log_log, GParams};
use crate::simulator::{run_from, NetworkState, RunTrace, SimConfig, Simulator};
use crate::stats::{least_squares_slope, mean_and_stderr, median};

/// Absolute quadrature tolerance for [`potential_f`].
pub const POTENTIAL_TOLERANCE: f64 = 1e-9;
/// Fewest trace rows accepted by [`stability_classifier`].
pub const MIN_CLASSIFIER_ROWS: usize = 10_000;
pub const STABLE_SLOPE: f64 = 0.01;
pub const UNSTABLE_SLOPE: f64 = 0.05;
/// Default cap on the slots simulated per drift run.
pub const DEFAULT_DRIFT_SLOT_CAP: u64 = 1_000_000;

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    let scale_tol = tol.max(1e-15 * (left + right).abs());
    if depth == 0 || delta.abs() <= 15.0 * scale_tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` with Richardson correction.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(&f, a, fa, b, fb);
    adaptive(&f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// `F(x) = integral from e to x of [log log y]_+ dy`, zero for `x <= e`.
pub fn potential_f(x: f64) -> f64 {
    if x <= E {
        return 0.0;
    }
    integrate(pos_log_log, E, x, POTENTIAL_TOLERANCE)
}

/// Cubic Hermite table of `F` on a log-spaced grid, using the exact derivative.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    log_lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl PotentialTable {
    /// Grid over `[e, x_max]` with `points` nodes.
    pub fn new(x_max: f64, points: usize) -> Self {
        let points = points.max(2);
        let (log_lo, log_hi) = (1.0, x_max.max(E * 2.0).ln());
        let step = (log_hi - log_lo) / (points - 1) as f64;
        let mut values = Vec::with_capacity(points);
        let mut acc = 0.0;
        let mut prev = E;
        for k in 0..points {
            let y = (log_lo + step * k as f64).exp();
            acc += integrate(pos_log_log, prev, y, POTENTIAL_TOLERANCE / points as f64);
            values.push(acc);
            prev = y;
        }
        Self { log_lo, step, values }
    }

    pub fn upper(&self) -> f64 {
        (self.log_lo + self.step * (self.values.len() - 1) as f64).exp()
    }

    /// Interpolated `F(x)`; exact quadrature outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= E {
            return 0.0;
        }
        let u = x.ln();
        let t = (u - self.log_lo) / self.step;
        let k = t.floor() as usize;
        if k + 1 >= self.values.len() {
            return potential_f(x);
        }
        let (u0, u1) = (self.log_lo + self.step * k as f64, self.log_lo + self.step * (k + 1) as f64);
        // d/du F(e^u) = e^u log u
        let (d0, d1) = (u0.exp() * u0.ln(), u1.exp() * u1.ln());
        let s = t - k as f64;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[k] + h10 * self.step * d0 + h01 * self.values[k + 1] + h11 * self.step * d1
    }
}

/// Shared table covering queues up to `1e12`.
pub fn potential_f_cached(x: f64) -> f64 {
    static TABLE: OnceLock<PotentialTable> = OnceLock::new();
    TABLE.get_or_init(|| PotentialTable::new(1e12, 4096)).eval(x)
}

/// A positive real stored by its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogScalar {
    ln: f64,
}

impl LogScalar {
    pub fn from_ln(ln: f64) -> Self {
        Self { ln }
    }

    pub fn from_value(v: f64) -> Self {
        Self { ln: v.ln() }
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    pub fn log10(&self) -> f64 {
        self.ln / std::f64::consts::LN_10
    }

    /// The value as a float; `inf` once it leaves the `f64` range.
    pub fn value(&self) -> f64 {
        self.ln.exp()
    }

    /// Rounded-up slot count, `None` above `u64::MAX`.
    pub fn as_slots(&self) -> Option<u64> {
        let v = self.value().ceil();
        (v.is_finite() && v < u64::MAX as f64).then(|| v.max(0.0) as u64)
    }
}

impl Serialize for LogScalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("LogScalar", 2)?;
        st.serialize_field("log10", &self.log10())?;
        let v = self.value();
        st.serialize_field("value", &v.is_finite().then_some(v))?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    CaseOne,
    CaseTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "L_Q")]
    pub l_q: f64,
    #[serde(rename = "L_AB")]
    pub l_ab: f64,
    #[serde(rename = "C")]
    pub c: LogScalar,
    pub w_max: f64,
    pub regime: Regime,
    pub h: LogScalar,
    pub k: LogScalar,
}

/// `L = sum F(Q_i) + sum over directed neighbor pairs of A^2 + g^{-1}(B)`,
/// with the auxiliary `C`, `h`, `k` of the drift condition.
pub fn lyapunov_l(state: &NetworkState, params: &GParams) -> LyapunovReport {
    let n = state.nodes.len() as f64;
    let l_q: f64 = state.nodes.iter().map(|s| potential_f_cached(s.queue as f64)).sum();
    let l_ab: f64 = state
        .nodes
        .iter()
        .flat_map(|s| &s.counters)
        .map(|c| (c.a as f64).powi(2) + g_inverse(c.b as f64, params))
        .sum();
    let a_max = state.nodes.iter().map(|s| s.a_max()).max().unwrap_or(0);
    let b_max = state.nodes.iter().map(|s| s.b_max()).max().unwrap_or(0);
    let ln_c = log_g(a_max as f64, params).max((b_max as f64).ln());
    let w_max = state.nodes.iter().map(|s| s.weight(params)).fold(1.0, f64::max);
    let lw = w_max.ln();
    let (regime, h, k) = if ln_c >= 3.0 * lw {
        (Regime::CaseOne, LogScalar::from_ln(n * ln_c), LogScalar::from_ln(2.0 * n * ln_c))
    } else {
        let ln_ee = lw.sqrt().exp();
        (
            Regime::CaseTwo,
            LogScalar::from_ln(ln_ee - LN_2),
            LogScalar::from_ln((lw.sqrt() / 2.0).ln() + ln_ee),
        )
    };
    LyapunovReport {
        l: l_q + l_ab,
        l_q,
        l_ab,
        c: LogScalar::from_ln(ln_c),
        w_max,
        regime,
        h,
        k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub start: LyapunovReport,
    pub runs: usize,
    pub seeds: Vec<u64>,
    /// Slots simulated per run: `h(x)` or the cap.
    pub slots: u64,
    pub truncated: bool,
    pub deltas: Vec<f64>,
    pub mean_delta: f64,
    pub stderr: f64,
    /// `-k(x)`, the drift the bound asks for; reported, not asserted.
    pub minus_k: LogScalar,
    pub meets_bound: bool,
}

/// Monte-Carlo estimate of `E[L(h(x)) - L(0)]` from `runs` seeds
/// `config.seed, config.seed + 1, ...`.
pub fn drift_estimate(config: &SimConfig, start: &NetworkState, runs: usize, slot_cap: u64) -> Result<DriftReport> {
    if runs == 0 {
        return Err(Error::InvalidParameter("drift estimate needs at least one run".into()));
    }
    let report = lyapunov_l(start, &config.params);
    let wanted = report.h.as_slots();
    let slots = wanted.map_or(slot_cap, |h| h.min(slot_cap)).max(1);
    let truncated = wanted.is_none_or(|h| h > slot_cap);
    let seeds: Vec<u64> = (0..runs as u64).map(|r| config.seed.wrapping_add(r)).collect();
    let deltas = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = config.clone();
            cfg.seed = seed;
            cfg.record_every = slots;
            let sim = Simulator::new(&cfg)?;
            let mut state = start.clone();
            run_from(&sim, &mut state, slots)?;
            Ok(lyapunov_l(&state, &cfg.params).l - report.l)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean_delta, stderr) = mean_and_stderr(&deltas);
    let minus_k = report.k;
    let meets_bound = minus_k.value().is_finite() && mean_delta <= -minus_k.value();
    Ok(DriftReport {
        start: report,
        runs,
        seeds,
        slots,
        truncated,
        deltas,
        mean_delta,
        stderr,
        minus_k,
        meets_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub verdict: Stability,
    /// Least-squares slope of the total queue over the second half, packets per slot.
    pub slope: f64,
    /// Largest total queue in each quarter of the trace.
    pub quarter_maxima: [f64; 4],
    /// Last-quarter maximum over the median of the quarter maxima.
    pub max_ratio: f64,
    /// Last-quarter maximum over the last-quarter median total queue.
    pub last_quarter_peak_to_median: f64,
}

/// Classifies a run by the growth of its total queue.
///
/// Stable needs `slope < 0.01` and a last-quarter peak at most twice the
/// median of the four quarter peaks; unstable needs `slope > 0.05`.
pub fn stability_classifier(trace: &RunTrace) -> Result<StabilityVerdict> {
    let rows = &trace.rows;
    if rows.len() < MIN_CLASSIFIER_ROWS {
        return Err(Error::InvalidParameter(format!(
            "classifier needs at least {MIN_CLASSIFIER_ROWS} trace rows, got {}",
            rows.len()
        )));
    }
    let (xs, ys) = trace.total_queue_series();
    let half = ys.len() / 2;
    let slope = least_squares_slope(&xs[half..], &ys[half..]);
    let quarter = ys.len() / 4;
    let mut quarter_maxima = [0.0; 4];
    for (k, m) in quarter_maxima.iter_mut().enumerate() {
        let end = if k == 3 { ys.len() } else { (k + 1) * quarter };
        *m = ys[k * quarter..end].iter().copied().fold(0.0, f64::max);
    }
    let typical = median(&quarter_maxima);
    let last = quarter_maxima[3];
    let max_ratio = if typical > 0.0 { last / typical } else if last > 0.0 { f64::INFINITY } else { 1.0 };
    let last_median = median(&ys[3 * quarter..]);
    let last_quarter_peak_to_median = if last_median > 0.0 { last / last_median } else { f64::NAN };
    let verdict = if slope < STABLE_SLOPE && max_ratio <= 2.0 {
        Stability::Stable
    } else if slope > UNSTABLE_SLOPE {
        Stability::Unstable
    } else {
        Stability::Inconclusive
    };
    Ok(StabilityVerdict {
        verdict,
        slope,
        quarter_maxima,
        max_ratio,
        last_quarter_peak_to_median,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeEstimate {
    /// Node keeping the counter.
    pub observer: usize,
    pub neighbor: usize,
    pub neighbor_weight: f64,
    /// `W_j ln 2`.
    pub fixed_point: f64,
    pub band: [f64; 2],
    /// Median of `g(A)` over the second half of the run.
    pub median_g: f64,
    pub ratio_to_weight: f64,
    pub within_band: bool,
    /// `(slot, g(A))` every `stride` slots.
    pub trajectory: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub horizon: u64,
    pub seed: u64,
    pub stride: u64,
    pub edges: Vec<EdgeEstimate>,
}

impl EstimatorReport {
    pub fn all_within_band(&self) -> bool {
        self.edges.iter().all(|e| e.within_band)
    }
}

/// Runs the MAC with pinned weights and tracks how `g(A^i_j)` settles
/// relative to `W_j ln 2`.
pub fn estimator_probe(
    graph: &InterferenceGraph,
    frozen_weights: &[f64],
    horizon: u64,
    seed: u64,
    params: &GParams,
) -> Result<EstimatorReport> {
    let n = graph.node_count();
    let mut cfg = SimConfig::new(graph.clone(), crate::graph::ArrivalRates::new(vec![0.0; n])?, horizon, seed);
    cfg.frozen_weights = Some(frozen_weights.to_vec());
    cfg.params = *params;
    let stride = cfg.record_every;
    let sim = Simulator::new(&cfg)?;
    let mut state = sim.initial_state();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| graph.neighbors(i).iter().map(move |&j| (i, j))).collect();
    let mut tail: Vec<Vec<f64>> = vec![Vec::with_capacity((horizon / 2) as usize + 1); pairs.len()];
    let mut trajectories: Vec<Vec<(u64, f64)>> = vec![Vec::new(); pairs.len()];
    let g_values = |state: &NetworkState| -> Vec<f64> {
        state
            .nodes
            .iter()
            .flat_map(|s| s.counters.iter().map(|c| log_g(c.a as f64, params).exp()))
            .collect()
    };
    for (k, v) in g_values(&state).into_iter().enumerate() {
        trajectories[k].push((0, v));
    }
    for t in 1..=horizon {
        sim.step(&mut state);
        let values = g_values(&state);
        for (k, &v) in values.iter().enumerate() {
            if t > horizon / 2 {
                tail[k].push(v);
            }
            if t % stride == 0 {
                trajectories[k].push((t, v));
            }
        }
    }
    let edges = pairs
        .iter()
        .zip(tail)
        .zip(trajectories)
        .map(|((&(i, j), tail), trajectory)| {
            let w = frozen_weights[j];
            let fixed_point = w * LN_2;
            let band = [fixed_point / 2.0, fixed_point * 2.0];
            let median_g = if tail.is_empty() { f64::NAN } else { median(&tail) };
            EdgeEstimate {
                observer: i,
                neighbor: j,
                neighbor_weight: w,
                fixed_point,
                band,
                median_g,
                ratio_to_weight: median_g / w,
                within_band: (band[0]..=band[1]).contains(&median_g),
                trajectory,
            }
        })
        .collect();
    Ok(EstimatorReport {
        horizon,
        seed,
        stride,
        edges,
    })
}

/// `[log log x]_+`, the derivative of [`potential_f`].
pub fn potential_derivative(x: f64) -> f64 {
    pos_log_log(x)
}

//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qmac_core::chain::*;
use qmac_core::diagnostics::{estimator_probe, potential_derivative, potential_f, stability_classifier, Stability};
use qmac_core::graph::{capacity_margin, ArrivalRates, InterferenceGraph};
use qmac_core::protocol::{g_inverse, g_of, GParams};
use qmac_core::rng::{CounterRng, Stream};
use qmac_core::simulator::{run, RunTrace, SimConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn weight_sets(n: usize) -> Vec<WeightVector> {
    let alternating = (0..n).map(|i| if i % 2 == 0 { 2.0 } else { 5.0 }).collect();
    vec![
        WeightVector::uniform(n, 1.0).unwrap(),
        WeightVector::uniform(n, 2.0).unwrap(),
        WeightVector::new(alternating).unwrap(),
    ]
}

fn small_instances() -> Vec<(&'static str, InterferenceGraph, WeightVector)> {
    let graphs = [
        ("K1", InterferenceGraph::complete(1).unwrap()),
        ("K2", InterferenceGraph::complete(2).unwrap()),
        ("P3", InterferenceGraph::path(3).unwrap()),
    ];
    graphs
        .into_iter()
        .flat_map(|(name, g)| weight_sets(g.node_count()).into_iter().map(move |w| (name, g.clone(), w)))
        .collect()
}

/// Every labelled graph on 1..=4 nodes.
fn all_graphs_up_to_four() -> Vec<InterferenceGraph> {
    let mut out = Vec::new();
    for n in 1..=4usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for mask in 0u32..1 << pairs.len() {
            let edges = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, e)| *e);
            out.push(InterferenceGraph::new(n, edges).unwrap());
        }
    }
    out
}

fn exhaustive_instances() -> Vec<(InterferenceGraph, WeightVector)> {
    all_graphs_up_to_four()
        .into_iter()
        .flat_map(|g| weight_sets(g.node_count()).into_iter().map(move |w| (g.clone(), w)))
        .collect()
}

/// Walk sampled directly from the rows of `P`.
fn sampled_walk_occupancy(p: &TransitionMatrix, steps: u64, seed: u64) -> Vec<f64> {
    let rng = CounterRng::new(seed);
    let m = p.matrix();
    let mut counts = vec![0u64; p.len()];
    let mut x = p.index_of(ChainState::IDLE).unwrap();
    for t in 0..steps {
        let u = rng.uniform(t, 0, Stream::Analysis, 0);
        let mut acc = 0.0;
        let mut next = p.len() - 1;
        for y in 0..p.len() {
            acc += m[(x, y)];
            if u < acc {
                next = y;
                break;
            }
        }
        x = next;
        counts[x] += 1;
    }
    counts.into_iter().map(|c| c as f64 / steps as f64).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (_, g, w) in small_instances() {
        let a = coin_enumeration_matrix(&g, &w).unwrap();
        let b = closed_form_matrix(&g, &w).unwrap();
        worst = worst.max(max_entry_difference(&a, &b));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("9 instances, max entry difference {worst:.2e}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    const STEPS: u64 = 1_000_000;
    let mut worst_sim: f64 = 0.0;
    let mut worst_walk: f64 = 0.0;
    for (k, (_, g, w)) in small_instances().into_iter().enumerate() {
        let p = build_transition_matrix(&g, &w).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        let occ = simulated_occupancy(&g, &w, &p, STEPS, 100 + k as u64).unwrap();
        worst_sim = worst_sim.max(tv_distance(&occ, &pi));
        worst_walk = worst_walk.max(tv_distance(&sampled_walk_occupancy(&p, STEPS, 200 + k as u64), &pi));
    }
    // K1, W = 2: P = [[1/2, 1/2], [1/2, 1/2]] so pi = (1/2, 1/2)
    let g = InterferenceGraph::complete(1).unwrap();
    let p = build_transition_matrix(&g, &WeightVector::new(vec![2.0]).unwrap()).unwrap();
    let pi = stationary_distribution(&p).unwrap();
    let exact = pi == [0.5, 0.5];
    outcome(
        worst_sim <= 0.02 && worst_walk <= 0.02 && exact,
        format!("TV simulator {worst_sim:.4}, TV sampled walk {worst_walk:.4}, K1/W=2 pi {pi:?}"),
    )
}

fn criterion_3() -> Outcome {
    let instances = exhaustive_instances();
    let mut failures = 0;
    let mut worst_r_over_bound: f64 = 0.0;
    for (g, w) in &instances {
        let p = build_transition_matrix(g, w).unwrap();
        let q = reversible_q_from(&p, w);
        let pi = stationary_distribution(&p).unwrap();
        let qpi = product_form_reference(w, p.states());
        let rep = ratio_bound_check(&p, &q, &pi, &qpi).unwrap();
        worst_r_over_bound = worst_r_over_bound.max(rep.r / 2f64.powi(g.node_count() as i32));
        if !rep.pass {
            failures += 1;
        }
    }
    // K1, W = 2: qpi = (1/3, 2/3), pi = (1/2, 1/2); P/Q off-diagonal = (1/2)/(1/4) = 2
    let g = InterferenceGraph::complete(1).unwrap();
    let w = WeightVector::new(vec![2.0]).unwrap();
    let p = build_transition_matrix(&g, &w).unwrap();
    let q = reversible_q_from(&p, &w);
    let pi = stationary_distribution(&p).unwrap();
    let qpi = product_form_reference(&w, p.states());
    let k1 = ratio_bound_check(&p, &q, &pi, &qpi).unwrap();
    let ratios: Vec<f64> = pi.iter().zip(&qpi).map(|(a, b)| a / b).collect();
    let k1_ok = (k1.r - 2.0).abs() <= 1e-12 && (ratios[0] - 1.5).abs() <= 1e-12 && (ratios[1] - 0.75).abs() <= 1e-12;
    outcome(
        failures == 0 && k1_ok,
        format!(
            "{} instances, {failures} failures, max R/2^n {worst_r_over_bound:.4}, K1/W=2 R {} ratios {ratios:?}",
            instances.len(),
            k1.r
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for g in [InterferenceGraph::complete(2).unwrap(), InterferenceGraph::empty(2).unwrap()] {
        for w in [vec![2.0, 2.0], vec![2.0, 5.0], vec![5.0, 5.0]] {
            let rep = analyze_chain(&g, &WeightVector::new(w.clone()).unwrap(), 0.1, 1).unwrap();
            let tv = rep.tv_at_tmix.unwrap_or(f64::NAN);
            let ok = tv < 0.1
                && rep.checks.get("cheeger") == Some(&CheckStatus::Pass)
                && rep.checks.get("conductance_bound") == Some(&CheckStatus::Pass)
                && rep.checks.get("gap_bound") == Some(&CheckStatus::Pass);
            pass &= ok;
            lines.push(format!("E{} W{w:?} tv {tv:.1e} sq {}", g.edges().len(), rep.squarings.unwrap_or(0)));
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(10);
    outcome(pass, format!("{}; {elapsed:.2?}", lines.join(", ")))
}

fn criterion_5() -> Outcome {
    let instances = exhaustive_instances();
    let mut failures = 0;
    let mut min_slack = f64::INFINITY;
    for (k, (g, w)) in instances.iter().enumerate() {
        let p = build_transition_matrix(g, w).unwrap();
        let rep = gibbs_check(w, p.states(), 100, k as u64);
        min_slack = min_slack.min(rep.expected_t - (rep.max_t - rep.log_states));
        if !rep.pass {
            failures += 1;
        }
    }
    outcome(
        failures == 0 && min_slack >= 0.0,
        format!("{} instances, {failures} failures, min slack {min_slack:.3e}", instances.len()),
    )
}

fn path3_config(seed: u64, horizon: u64) -> SimConfig {
    let g = InterferenceGraph::path(3).unwrap();
    SimConfig::new(g, ArrivalRates::new(vec![0.3, 0.1, 0.3]).unwrap(), horizon, seed)
}

fn criterion_6(runs: &[(RunTrace, Duration)]) -> Outcome {
    let cfg = path3_config(0, 1);
    let margin = capacity_margin(&cfg.graph, &cfg.rates).unwrap();
    let mut stable = 0;
    let mut parts = Vec::new();
    for (trace, elapsed) in runs {
        let v = stability_classifier(trace).unwrap();
        if v.verdict == Stability::Stable && *elapsed < Duration::from_secs(60) {
            stable += 1;
        }
        parts.push(format!("{:?} slope {:.1e} {elapsed:.1?}", v.verdict, v.slope));
    }
    outcome(stable >= 4, format!("{stable}/5 stable (margin {margin:.3}): {}", parts.join(", ")))
}

fn criterion_7() -> Outcome {
    let g = InterferenceGraph::complete(2).unwrap();
    let mut slopes = Vec::new();
    for seed in 0..5 {
        let cfg = SimConfig::new(g.clone(), ArrivalRates::new(vec![0.55, 0.55]).unwrap(), 100_000, seed);
        slopes.push(run(&cfg).unwrap().summary.queue_growth_slope);
    }
    let pass = slopes.iter().all(|&s| s >= 0.05);
    outcome(pass, format!("slopes {:?}", slopes.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>()))
}

fn criterion_8() -> Outcome {
    let g = InterferenceGraph::complete(2).unwrap();
    let band = [20.0 * LN_2 / 2.0, 20.0 * LN_2 * 2.0];
    let mut good = 0;
    let mut medians = Vec::new();
    for seed in 0..5 {
        let rep = estimator_probe(&g, &[20.0, 20.0], 100_000, seed, &GParams::default()).unwrap();
        let within = rep.edges.iter().all(|e| (band[0]..=band[1]).contains(&e.median_g));
        good += usize::from(within);
        medians.extend(rep.edges.iter().map(|e| format!("{:.1}", e.median_g)));
    }
    outcome(good >= 4, format!("{good}/5 seeds in [{:.2}, {:.2}], medians {medians:?}", band[0], band[1]))
}

fn criterion_9(runs: &[(RunTrace, Duration)]) -> Outcome {
    let violations: u64 = runs.iter().map(|(t, _)| t.summary.lipschitz_violations).sum();
    let checked = runs.iter().all(|(t, _)| t.summary.lipschitz_checked);
    let max_weight = runs
        .iter()
        .flat_map(|(t, _)| t.rows.iter().flat_map(|r| r.weights.iter().copied()))
        .fold(0.0, f64::max);
    outcome(
        violations == 0 && checked,
        format!("{violations} violations at threshold 100 over {} runs, largest sampled weight {max_weight:.2}", runs.len()),
    )
}

fn criterion_10() -> Outcome {
    let mut worst_fd: f64 = 0.0;
    for x in [10.0, 100.0, 1e4] {
        let h = 1e-3 * x;
        let fd = (potential_f(x + h) - potential_f(x - h)) / (2.0 * h);
        let exact = potential_derivative(x);
        worst_fd = worst_fd.max((fd - exact).abs() / exact);
    }
    let params = GParams::default();
    let mut worst_g: f64 = 0.0;
    for k in 0..=1200 {
        let x = 10f64.powf(k as f64 / 100.0);
        worst_g = worst_g.max((g_of(g_inverse(x, &params), &params) - x).abs() / x);
    }
    outcome(
        worst_fd <= 1e-6 && worst_g <= 1e-9,
        format!("F' relative error {worst_fd:.2e}, g round trip relative error {worst_g:.2e}"),
    )
}

fn criterion_11() -> Outcome {
    let cfg = path3_config(7, 100_000);
    let mut a = Vec::new();
    let mut b = Vec::new();
    run(&cfg).unwrap().write_csv(&mut a).unwrap();
    run(&cfg).unwrap().write_csv(&mut b).unwrap();
    outcome(!a.is_empty() && a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let stability_runs: Vec<(RunTrace, Duration)> = (0..5)
        .map(|seed| {
            let start = Instant::now();
            let trace = run(&path3_config(seed, 1_000_000)).unwrap();
            (trace, start.elapsed())
        })
        .collect();
    let results = [
        ("exact chain oracle", criterion_1()),
        ("stationary cross-validation", criterion_2()),
        ("product-form comparison", criterion_3()),
        ("mixing", criterion_4()),
        ("Gibbs principle", criterion_5()),
        ("stability inside capacity region", criterion_6(&stability_runs)),
        ("instability outside capacity region", criterion_7()),
        ("estimator fixed point", criterion_8()),
        ("weight Lipschitz", criterion_9(&stability_runs)),
        ("numerics", criterion_10()),
        ("determinism", criterion_11()),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("{} criterion {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

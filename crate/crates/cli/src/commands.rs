use qmac_core::chain::{analyze_chain as run_chain_analysis, WeightVector};
use qmac_core::config::ExperimentConfig;
use qmac_core::diagnostics::{drift_estimate, stability_classifier, StabilityVerdict, DEFAULT_DRIFT_SLOT_CAP};
use qmac_core::graph::{capacity_margin, enumerate_independent_sets, is_in_capacity_region};
use qmac_core::simulator::{run, RunSummary, Simulator};
use qmac_core::{Error, InterferenceGraph, SchedulerKind};
use serde::Serialize;
use serde_json::json;

use crate::output::{create, flush, prepare_dir, write_json};
use crate::CommonArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("capability limit: {0}")]
    Capability(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::TooLarge { .. } => CliError::Capability(e.to_string()),
            Error::InvalidGraph(_)
            | Error::InvalidRates(_)
            | Error::InvalidParameter(_)
            | Error::BurstViolation { .. }
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Io(_) => CliError::Config(e.to_string()),
            Error::ConstructionMismatch(_) | Error::NotErgodic(_) => CliError::CheckFailed(e.to_string()),
            Error::Numerical(_) | Error::Lp(_) => CliError::Runtime(e.to_string()),
        }
    }
}

struct Loaded {
    config: ExperimentConfig,
    graph: InterferenceGraph,
}

fn load(args: &CommonArgs) -> Result<Loaded, CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(h) = args.horizon {
        config.horizon = h;
    }
    let graph = config.build_graph()?;
    prepare_dir(&args.out)?;
    Ok(Loaded { config, graph })
}

fn say(args: &CommonArgs, line: impl AsRef<str>) {
    if !args.quiet {
        println!("{}", line.as_ref());
    }
}

fn classify(trace: &qmac_core::RunTrace) -> (Option<StabilityVerdict>, Option<String>) {
    match stability_classifier(trace) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

pub fn simulate(args: &CommonArgs) -> Result<(), CliError> {
    let Loaded { config, graph } = load(args)?;
    let sim = config.sim_config(&graph, config.scheduler)?;
    if !graph.is_connected() {
        say(args, "warning: interference graph is disconnected");
    }
    let trace = run(&sim)?;
    let (path, mut w) = create(&args.out, "trace.csv")?;
    trace.write_csv(&mut w)?;
    flush(w, &path)?;
    let (stability, note) = classify(&trace);
    let summary = json!({
        "command": "simulate",
        "seed": config.seed,
        "config": config.resolved(&graph),
        "summary": trace.summary,
        "stability": stability,
        "stability_note": note,
    });
    write_json(&args.out, "summary.json", &summary)?;
    let verdict = stability.as_ref().map_or("unclassified".to_string(), |v| format!("{:?}", v.verdict).to_lowercase());
    say(
        args,
        format!(
            "{} slots, throughput {:?}, slope {:.3e}, {verdict}",
            trace.summary.horizon, trace.summary.throughput, trace.summary.queue_growth_slope
        ),
    );
    Ok(())
}

pub fn analyze_chain(args: &CommonArgs) -> Result<(), CliError> {
    let Loaded { config, graph } = load(args)?;
    let weights = config
        .weights
        .clone()
        .or_else(|| config.frozen_weights.clone())
        .ok_or_else(|| CliError::Config("analyze-chain needs a \"weights\" vector".into()))?;
    let weights = WeightVector::new(weights)?;
    let report = run_chain_analysis(&graph, &weights, config.epsilon, config.seed)?;
    let mut value = serde_json::to_value(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    value["config"] = serde_json::to_value(config.resolved(&graph)).map_err(|e| CliError::Runtime(e.to_string()))?;
    value["seed"] = json!(config.seed);
    write_json(&args.out, "chain_report.json", &value)?;
    for (name, status) in &report.checks {
        say(args, format!("{name:<24} {}", serde_json::to_string(status).unwrap_or_default().trim_matches('"')));
    }
    let failed = report.failed_checks();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed.join(", ")))
    }
}

pub fn capacity(args: &CommonArgs) -> Result<(), CliError> {
    let Loaded { config, graph } = load(args)?;
    let rates = config.build_rates(&graph)?;
    let margin = capacity_margin(&graph, &rates)?;
    let inside = is_in_capacity_region(&graph, &rates)?;
    let sets = enumerate_independent_sets(&graph)?.len();
    write_json(
        &args.out,
        "capacity.json",
        &json!({
            "command": "capacity",
            "seed": config.seed,
            "config": config.resolved(&graph),
            "margin": margin.is_finite().then_some(margin),
            "in_capacity_region": inside,
            "independent_sets": sets,
        }),
    )?;
    say(args, format!("margin {margin}, inside capacity region: {inside}"));
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareRow {
    scheduler: SchedulerKind,
    slope: f64,
    total_throughput: f64,
    mean_total_queue: f64,
    max_total_queue_sampled: u64,
    verdict: Option<String>,
    lipschitz_violations: u64,
    summary: RunSummary,
}

pub fn compare(args: &CommonArgs) -> Result<(), CliError> {
    let Loaded { config, graph } = load(args)?;
    let schedulers = config.scheduler_list();
    if schedulers.is_empty() {
        return Err(CliError::Config("no schedulers to compare".into()));
    }
    let mut rows = Vec::new();
    for &kind in &schedulers {
        let sim = config.sim_config(&graph, kind)?;
        let trace = run(&sim)?;
        let (stability, _) = classify(&trace);
        let s = trace.summary.clone();
        rows.push(CompareRow {
            scheduler: kind,
            slope: s.queue_growth_slope,
            total_throughput: s.throughput.iter().sum(),
            mean_total_queue: s.mean_queue.iter().sum(),
            max_total_queue_sampled: trace.rows.iter().map(|r| r.total_queue()).max().unwrap_or(0),
            verdict: stability.map(|v| format!("{:?}", v.verdict).to_lowercase()),
            lipschitz_violations: s.lipschitz_violations,
            summary: s,
        });
    }
    write_json(
        &args.out,
        "compare.json",
        &json!({
            "command": "compare",
            "seed": config.seed,
            "config": config.resolved(&graph),
            "common_random_numbers": "arrival draws depend only on (seed, slot, node) and are shared by every scheduler; decision draws use a separate stream",
            "rows": rows,
        }),
    )?;
    let (path, mut w) = create(&args.out, "compare.csv")?;
    let mut table = String::from("scheduler,slope,total_throughput,mean_total_queue,max_total_queue,verdict\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.scheduler,
            r.slope,
            r.total_throughput,
            r.mean_total_queue,
            r.max_total_queue_sampled,
            r.verdict.as_deref().unwrap_or("")
        ));
    }
    std::io::Write::write_all(&mut w, table.as_bytes()).map_err(|e| CliError::Runtime(e.to_string()))?;
    flush(w, &path)?;
    say(args, format!("{:<20} {:>12} {:>10} {:>12} {:>13}", "scheduler", "slope", "thruput", "mean queue", "verdict"));
    for r in &rows {
        say(
            args,
            format!(
                "{:<20} {:>12.3e} {:>10.4} {:>12.2} {:>13}",
                r.scheduler.to_string(),
                r.slope,
                r.total_throughput,
                r.mean_total_queue,
                r.verdict.as_deref().unwrap_or("-")
            ),
        );
    }
    Ok(())
}

pub fn drift(args: &CommonArgs) -> Result<(), CliError> {
    let Loaded { config, graph } = load(args)?;
    let sim_cfg = config.sim_config(&graph, config.scheduler)?;
    let sim = Simulator::new(&sim_cfg)?;
    let start = sim.initial_state();
    let cap = config.drift_slot_cap.unwrap_or(DEFAULT_DRIFT_SLOT_CAP);
    let report = drift_estimate(&sim_cfg, &start, config.runs, cap)?;
    write_json(
        &args.out,
        "drift.json",
        &json!({
            "command": "drift",
            "seed": config.seed,
            "config": config.resolved(&graph),
            "drift": report,
        }),
    )?;
    say(
        args,
        format!(
            "L = {:.4}, {} slots x {} runs{}: mean dL = {:.4} +- {:.4}, -k = -{:.4e}",
            report.start.l,
            report.slots,
            report.runs,
            if report.truncated { " (truncated)" } else { "" },
            report.mean_delta,
            report.stderr,
            report.minus_k.value()
        ),
    );
    Ok(())
}

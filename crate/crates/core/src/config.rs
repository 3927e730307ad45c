//! JSON experiment configuration shared by every CLI subcommand.
//!
//! Relative file paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ArrivalRates, GraphFile, InterferenceGraph};
use crate::protocol::GParams;
use crate::schedulers::SchedulerKind;
use crate::simulator::{default_stride, ArrivalModel, BurstTrace, SimConfig, DEFAULT_LIPSCHITZ_THRESHOLD};

pub const DEFAULT_HORIZON: u64 = 100_000;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_RUNS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    File { file: PathBuf },
    Generator(GeneratorSpec),
    Inline(GraphFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// `empty`, `path`, `cycle`, `star`, `complete` or `erdos_renyi`.
    pub generator: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalSpec {
    Bernoulli,
    /// Per-slot counts from a `slot,node,count` CSV.
    BoundedBurst { file: PathBuf, burst: f64 },
}

fn default_lipschitz() -> Option<f64> {
    Some(DEFAULT_LIPSCHITZ_THRESHOLD)
}

fn default_alpha() -> f64 {
    GParams::default().alpha()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(default = "ExperimentConfig::default_arrivals")]
    pub arrivals: ArrivalSpec,
    #[serde(default = "ExperimentConfig::default_scheduler")]
    pub scheduler: SchedulerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedulers: Option<Vec<SchedulerKind>>,
    #[serde(default = "ExperimentConfig::default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_lipschitz")]
    pub lipschitz_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_queues: Option<Vec<u64>>,
    /// Fixed weights for chain analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "ExperimentConfig::default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "ExperimentConfig::default_runs")]
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_slot_cap: Option<u64>,
}

impl ExperimentConfig {
    fn default_arrivals() -> ArrivalSpec {
        ArrivalSpec::Bernoulli
    }
    fn default_scheduler() -> SchedulerKind {
        SchedulerKind::QueueMac
    }
    fn default_horizon() -> u64 {
        DEFAULT_HORIZON
    }
    fn default_epsilon() -> f64 {
        DEFAULT_EPSILON
    }
    fn default_runs() -> usize {
        DEFAULT_RUNS
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Parses `path` and rewrites relative file references against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        if let GraphSpec::File { file } = &mut self.graph {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        if let ArrivalSpec::BoundedBurst { file, .. } = &mut self.arrivals {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
    }

    pub fn params(&self) -> Result<GParams> {
        GParams::new(self.alpha)
    }

    pub fn build_graph(&self) -> Result<InterferenceGraph> {
        match &self.graph {
            GraphSpec::File { file } => InterferenceGraph::load(file).map_err(|e| match e {
                Error::Io(io) => Error::InvalidGraph(format!("cannot read {}: {io}", file.display())),
                other => other,
            }),
            GraphSpec::Inline(g) => InterferenceGraph::try_from(g.clone()),
            GraphSpec::Generator(spec) => {
                let n = spec.n;
                match spec.generator.as_str() {
                    "empty" => InterferenceGraph::empty(n),
                    "path" => InterferenceGraph::path(n),
                    "cycle" => InterferenceGraph::cycle(n),
                    "star" => InterferenceGraph::star(n),
                    "complete" => InterferenceGraph::complete(n),
                    "erdos_renyi" => {
                        let p = spec
                            .p
                            .ok_or_else(|| Error::InvalidGraph("erdos_renyi needs an edge probability p".into()))?;
                        InterferenceGraph::erdos_renyi(n, p, spec.seed.unwrap_or(0))
                    }
                    other => Err(Error::InvalidGraph(format!("unknown generator {other:?}"))),
                }
            }
        }
    }

    /// Rates as given, or all zero when absent.
    pub fn build_rates(&self, graph: &InterferenceGraph) -> Result<ArrivalRates> {
        let rates = ArrivalRates::new(self.rates.clone().unwrap_or_else(|| vec![0.0; graph.node_count()]))?;
        rates.check_len(graph)?;
        Ok(rates)
    }

    /// Simulator configuration for one scheduler.
    pub fn sim_config(&self, graph: &InterferenceGraph, scheduler: SchedulerKind) -> Result<SimConfig> {
        let rates = self.build_rates(graph)?;
        let arrivals = match &self.arrivals {
            ArrivalSpec::Bernoulli => ArrivalModel::Bernoulli,
            ArrivalSpec::BoundedBurst { file, burst } => {
                ArrivalModel::BoundedBurst(BurstTrace::load(file, graph.node_count(), *burst)?)
            }
        };
        let cfg = SimConfig {
            graph: graph.clone(),
            rates,
            arrivals,
            horizon: self.horizon,
            seed: self.seed,
            scheduler,
            record_every: self.record_every.unwrap_or_else(|| default_stride(self.horizon)),
            params: self.params()?,
            lipschitz_threshold: self.lipschitz_threshold,
            frozen_weights: self.frozen_weights.clone(),
            initial_queues: self.initial_queues.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Schedulers for a comparison: `schedulers` if given, else the single `scheduler`.
    pub fn scheduler_list(&self) -> Vec<SchedulerKind> {
        self.schedulers.clone().unwrap_or_else(|| vec![self.scheduler])
    }

    /// The config with the graph inlined, for replay records.
    pub fn resolved(&self, graph: &InterferenceGraph) -> Self {
        let mut out = self.clone();
        out.graph = GraphSpec::Inline(graph.to_file());
        out.record_every = Some(self.record_every.unwrap_or_else(|| default_stride(self.horizon)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_graph_form() {
        let inline = ExperimentConfig::from_json_str(r#"{"graph": {"n": 3, "edges": [[0,1],[1,2]]}}"#).unwrap();
        assert_eq!(inline.build_graph().unwrap(), InterferenceGraph::path(3).unwrap());
        let generated = ExperimentConfig::from_json_str(r#"{"graph": {"generator": "path", "n": 3}}"#).unwrap();
        assert_eq!(generated.build_graph().unwrap(), InterferenceGraph::path(3).unwrap());
        let file = ExperimentConfig::from_json_str(r#"{"graph": {"file": "/nonexistent/g.json"}}"#).unwrap();
        assert!(matches!(file.build_graph(), Err(Error::InvalidGraph(_))));
        let bad = ExperimentConfig::from_json_str(r#"{"graph": {"generator": "wheel", "n": 3}}"#).unwrap();
        assert!(bad.build_graph().is_err());
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"graph": {"generator": "path", "n": 2}, "rates": [0.1, 0.2], "scheduler": "aloha(0.3)", "seed": 9}"#,
        )
        .unwrap();
        assert_eq!(cfg.horizon, DEFAULT_HORIZON);
        assert_eq!(cfg.lipschitz_threshold, Some(100.0));
        let g = cfg.build_graph().unwrap();
        let sim = cfg.sim_config(&g, cfg.scheduler).unwrap();
        assert_eq!(sim.seed, 9);
        assert_eq!(sim.scheduler, SchedulerKind::Aloha { p: 0.3 });
        assert_eq!(sim.record_every, 10);
        assert!(ExperimentConfig::from_json_str(r#"{"graph": {"generator": "path", "n": 2}, "horizn": 5}"#).is_err());
    }

    #[test]
    fn rejects_rate_length_mismatch() {
        let cfg = ExperimentConfig::from_json_str(r#"{"graph": {"generator": "path", "n": 2}, "rates": [0.1]}"#).unwrap();
        let g = cfg.build_graph().unwrap();
        assert!(cfg.sim_config(&g, cfg.scheduler).is_err());
    }

    #[test]
    fn resolved_round_trips() {
        let cfg = ExperimentConfig::from_json_str(r#"{"graph": {"generator": "cycle", "n": 4}, "schedulers": ["queue_mac", "max_weight"]}"#)
            .unwrap();
        let g = cfg.build_graph().unwrap();
        let text = serde_json::to_string(&cfg.resolved(&g)).unwrap();
        let back = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(back.build_graph().unwrap(), g);
        assert_eq!(back.scheduler_list().len(), 2);
    }
}

//! Scenario configuration: one JSON document per simulated run.
//!
//! Unknown keys are rejected at every level. Omitted sections take the
//! defaults documented on each type, and [`ScenarioConfig::resolved`] writes
//! them out explicitly so a report can be re-run from its own echo.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::routing::{RoutingStrategy, Selector, StrategyKind};
use crate::simulator::NetworkModel;
use crate::skew_models::{ModelParams, SkewModelKind};
use crate::state_machine::RedistributionPolicy;
use crate::types::{BatchLimits, InstanceId};
use crate::workload::WorkloadSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    #[serde(default = "default_strategy_kind")]
    pub kind: StrategyKind,
    #[serde(default)]
    pub selector: Selector,
}

fn default_strategy_kind() -> StrategyKind {
    StrategyKind::Adaptive
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            kind: StrategyKind::Adaptive,
            selector: Selector::RoundRobin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_model_choice")]
    pub choice: SkewModelKind,
    #[serde(default)]
    pub params: ModelParams,
}

fn default_model_choice() -> SkewModelKind {
    SkewModelKind::IdleTime
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            choice: SkewModelKind::IdleTime,
            params: ModelParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub nodes: u32,
    pub interpreters_per_node: u32,
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub policy: RedistributionPolicy,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub network: NetworkModel,
    #[serde(default)]
    pub batching: BatchLimits,
    /// Per-instance processing slowdown in canonical order; all 1 when omitted.
    #[serde(default)]
    pub load_factors: Option<Vec<Fraction>>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(nodes: u32, interpreters_per_node: u32, workload: WorkloadSpec) -> Self {
        ScenarioConfig {
            nodes,
            interpreters_per_node,
            workload,
            policy: RedistributionPolicy::default(),
            strategy: StrategyConfig::default(),
            model: ModelConfig::default(),
            network: NetworkModel::default(),
            batching: BatchLimits::default(),
            load_factors: None,
            seed: 0,
        }
    }

    pub fn instance_count(&self) -> usize {
        self.nodes as usize * self.interpreters_per_node as usize
    }

    pub fn instances(&self) -> Vec<InstanceId> {
        InstanceId::cluster(self.nodes, self.interpreters_per_node)
    }

    pub fn routing_strategy(&self) -> RoutingStrategy {
        RoutingStrategy {
            kind: self.strategy.kind,
            selector: self.strategy.selector,
            self_skip: self.policy.self_skip,
        }
    }

    pub fn load_factor_list(&self) -> Vec<Fraction> {
        self.load_factors
            .clone()
            .unwrap_or_else(|| vec![Fraction::one(); self.instance_count()])
    }

    /// Copy with every defaulted value written out.
    pub fn resolved(&self) -> ScenarioConfig {
        ScenarioConfig {
            load_factors: Some(self.load_factor_list()),
            ..self.clone()
        }
    }

    /// Every range violation in the scenario.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.nodes < 1 {
            out.push("nodes must be >= 1".to_string());
        }
        if self.interpreters_per_node < 1 {
            out.push("interpreters_per_node must be >= 1".to_string());
        }
        out.extend(
            self.workload
                .violations()
                .into_iter()
                .map(|v| format!("workload.{v}")),
        );
        out.extend(self.model.params.violations());
        if self.network.per_byte_cost.is_negative() {
            out.push("network.per_byte_cost must be >= 0".to_string());
        }
        if self.batching.max_batch_rows < 1 {
            out.push("batching.max_batch_rows must be >= 1".to_string());
        }
        if self.batching.max_batch_bytes < 1 {
            out.push("batching.max_batch_bytes must be >= 1".to_string());
        }
        if let Some(factors) = &self.load_factors {
            if factors.len() != self.instance_count() {
                out.push(format!(
                    "load_factors has {} entries but the cluster has {} instances",
                    factors.len(),
                    self.instance_count()
                ));
            }
            if factors.iter().any(|f| !f.is_positive()) {
                out.push("load_factors entries must be > 0".to_string());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<ScenarioConfig> {
        let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config.resolved())
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_json_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_machine::PolicyKind;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        ScenarioConfig::from_json_str(text, Path::new("inline.json"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(r#"{"nodes": 1, "interpreters_per_node": 4, "workload": {"total_rows": 4, "cost": {"kind": "constant", "cost": 60000}}}"#)
            .unwrap();
        assert_eq!(c.policy.kind, PolicyKind::DistributeLate);
        assert!(!c.policy.self_skip);
        assert!(c.policy.guard_enabled);
        assert_eq!(c.model.choice, SkewModelKind::IdleTime);
        assert_eq!(c.model.params.strikes_n, 3);
        assert_eq!(c.strategy.kind, StrategyKind::Adaptive);
        assert_eq!(c.load_factors.as_ref().map(Vec::len), Some(4));
        assert_eq!(c.batching.max_batch_rows, 1024);
    }

    #[test]
    fn out_of_range_theta_is_reported() {
        let err = parse(
            r#"{"nodes": 1, "interpreters_per_node": 4,
            "workload": {"total_rows": 4, "cost": {"kind": "constant", "cost": 1}},
            "model": {"params": {"theta_rows": 1.5}}}"#,
        )
        .unwrap_err();
        match err {
            Error::Validation(v) => assert_eq!(v, vec!["theta_rows must be in (0,1]".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn all_violations_reported_together() {
        let err = parse(r#"{"nodes": 0, "interpreters_per_node": 0,
            "workload": {"total_rows": 4, "cost": {"kind": "constant", "cost": 1}, "placement": {"kind": "zipf", "s": -1}},
            "model": {"params": {"theta_rows": 0, "strikes_n": 0}}}"#)
        .unwrap_err();
        match err {
            Error::Validation(v) => assert_eq!(v.len(), 5, "{v:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse(
            r#"{"nodes": 1, "interpreters_per_node": 4, "polcy": {},
            "workload": {"total_rows": 4, "cost": {"kind": "constant", "cost": 1}}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("polcy"), "{err}");
        let nested = parse(
            r#"{"nodes": 1, "interpreters_per_node": 4,
            "workload": {"total_rows": 4, "cost": {"kind": "constant", "cost": 1, "extra": 2}}}"#,
        )
        .unwrap_err();
        assert!(nested.to_string().contains("extra"), "{nested}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse("{\n  \"nodes\": 1,\n  oops\n}").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = parse(r#"{"nodes": 2, "interpreters_per_node": 2,
            "workload": {"total_rows": 40, "cost": {"kind": "bimodal", "low": 1, "high": 9, "p_high": 0.25}},
            "network": {"per_row_overhead": 3, "per_byte_cost": 0.001}}"#)
        .unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(parse(&text).unwrap(), c);
    }
}

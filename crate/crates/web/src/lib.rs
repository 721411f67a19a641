//! Browser bindings for the simulator. Every export takes and returns JSON
//! text; the `*_json` functions hold the logic and run natively in tests.

use std::path::Path;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use dyskew::config::ScenarioConfig;
use dyskew::report::{self, Comparison};
use dyskew::simulator::run_traced;
use dyskew::Error;

/// Service intervals beyond this many are dropped from the timeline.
pub const MAX_TRACE: usize = 20_000;

const PRESETS: [(&str, &str); 4] = [
    (
        "motivating",
        include_str!("../../core/scenarios/motivating.json"),
    ),
    (
        "heavy_rows",
        include_str!("../../core/scenarios/heavy_rows.json"),
    ),
    (
        "zipf_sweep",
        include_str!("../../core/scenarios/zipf_sweep.json"),
    ),
    (
        "udf_mixed",
        include_str!("../../core/scenarios/udf_mixed.json"),
    ),
];

fn describe(e: Error) -> String {
    match e {
        Error::Validation(items) => format!("invalid scenario:\n  - {}", items.join("\n  - ")),
        other => other.to_string(),
    }
}

fn parse(config: &str) -> Result<ScenarioConfig, String> {
    ScenarioConfig::from_json_str(config, Path::new("scenario")).map_err(describe)
}

pub fn preset_json(name: &str) -> Result<String, String> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| text.to_string())
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            format!("unknown preset {name:?}; try {}", names.join(", "))
        })
}

pub fn simulate_json(config: &str) -> Result<String, String> {
    let (report, mut trace) = run_traced(&parse(config)?).map_err(describe)?;
    let truncated = trace.len() > MAX_TRACE;
    trace.truncate(MAX_TRACE);
    Ok(json!({
        "report": report,
        "utilization": report.mean_utilization(),
        "trace": trace,
        "trace_truncated": truncated,
    })
    .to_string())
}

fn summary(cmp: &Comparison) -> Value {
    let entries: Vec<Value> = cmp
        .entries
        .iter()
        .map(|e| {
            json!({
                "nodes": e.nodes,
                "policy": e.policy,
                "makespan": e.makespan,
                "rows_moved": e.rows_moved,
                "bytes_moved": e.bytes_moved,
                "utilization": e.utilization,
                "improvement_pct": e.improvement_pct,
                "final_states": e.report.final_states,
            })
        })
        .collect();
    json!({ "baseline": cmp.baseline, "entries": entries })
}

pub fn compare_json(config: &str, policies: &str) -> Result<String, String> {
    let config = parse(config)?;
    let list = report::parse_policy_list(policies).map_err(describe)?;
    let cmp = report::compare(&config, &list).map_err(describe)?;
    Ok(summary(&cmp).to_string())
}

pub fn sweep_json(config: &str, nodes: &str, policies: &str) -> Result<String, String> {
    let config = parse(config)?;
    let nodes = report::parse_node_list(nodes).map_err(describe)?;
    let list = report::parse_policy_list(policies).map_err(describe)?;
    let cmp = report::sweep(&config, &nodes, &list).map_err(describe)?;
    Ok(summary(&cmp).to_string())
}

fn to_js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn preset(name: &str) -> Result<String, JsError> {
    to_js(preset_json(name))
}

#[wasm_bindgen]
pub fn simulate(config: &str) -> Result<String, JsError> {
    to_js(simulate_json(config))
}

#[wasm_bindgen]
pub fn compare(config: &str, policies: &str) -> Result<String, JsError> {
    to_js(compare_json(config, policies))
}

#[wasm_bindgen]
pub fn sweep(config: &str, nodes: &str, policies: &str) -> Result<String, JsError> {
    to_js(sweep_json(config, nodes, policies))
}

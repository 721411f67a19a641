//! Policy comparisons, node-count sweeps, and report rendering.
//!
//! JSON is the authoritative format and embeds every full [`RunReport`].
//! CSV gives one flat row per instance (run) or per (node count, policy)
//! pair (compare, sweep); each row carries the resolved scenario as a JSON
//! string in its `config` column so it can be re-run on its own.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::routing::StrategyKind;
use crate::simulator::{run, RunReport};
use crate::state_machine::{LinkState, PolicyKind};
use crate::types::{InstanceId, MetricsRecord, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Usage(format!(
                "unknown format {other:?}; expected json or csv"
            ))),
        }
    }
}

/// Names accepted by `--policies`.
pub const POLICY_NAMES: [&str; 9] = [
    "never",
    "late",
    "early",
    "eager",
    "adaptive",
    "static_rr",
    "early_self_skip",
    "early_no_guard",
    "late_self_skip",
];

/// `base` rerouted under the named policy. The policy kind and routing
/// strategy are replaced; other policy flags carry over unless the name
/// sets them.
pub fn apply_policy(base: &ScenarioConfig, name: &str) -> Result<ScenarioConfig> {
    let mut c = base.clone();
    c.strategy.kind = StrategyKind::Adaptive;
    match name {
        "never" => c.policy.kind = PolicyKind::NeverDistribute,
        "late" | "adaptive" => c.policy.kind = PolicyKind::DistributeLate,
        "early" | "eager" => c.policy.kind = PolicyKind::DistributeEarly,
        "static_rr" => {
            c.policy.kind = PolicyKind::NeverDistribute;
            c.strategy.kind = StrategyKind::StaticRoundRobin;
        }
        "early_self_skip" => {
            c.policy.kind = PolicyKind::DistributeEarly;
            c.policy.self_skip = true;
        }
        "early_no_guard" => {
            c.policy.kind = PolicyKind::DistributeEarly;
            c.policy.guard_enabled = false;
        }
        "late_self_skip" => {
            c.policy.kind = PolicyKind::DistributeLate;
            c.policy.self_skip = true;
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown policy {other:?}; valid policies: {}",
                POLICY_NAMES.join(", ")
            )))
        }
    }
    Ok(c)
}

/// Splits a comma list of policy names, checking each one.
pub fn parse_policy_list(text: &str) -> Result<Vec<String>> {
    let names: Vec<String> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    for name in &names {
        if !POLICY_NAMES.contains(&name.as_str()) {
            return Err(Error::Usage(format!(
                "unknown policy {name:?}; valid policies: {}",
                POLICY_NAMES.join(", ")
            )));
        }
    }
    Ok(names)
}

pub fn parse_node_list(text: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.parse::<u32>() {
            Ok(n) if n >= 1 => out.push(n),
            _ => {
                return Err(Error::Usage(format!(
                    "node count {part:?} must be an integer >= 1"
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Usage("--nodes needs at least one node count".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub nodes: u32,
    pub policy: String,
    pub makespan: SimTime,
    pub rows_moved: u64,
    pub bytes_moved: u64,
    pub utilization: f64,
    /// `(baseline - this) / baseline * 100`, against the first policy at
    /// the same node count.
    pub improvement_pct: f64,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub entries: Vec<ComparisonEntry>,
}

impl Comparison {
    pub fn entry(&self, nodes: u32, policy: &str) -> Option<&ComparisonEntry> {
        self.entries
            .iter()
            .find(|e| e.nodes == nodes && e.policy == policy)
    }
}

pub fn improvement_pct(baseline: SimTime, other: SimTime) -> f64 {
    if baseline == SimTime::ZERO {
        return 0.0;
    }
    let base = Fraction::from_integer(baseline.as_ms());
    let diff = base.clone() - Fraction::from_integer(other.as_ms());
    (diff / base * Fraction::from(100u64)).to_f64()
}

/// Runs `config` under each policy. The first policy is the baseline.
pub fn compare(config: &ScenarioConfig, policies: &[String]) -> Result<Comparison> {
    sweep(config, &[config.nodes], policies)
}

/// Runs every (node count, policy) pair; entries come out in node-count
/// order, then policy order, whatever order the runs finish in.
pub fn sweep(config: &ScenarioConfig, nodes: &[u32], policies: &[String]) -> Result<Comparison> {
    if policies.len() < 2 {
        return Err(Error::Usage(format!(
            "comparing needs at least two policies, got {}",
            policies.len()
        )));
    }
    if nodes.is_empty() || nodes.contains(&0) {
        return Err(Error::Usage(
            "node counts must be non-empty and >= 1".into(),
        ));
    }
    let mut jobs = Vec::new();
    for &n in nodes {
        let sized = with_nodes(config, n)?;
        for p in policies {
            jobs.push((n, p.clone(), apply_policy(&sized, p)?));
        }
    }
    #[cfg(feature = "parallel")]
    let reports: Vec<Result<RunReport>> = jobs.par_iter().map(|(_, _, c)| run(c)).collect();
    #[cfg(not(feature = "parallel"))]
    let reports: Vec<Result<RunReport>> = jobs.iter().map(|(_, _, c)| run(c)).collect();
    let mut entries = Vec::with_capacity(jobs.len());
    for ((n, policy, _), report) in jobs.into_iter().zip(reports) {
        let report = report?;
        entries.push(ComparisonEntry {
            nodes: n,
            policy,
            makespan: report.makespan,
            rows_moved: report.rows_redistributed_total,
            bytes_moved: report.bytes_redistributed_total,
            utilization: report.mean_utilization(),
            improvement_pct: 0.0,
            report,
        });
    }
    for chunk in entries.chunks_mut(policies.len()) {
        let base = chunk[0].makespan;
        for e in chunk.iter_mut() {
            e.improvement_pct = improvement_pct(base, e.makespan);
        }
    }
    Ok(Comparison {
        baseline: policies[0].clone(),
        entries,
    })
}

fn with_nodes(config: &ScenarioConfig, nodes: u32) -> Result<ScenarioConfig> {
    let mut c = config.clone();
    c.nodes = nodes;
    let factors = config.load_factor_list();
    c.load_factors = match factors.first() {
        None => None,
        Some(first) if factors.iter().all(|f| f == first) => {
            Some(vec![first.clone(); c.instance_count()])
        }
        Some(_) if nodes == config.nodes => Some(factors),
        Some(_) => {
            return Err(Error::Usage(
                "a sweep needs uniform load_factors; per-instance factors cannot be resized".into(),
            ))
        }
    };
    c.validate()?;
    Ok(c.resolved())
}

pub fn report_json(report: &RunReport) -> String {
    let mut s = report.to_json();
    s.push('\n');
    s
}

pub fn comparison_json(cmp: &Comparison) -> String {
    let mut s = serde_json::to_string_pretty(cmp).expect("comparison serialization cannot fail");
    s.push('\n');
    s
}

pub fn parse_report_json(text: &str) -> Result<RunReport> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: "<report>".into(),
        message: e.to_string(),
    })
}

pub fn parse_comparison_json(text: &str) -> Result<Comparison> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: "<comparison>".into(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCsvRow {
    pub node: u32,
    pub interpreter: u32,
    pub rows_processed: u64,
    pub sync_time_total: u64,
    pub idle_time_total: u64,
    pub rows_routed: u64,
    pub rows_sent_remote: u64,
    pub bytes_sent_remote: u64,
    pub final_state: LinkState,
    pub makespan: u64,
    pub seed: u64,
    pub config: String,
}

impl InstanceCsvRow {
    pub fn metrics(&self) -> MetricsRecord {
        MetricsRecord {
            instance: InstanceId::new(self.node, self.interpreter),
            rows_processed: self.rows_processed,
            sync_time_total: SimTime::from_ms(self.sync_time_total),
            idle_time_total: SimTime::from_ms(self.idle_time_total),
            rows_routed: self.rows_routed,
            rows_sent_remote: self.rows_sent_remote,
            bytes_sent_remote: self.bytes_sent_remote,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCsvRow {
    pub nodes: u32,
    pub policy: String,
    pub makespan: u64,
    pub rows_moved: u64,
    pub bytes_moved: u64,
    pub utilization: f64,
    pub improvement_pct: f64,
    pub seed: u64,
    pub config: String,
}

fn compact(config: &ScenarioConfig) -> String {
    serde_json::to_string(config).expect("config serialization cannot fail")
}

fn write_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("csv rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn read_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Parse {
            path: "<csv>".into(),
            message: e.to_string(),
        })
}

pub fn instance_rows(report: &RunReport) -> Vec<InstanceCsvRow> {
    let config = compact(&report.config);
    report
        .instances
        .iter()
        .zip(&report.final_states)
        .map(|(m, &state)| InstanceCsvRow {
            node: m.instance.node,
            interpreter: m.instance.interpreter,
            rows_processed: m.rows_processed,
            sync_time_total: m.sync_time_total.as_ms(),
            idle_time_total: m.idle_time_total.as_ms(),
            rows_routed: m.rows_routed,
            rows_sent_remote: m.rows_sent_remote,
            bytes_sent_remote: m.bytes_sent_remote,
            final_state: state,
            makespan: report.makespan.as_ms(),
            seed: report.seed,
            config: config.clone(),
        })
        .collect()
}

pub fn comparison_rows(cmp: &Comparison) -> Vec<ComparisonCsvRow> {
    cmp.entries
        .iter()
        .map(|e| ComparisonCsvRow {
            nodes: e.nodes,
            policy: e.policy.clone(),
            makespan: e.makespan.as_ms(),
            rows_moved: e.rows_moved,
            bytes_moved: e.bytes_moved,
            utilization: e.utilization,
            improvement_pct: e.improvement_pct,
            seed: e.report.seed,
            config: compact(&e.report.config),
        })
        .collect()
}

pub fn report_csv(report: &RunReport) -> String {
    write_csv(&instance_rows(report))
}

pub fn comparison_csv(cmp: &Comparison) -> String {
    write_csv(&comparison_rows(cmp))
}

pub fn parse_report_csv(text: &str) -> Result<Vec<InstanceCsvRow>> {
    read_csv(text)
}

pub fn parse_comparison_csv(text: &str) -> Result<Vec<ComparisonCsvRow>> {
    read_csv(text)
}

fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &mut header.iter().copied());
    for row in rows {
        line(&mut out, &mut row.iter().map(String::as_str));
    }
    out
}

pub fn report_table(report: &RunReport) -> String {
    let rows: Vec<Vec<String>> = report
        .instances
        .iter()
        .zip(&report.final_states)
        .map(|(m, s)| {
            vec![
                m.instance.to_string(),
                m.rows_processed.to_string(),
                m.sync_time_total.as_ms().to_string(),
                m.idle_time_total.as_ms().to_string(),
                m.rows_sent_remote.to_string(),
                m.bytes_sent_remote.to_string(),
                s.to_string(),
            ]
        })
        .collect();
    let mut out = format!(
        "makespan {} ms, {} rows, {} moved ({} bytes)\n",
        report.makespan.as_ms(),
        report.total_rows,
        report.rows_redistributed_total,
        report.bytes_redistributed_total
    );
    out.push_str(&aligned(
        &[
            "instance",
            "rows",
            "sync_ms",
            "idle_ms",
            "sent",
            "bytes_sent",
            "state",
        ],
        &rows,
    ));
    out
}

pub fn comparison_table(cmp: &Comparison) -> String {
    let rows: Vec<Vec<String>> = cmp
        .entries
        .iter()
        .map(|e| {
            vec![
                e.nodes.to_string(),
                e.policy.clone(),
                e.makespan.as_ms().to_string(),
                e.bytes_moved.to_string(),
                format!("{:.3}", e.utilization),
                format!("{:+.2}%", e.improvement_pct),
            ]
        })
        .collect();
    let mut out = format!("baseline: {}\n", cmp.baseline);
    out.push_str(&aligned(
        &[
            "nodes",
            "policy",
            "makespan_ms",
            "bytes_moved",
            "utilization",
            "improvement",
        ],
        &rows,
    ));
    out
}

/// Writes through a temporary file in the target directory, so a failed
/// write never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

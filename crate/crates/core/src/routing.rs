//! Destination selection for rows leaving a link instance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state_machine::{is_distributing, LinkState};
use crate::types::{InstanceId, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Every row stays on its producer's instance.
    LocalOnly,
    /// Legacy behaviour: round-robin over every instance, ignoring link state.
    StaticRoundRobin,
    /// Route according to the link state machine.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    #[default]
    RoundRobin,
    LeastLoaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoutingStrategy {
    pub kind: StrategyKind,
    pub selector: Selector,
    pub self_skip: bool,
}

impl RoutingStrategy {
    pub fn adaptive(selector: Selector, self_skip: bool) -> Self {
        RoutingStrategy {
            kind: StrategyKind::Adaptive,
            selector,
            self_skip,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingCursor {
    pub next_index: usize,
}

impl RoutingCursor {
    pub fn at(next_index: usize) -> Self {
        RoutingCursor { next_index }
    }
}

/// Destinations a distributing instance may pick from, in canonical order.
pub fn candidate_set(
    me: InstanceId,
    all: &[InstanceId],
    self_skip: bool,
) -> Result<Vec<InstanceId>> {
    if !all.contains(&me) {
        return Err(Error::contract(format!(
            "{me} is not one of the link instances"
        )));
    }
    let mut ordered = all.to_vec();
    ordered.sort();
    ordered.dedup();
    if self_skip && ordered.len() > 1 {
        ordered.retain(|&id| id != me);
    }
    Ok(ordered)
}

pub fn route_round_robin(
    cursor: RoutingCursor,
    candidates: &[InstanceId],
) -> Result<(InstanceId, RoutingCursor)> {
    if candidates.is_empty() {
        return Err(Error::contract("round-robin over an empty candidate set"));
    }
    let index = cursor.next_index % candidates.len();
    Ok((
        candidates[index],
        RoutingCursor::at((index + 1) % candidates.len()),
    ))
}

/// The candidate with the least pending work; ties go to the earliest in
/// canonical order.
pub fn route_least_loaded(
    candidates: &[InstanceId],
    queue_cost: &BTreeMap<InstanceId, SimTime>,
) -> Result<InstanceId> {
    let mut best: Option<(SimTime, InstanceId)> = None;
    for &id in candidates {
        let cost = *queue_cost
            .get(&id)
            .ok_or_else(|| Error::contract(format!("no queue cost for {id}")))?;
        if best.is_none_or(|(c, b)| (cost, id) < (c, b)) {
            best = Some((cost, id));
        }
    }
    best.map(|(_, id)| id)
        .ok_or_else(|| Error::contract("least-loaded over an empty candidate set"))
}

pub struct RouteContext<'a> {
    pub me: InstanceId,
    pub all: &'a [InstanceId],
    pub cursor: RoutingCursor,
    pub queue_cost: &'a BTreeMap<InstanceId, SimTime>,
}

pub fn route(
    state: LinkState,
    strategy: &RoutingStrategy,
    ctx: &RouteContext<'_>,
) -> Result<(InstanceId, RoutingCursor)> {
    match strategy.kind {
        StrategyKind::LocalOnly => Ok((ctx.me, ctx.cursor)),
        StrategyKind::StaticRoundRobin => {
            let all = candidate_set(ctx.me, ctx.all, false)?;
            route_round_robin(ctx.cursor, &all)
        }
        StrategyKind::Adaptive if !is_distributing(state) => Ok((ctx.me, ctx.cursor)),
        StrategyKind::Adaptive => {
            let candidates = candidate_set(ctx.me, ctx.all, strategy.self_skip)?;
            match strategy.selector {
                Selector::RoundRobin => route_round_robin(ctx.cursor, &candidates),
                Selector::LeastLoaded => {
                    Ok((route_least_loaded(&candidates, ctx.queue_cost)?, ctx.cursor))
                }
            }
        }
    }
}

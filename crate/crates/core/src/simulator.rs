//! Deterministic discrete-event simulation of one producer -> consumer link
//! stage.
//!
//! Every instance runs a producer (its share of the workload, cut into
//! batches) and a consumer worker that serves rows FIFO, one at a time.
//! Producers emit a batch whenever their local worker has no queued rows,
//! so batch boundaries follow local consumption. At each boundary the
//! link's skew model is evaluated, the state machine steps, and every row
//! of the new batch is routed.
//!
//! A remote row occupies its sender's outbound channel for
//! [`remote_delay`]. Sends from one instance go out back to back, and the
//! producer never waits for them. Local delivery is free.
//!
//! Events are ordered by `(time, sequence)`, with the sequence number
//! assigned at creation. Two runs of one scenario give identical reports.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::routing::{route, RouteContext, RoutingCursor, RoutingStrategy, StrategyKind};
use crate::skew_models::{
    evaluate_model, row_size_guard_triggered, ModelParams, SkewModelKind, StrikeCounter,
};
use crate::state_machine::{
    initial_state, step, LinkState, PolicyKind, RedistributionPolicy, StepSignals,
};
use crate::types::{
    batch_density, build_batches, Batch, BatchCut, InstanceId, InstanceObservation, MetricsRecord,
    Row, SiblingSnapshot, SimTime, SyncSample,
};
use crate::workload::generate;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkModel {
    pub per_row_overhead: SimTime,
    /// Virtual milliseconds per payload byte.
    pub per_byte_cost: Fraction,
}

impl Default for NetworkModel {
    fn default() -> Self {
        NetworkModel {
            per_row_overhead: SimTime::ZERO,
            per_byte_cost: Fraction::zero(),
        }
    }
}

/// `per_row_overhead + round_half_up(payload_bytes * per_byte_cost)`.
pub fn remote_delay(payload_bytes: u64, model: &NetworkModel) -> SimTime {
    model.per_row_overhead
        + SimTime::from_ms((&model.per_byte_cost * payload_bytes).round_half_up())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub at: SimTime,
    pub instance: InstanceId,
    pub from: LinkState,
    pub to: LinkState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub makespan: SimTime,
    pub total_rows: u64,
    pub rows_redistributed_total: u64,
    pub bytes_redistributed_total: u64,
    pub instances: Vec<MetricsRecord>,
    /// Final link state per instance, canonical order.
    pub final_states: Vec<LinkState>,
    pub transition_log: Vec<TransitionRecord>,
    pub config: ScenarioConfig,
    pub seed: u64,
}

impl RunReport {
    /// Canonical serialized form. Field order is fixed by the struct layout.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn mean_utilization(&self) -> f64 {
        if self.makespan == SimTime::ZERO || self.instances.is_empty() {
            return 0.0;
        }
        let busy: u64 = self
            .instances
            .iter()
            .map(|m| m.sync_time_total.as_ms())
            .sum();
        busy as f64 / (self.makespan.as_ms() as f64 * self.instances.len() as f64)
    }
}

/// One row's stay on a worker, for timeline plots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceInterval {
    pub worker: usize,
    pub origin: usize,
    pub row: u64,
    pub start: SimTime,
    pub end: SimTime,
}

/// Everything [`evaluate_link`] decided for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkEvaluation {
    pub counter: StrikeCounter,
    pub state: LinkState,
    pub raw_verdict: bool,
    pub guard_triggered: bool,
}

/// Skew model -> N-strikes -> row-size guard -> state machine, for one link
/// instance at one tick. `density` is `None` when the batch at hand cannot
/// speak for row size (it was cut short by the end of input).
#[allow(clippy::too_many_arguments)]
pub fn evaluate_link(
    snapshot: &SiblingSnapshot,
    model: SkewModelKind,
    params: &ModelParams,
    counter: StrikeCounter,
    state: LinkState,
    policy: &RedistributionPolicy,
    density: Option<usize>,
    drain_complete: bool,
) -> LinkEvaluation {
    let deciding = state.is_deciding();
    let raw_verdict = deciding && evaluate_model(model, snapshot, params);
    let counter = if deciding {
        counter.update(raw_verdict, params.strikes_n)
    } else {
        counter
    };
    let skewed_now = raw_verdict || counter.confirmed;
    let guard_triggered = deciding
        && policy.guard_enabled
        && density.is_some_and(|d| row_size_guard_triggered(d, skewed_now, params));
    let signals = StepSignals {
        skew_confirmed: counter.confirmed,
        guard_triggered,
        drain_complete,
    };
    LinkEvaluation {
        counter,
        state: step(state, policy, signals),
        raw_verdict,
        guard_triggered,
    }
}

#[derive(Debug, Clone)]
struct Queued {
    row: Row,
    origin: usize,
    effective: SimTime,
}

#[derive(Debug)]
enum EventKind {
    RowArrival {
        dest: usize,
        item: Queued,
    },
    RowComplete {
        worker: usize,
    },
    BatchBoundary {
        link: usize,
    },
    /// Delivers the drain-complete signal to a link whose producer is
    /// already exhausted.
    ModelTick {
        link: usize,
    },
}

#[derive(Debug)]
struct Event {
    time: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

struct Link {
    id: InstanceId,
    batches: VecDeque<Batch>,
    state: LinkState,
    strikes: StrikeCounter,
    cursor: RoutingCursor,
    rows_routed: u64,
    rows_sent_remote: u64,
    bytes_sent_remote: u64,
    channel_free_at: SimTime,
    boundary_pending: bool,
    tick_pending: bool,
}

struct Worker {
    load_factor: Fraction,
    unit_load: bool,
    queue: VecDeque<Queued>,
    in_service: Option<(Queued, SimTime)>,
    busy_total: SimTime,
    rows_processed: u64,
    last_arrival: SimTime,
    last_completion: SimTime,
    samples: VecDeque<SyncSample>,
}

impl Worker {
    fn effective(&self, cost: SimTime) -> SimTime {
        if self.unit_load {
            cost
        } else {
            cost.scaled(&self.load_factor)
        }
    }

    fn cumulative_sync(&self, now: SimTime) -> SimTime {
        match &self.in_service {
            Some((_, started)) => self.busy_total + now.saturating_sub(*started),
            None => self.busy_total,
        }
    }

    /// Time of the last row received, or `now` while a row is in service.
    fn last_activity(&self, now: SimTime) -> SimTime {
        if self.in_service.is_some() {
            now
        } else {
            self.last_arrival
        }
    }
}

struct Engine<'a> {
    config: &'a ScenarioConfig,
    ids: Vec<InstanceId>,
    strategy: RoutingStrategy,
    links: Vec<Link>,
    workers: Vec<Worker>,
    pending: BTreeMap<InstanceId, SimTime>,
    events: BinaryHeap<Event>,
    seq: u64,
    now: SimTime,
    log: Vec<TransitionRecord>,
    completed: Vec<bool>,
    trace: Option<Vec<ServiceInterval>>,
    total_rows: u64,
}

impl<'a> Engine<'a> {
    fn new(config: &'a ScenarioConfig, trace: bool) -> Result<Self> {
        let ids = config.instances();
        let per_instance = generate(&config.workload, ids.len(), config.seed)?;
        let total_rows: u64 = per_instance.iter().map(|r| r.len() as u64).sum();
        let strategy = config.routing_strategy();
        let start = initial_state(&config.policy);
        let candidates_len = if strategy.self_skip && ids.len() > 1 {
            ids.len() - 1
        } else {
            ids.len()
        };
        let links = ids
            .iter()
            .zip(per_instance)
            .enumerate()
            .map(|(index, (&id, rows))| {
                // Stagger cursors so producers do not all start on instance 0.
                let first = match strategy.kind {
                    StrategyKind::StaticRoundRobin => index % ids.len(),
                    _ => index % candidates_len,
                };
                Link {
                    id,
                    batches: build_batches(id, rows, config.batching).into(),
                    state: start,
                    strikes: StrikeCounter::default(),
                    cursor: RoutingCursor::at(first),
                    rows_routed: 0,
                    rows_sent_remote: 0,
                    bytes_sent_remote: 0,
                    channel_free_at: SimTime::ZERO,
                    boundary_pending: false,
                    tick_pending: false,
                }
            })
            .collect();
        let workers = config
            .load_factor_list()
            .into_iter()
            .map(|load_factor| Worker {
                unit_load: load_factor == 1u64,
                load_factor,
                queue: VecDeque::new(),
                in_service: None,
                busy_total: SimTime::ZERO,
                rows_processed: 0,
                last_arrival: SimTime::ZERO,
                last_completion: SimTime::ZERO,
                samples: VecDeque::new(),
            })
            .collect();
        let pending = ids.iter().map(|&id| (id, SimTime::ZERO)).collect();
        Ok(Engine {
            config,
            ids,
            strategy,
            links,
            workers,
            pending,
            events: BinaryHeap::new(),
            seq: 0,
            now: SimTime::ZERO,
            log: Vec::new(),
            completed: vec![false; total_rows as usize],
            trace: trace.then(Vec::new),
            total_rows,
        })
    }

    fn schedule(&mut self, time: SimTime, kind: EventKind) {
        self.events.push(Event {
            time,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    fn record(&mut self, link: usize, from: LinkState, to: LinkState) {
        if from != to {
            self.log.push(TransitionRecord {
                at: self.now,
                instance: self.links[link].id,
                from,
                to,
            });
        }
    }

    fn start(&mut self) {
        for i in 0..self.links.len() {
            if !self.links[i].batches.is_empty() {
                let to = self.links[i].state;
                self.record(i, LinkState::Initial, to);
                self.links[i].boundary_pending = true;
                self.schedule(SimTime::ZERO, EventKind::BatchBoundary { link: i });
            }
        }
    }

    /// Handles the next event; false once the queue is empty.
    fn step_event(&mut self) -> Result<bool> {
        let Some(event) = self.events.pop() else {
            return Ok(false);
        };
        debug_assert!(event.time >= self.now);
        self.now = event.time;
        match event.kind {
            EventKind::RowArrival { dest, item } => self.deliver(dest, item),
            EventKind::RowComplete { worker } => self.complete(worker)?,
            EventKind::BatchBoundary { link } => self.batch_boundary(link)?,
            EventKind::ModelTick { link } => self.model_tick(link),
        }
        Ok(true)
    }

    fn run(mut self) -> Result<(RunReport, Vec<ServiceInterval>)> {
        self.start();
        while self.step_event()? {}
        self.finish()
    }

    fn sample_all(&mut self) {
        let now = self.now;
        let window = self.config.model.params.slope_window.max(2);
        for worker in &mut self.workers {
            let sample = SyncSample {
                at: now,
                cumulative: worker.cumulative_sync(now),
            };
            match worker.samples.back_mut() {
                Some(last) if last.at == now => *last = sample,
                _ => worker.samples.push_back(sample),
            }
            while worker.samples.len() > window {
                worker.samples.pop_front();
            }
        }
    }

    fn snapshot_of(&self, link: usize) -> Result<SiblingSnapshot> {
        let instances = self
            .links
            .iter()
            .zip(&self.workers)
            .map(|(l, w)| InstanceObservation {
                id: l.id,
                row_count: l.rows_routed,
                sync_series: w.samples.iter().copied().collect(),
                last_activity: w.last_activity(self.now),
            })
            .collect();
        SiblingSnapshot::new(self.links[link].id, self.now, instances)
    }

    fn batch_boundary(&mut self, i: usize) -> Result<()> {
        self.links[i].boundary_pending = false;
        let Some(batch) = self.links[i].batches.pop_front() else {
            return Ok(());
        };
        self.sample_all();
        let from = self.links[i].state;
        if !from.is_terminal() {
            let snapshot = self.snapshot_of(i)?;
            let density = (batch.cut() != BatchCut::EndOfInput).then(|| batch_density(&batch));
            let eval = evaluate_link(
                &snapshot,
                self.config.model.choice,
                &self.config.model.params,
                self.links[i].strikes,
                from,
                &self.config.policy,
                density,
                from == LinkState::DrainingToDistributed,
            );
            self.links[i].strikes = eval.counter;
            self.links[i].state = eval.state;
            self.record(i, from, eval.state);
        }
        self.emit(i, batch)?;
        self.maybe_pace(i);
        Ok(())
    }

    fn model_tick(&mut self, i: usize) {
        self.links[i].tick_pending = false;
        self.sample_all();
        let from = self.links[i].state;
        let signals = StepSignals {
            drain_complete: true,
            ..StepSignals::default()
        };
        let to = step(from, &self.config.policy, signals);
        self.links[i].state = to;
        self.record(i, from, to);
    }

    fn emit(&mut self, i: usize, batch: Batch) -> Result<()> {
        let state = self.links[i].state;
        for row in batch.into_rows() {
            let ctx = RouteContext {
                me: self.links[i].id,
                all: &self.ids,
                cursor: self.links[i].cursor,
                queue_cost: &self.pending,
            };
            let (dest_id, cursor) = route(state, &self.strategy, &ctx)?;
            self.links[i].cursor = cursor;
            self.links[i].rows_routed += 1;
            let dest = self
                .ids
                .binary_search(&dest_id)
                .map_err(|_| Error::Invariant(format!("routed to unknown {dest_id}")))?;
            let effective = self.workers[dest].effective(row.cost);
            *self
                .pending
                .get_mut(&dest_id)
                .expect("every instance has an entry") += effective;
            let bytes = row.payload_bytes;
            let item = Queued {
                row,
                origin: i,
                effective,
            };
            if dest == i {
                self.deliver(dest, item);
                continue;
            }
            let link = &mut self.links[i];
            link.rows_sent_remote += 1;
            link.bytes_sent_remote += bytes;
            let delay = remote_delay(bytes, &self.config.network);
            if delay == SimTime::ZERO {
                self.deliver(dest, item);
            } else {
                let arrive = link.channel_free_at.max(self.now) + delay;
                link.channel_free_at = arrive;
                self.schedule(arrive, EventKind::RowArrival { dest, item });
            }
        }
        Ok(())
    }

    fn deliver(&mut self, dest: usize, item: Queued) {
        let worker = &mut self.workers[dest];
        worker.last_arrival = self.now;
        worker.queue.push_back(item);
        if worker.in_service.is_none() {
            self.start_next(dest);
        }
    }

    fn start_next(&mut self, w: usize) {
        if let Some(item) = self.workers[w].queue.pop_front() {
            let finish = self.now + item.effective;
            self.workers[w].in_service = Some((item, self.now));
            self.schedule(finish, EventKind::RowComplete { worker: w });
        }
    }

    fn complete(&mut self, w: usize) -> Result<()> {
        let (item, started) = self.workers[w]
            .in_service
            .take()
            .ok_or_else(|| Error::Invariant("completion on an idle worker".into()))?;
        let slot = self
            .completed
            .get_mut(item.row.id.0 as usize)
            .ok_or_else(|| Error::Invariant(format!("unknown row {}", item.row.id.0)))?;
        if *slot {
            return Err(Error::Invariant(format!(
                "row {} completed twice",
                item.row.id.0
            )));
        }
        *slot = true;
        let worker = &mut self.workers[w];
        worker.busy_total += item.effective;
        worker.rows_processed += 1;
        worker.last_completion = self.now;
        let pending = self
            .pending
            .get_mut(&self.ids[w])
            .expect("every instance has an entry");
        *pending = pending.saturating_sub(item.effective);
        if let Some(trace) = &mut self.trace {
            trace.push(ServiceInterval {
                worker: w,
                origin: item.origin,
                row: item.row.id.0,
                start: started,
                end: self.now,
            });
        }
        self.start_next(w);
        self.maybe_pace(w);
        Ok(())
    }

    /// Emits the next batch once the local worker has nothing queued, and
    /// closes out a drain once the producer is exhausted.
    fn maybe_pace(&mut self, i: usize) {
        if !self.workers[i].queue.is_empty() {
            return;
        }
        let link = &mut self.links[i];
        if !link.batches.is_empty() {
            if !link.boundary_pending {
                link.boundary_pending = true;
                self.schedule(self.now, EventKind::BatchBoundary { link: i });
            }
        } else if link.state == LinkState::DrainingToDistributed && !link.tick_pending {
            link.tick_pending = true;
            self.schedule(self.now, EventKind::ModelTick { link: i });
        }
    }

    fn finish(self) -> Result<(RunReport, Vec<ServiceInterval>)> {
        let makespan = self
            .workers
            .iter()
            .filter(|w| w.rows_processed > 0)
            .map(|w| w.last_completion)
            .max()
            .unwrap_or(SimTime::ZERO);
        let instances: Vec<MetricsRecord> = self
            .links
            .iter()
            .zip(&self.workers)
            .map(|(l, w)| MetricsRecord {
                instance: l.id,
                rows_processed: w.rows_processed,
                sync_time_total: w.busy_total,
                idle_time_total: makespan.saturating_sub(w.busy_total),
                rows_routed: l.rows_routed,
                rows_sent_remote: l.rows_sent_remote,
                bytes_sent_remote: l.bytes_sent_remote,
            })
            .collect();
        let report = RunReport {
            makespan,
            total_rows: self.total_rows,
            rows_redistributed_total: instances.iter().map(|m| m.rows_sent_remote).sum(),
            bytes_redistributed_total: instances.iter().map(|m| m.bytes_sent_remote).sum(),
            instances,
            final_states: self.links.iter().map(|l| l.state).collect(),
            transition_log: self.log,
            config: self.config.resolved(),
            seed: self.config.seed,
        };
        if !self.completed.iter().all(|&c| c) {
            return Err(Error::Invariant("some rows never completed".into()));
        }
        check_report(&report)?;
        Ok((report, self.trace.unwrap_or_default()))
    }
}

/// Cross-checks a finished run against the invariants every run must hold.
pub fn check_report(report: &RunReport) -> Result<()> {
    let fail = |msg: String| Err(Error::Invariant(msg));
    let processed: u64 = report.instances.iter().map(|m| m.rows_processed).sum();
    if processed != report.total_rows {
        return fail(format!(
            "processed {processed} rows of {}",
            report.total_rows
        ));
    }
    for m in &report.instances {
        if m.rows_sent_remote > m.rows_routed {
            return fail(format!(
                "{} sent more rows remotely than it routed",
                m.instance
            ));
        }
        if m.sync_time_total > report.makespan {
            return fail(format!("{} busy longer than the makespan", m.instance));
        }
    }
    if report
        .transition_log
        .windows(2)
        .any(|pair| pair[1].at < pair[0].at)
    {
        return fail("transition log goes back in time".into());
    }
    if report
        .final_states
        .contains(&LinkState::DrainingToDistributed)
    {
        return fail("a link ended the run while draining".into());
    }
    if report.config.policy.kind == PolicyKind::NeverDistribute
        && report.config.strategy.kind != StrategyKind::StaticRoundRobin
        && report.bytes_redistributed_total != 0
    {
        return fail("never-distribute link moved bytes".into());
    }
    let busy: u64 = report
        .instances
        .iter()
        .map(|m| m.sync_time_total.as_ms())
        .sum();
    let n = report.instances.len() as u64;
    let factors = report.config.load_factor_list();
    if n > 0
        && factors.iter().all(|f| *f == factors[0])
        && report.makespan.as_ms() < busy.div_ceil(n)
    {
        return fail(format!(
            "makespan {} below the work bound {}",
            report.makespan,
            busy.div_ceil(n)
        ));
    }
    Ok(())
}

/// Simulates a validated scenario to completion.
pub fn run(config: &ScenarioConfig) -> Result<RunReport> {
    config.validate()?;
    let engine = Engine::new(config, false)?;
    let (report, _) = engine.run()?;
    check_max_row_bound(config, &report)?;
    Ok(report)
}

/// Like [`run`], also returning every service interval.
pub fn run_traced(config: &ScenarioConfig) -> Result<(RunReport, Vec<ServiceInterval>)> {
    config.validate()?;
    let engine = Engine::new(config, true)?;
    let (report, trace) = engine.run()?;
    check_max_row_bound(config, &report)?;
    Ok((report, trace))
}

fn check_max_row_bound(config: &ScenarioConfig, report: &RunReport) -> Result<()> {
    let rows = generate(&config.workload, config.instance_count(), config.seed)?;
    let fastest = config
        .load_factor_list()
        .into_iter()
        .min()
        .unwrap_or_else(Fraction::one);
    let longest = rows
        .iter()
        .flatten()
        .map(|r| r.cost.scaled(&fastest))
        .max()
        .unwrap_or(SimTime::ZERO);
    if report.makespan < longest {
        return Err(Error::Invariant(format!(
            "makespan {} shorter than the longest row {}",
            report.makespan, longest
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::Selector;
    use crate::skew_models::SkewModelKind;
    use crate::workload::{CostDist, PayloadDist, Placement, WorkloadSpec};

    fn motivating(kind: PolicyKind, strategy: StrategyKind) -> ScenarioConfig {
        let mut c = ScenarioConfig::new(
            1,
            4,
            WorkloadSpec {
                total_rows: 4,
                placement: Placement::SingleHot {
                    fraction: Fraction::one(),
                },
                cost: CostDist::Constant {
                    cost: SimTime::from_ms(60_000),
                },
                payload: PayloadDist::Constant { bytes: 1024 },
            },
        );
        c.policy = RedistributionPolicy::new(kind);
        c.strategy.kind = strategy;
        c
    }

    #[test]
    fn remote_delay_examples() {
        let mut m = NetworkModel {
            per_row_overhead: SimTime::from_ms(1),
            per_byte_cost: Fraction::new(1, 1000),
        };
        assert_eq!(remote_delay(0, &m), SimTime::from_ms(1));
        assert_eq!(remote_delay(1_000_000, &m), SimTime::from_ms(1001));
        assert_eq!(remote_delay(1500, &m), SimTime::from_ms(3));
        m.per_byte_cost = Fraction::zero();
        assert_eq!(remote_delay(u64::MAX, &m), SimTime::from_ms(1));
    }

    #[test]
    fn motivating_example() {
        let never = run(&motivating(
            PolicyKind::NeverDistribute,
            StrategyKind::Adaptive,
        ))
        .unwrap();
        assert_eq!(never.makespan, SimTime::from_ms(240_000));
        assert_eq!(never.bytes_redistributed_total, 0);
        let rr = run(&motivating(
            PolicyKind::NeverDistribute,
            StrategyKind::StaticRoundRobin,
        ))
        .unwrap();
        assert_eq!(rr.makespan, SimTime::from_ms(60_000));
        let early = run(&motivating(
            PolicyKind::DistributeEarly,
            StrategyKind::Adaptive,
        ))
        .unwrap();
        assert_eq!(early.makespan, SimTime::from_ms(60_000));
        assert_eq!(early.rows_redistributed_total, 3);
    }

    #[test]
    fn empty_workload() {
        let mut c = motivating(PolicyKind::DistributeLate, StrategyKind::Adaptive);
        c.workload.total_rows = 0;
        let r = run(&c).unwrap();
        assert_eq!(r.makespan, SimTime::ZERO);
        assert!(r.transition_log.is_empty());
        assert!(r.instances.iter().all(|m| m.rows_processed == 0));
    }

    #[test]
    fn late_switches_after_three_idle_strikes() {
        // 20 rows per batch on the hot instance; siblings have nothing.
        let mut c = motivating(PolicyKind::DistributeLate, StrategyKind::Adaptive);
        c.workload.total_rows = 80;
        c.workload.cost = CostDist::Constant {
            cost: SimTime::from_ms(100),
        };
        c.batching.max_batch_rows = 20;
        let r = run(&c).unwrap();
        let hot = InstanceId::new(0, 0);
        let hot_log: Vec<_> = r
            .transition_log
            .iter()
            .filter(|t| t.instance == hot)
            .collect();
        // Boundaries when each batch's last row starts: 0 (siblings not
        // idle yet), 1900, 3900, 5900.
        assert_eq!(hot_log[0].to, LinkState::DecidingLocal);
        assert_eq!(hot_log[1].to, LinkState::DrainingToDistributed);
        assert_eq!(hot_log[1].at, SimTime::from_ms(5900));
        assert_eq!(hot_log[2].to, LinkState::TerminalDistributed);
        assert!(r.makespan < SimTime::from_ms(8000));
    }

    #[test]
    fn never_distribute_stays_local() {
        let mut c = motivating(PolicyKind::NeverDistribute, StrategyKind::Adaptive);
        c.workload.total_rows = 500;
        c.workload.placement = Placement::Zipf { s: 1.5 };
        for model in SkewModelKind::ALL {
            c.model.choice = model;
            let r = run(&c).unwrap();
            assert_eq!(r.bytes_redistributed_total, 0);
            assert!(r
                .final_states
                .iter()
                .all(|&s| s == LinkState::TerminalLocal));
        }
    }

    #[test]
    fn least_loaded_selector_runs() {
        let mut c = motivating(PolicyKind::DistributeEarly, StrategyKind::Adaptive);
        c.strategy.selector = Selector::LeastLoaded;
        let r = run(&c).unwrap();
        assert_eq!(r.makespan, SimTime::from_ms(60_000));
    }

    fn engine_at(config: &ScenarioConfig, until: SimTime) -> Engine<'_> {
        let mut e = Engine::new(config, false).unwrap();
        e.start();
        while e.events.peek().is_some_and(|ev| ev.time <= until) {
            e.step_event().unwrap();
        }
        e.now = until;
        e
    }

    #[test]
    fn snapshot_examples() {
        let mut c = motivating(PolicyKind::NeverDistribute, StrategyKind::Adaptive);
        c.workload.total_rows = 10;
        c.workload.cost = CostDist::Constant {
            cost: SimTime::from_ms(100),
        };
        let mut e = Engine::new(&c, false).unwrap();
        e.start();
        let snap = e.snapshot_of(0).unwrap();
        assert!(snap.instances().iter().all(|o| o.row_count == 0));

        let mut e = engine_at(&c, SimTime::from_ms(1000));
        e.sample_all();
        let snap = e.snapshot_of(0).unwrap();
        let series = &snap.observer().sync_series;
        assert_eq!(series.last().unwrap().cumulative, SimTime::from_ms(1000));
        assert_eq!(snap.observer().row_count, 10);

        // One row lands on instance 1 at t=500 and nothing follows.
        let mut c = motivating(PolicyKind::DistributeEarly, StrategyKind::Adaptive);
        c.workload.total_rows = 2;
        c.workload.cost = CostDist::Constant {
            cost: SimTime::from_ms(1),
        };
        c.network.per_row_overhead = SimTime::from_ms(500);
        let e = engine_at(&c, SimTime::from_ms(900));
        let snap = e.snapshot_of(0).unwrap();
        let sibling = snap.get(InstanceId::new(0, 1)).unwrap();
        assert_eq!(sibling.last_activity, SimTime::from_ms(500));
        let idle = snap.get(InstanceId::new(0, 2)).unwrap();
        assert_eq!(idle.last_activity, SimTime::ZERO);
    }

    #[test]
    fn evaluate_link_idle_strikes() {
        let me = InstanceId::new(0, 0);
        let instances = (0..4)
            .map(|i| InstanceObservation {
                id: InstanceId::new(0, i),
                row_count: 0,
                sync_series: vec![],
                last_activity: if i == 0 {
                    SimTime::from_ms(1000)
                } else {
                    SimTime::ZERO
                },
            })
            .collect();
        let snap = SiblingSnapshot::new(me, SimTime::from_ms(1000), instances).unwrap();
        let params = ModelParams::default();
        let policy = RedistributionPolicy::new(PolicyKind::DistributeLate);
        let mut counter = StrikeCounter::default();
        let mut state = LinkState::DecidingLocal;
        let mut states = Vec::new();
        for _ in 0..3 {
            let e = evaluate_link(
                &snap,
                SkewModelKind::IdleTime,
                &params,
                counter,
                state,
                &policy,
                Some(1024),
                false,
            );
            counter = e.counter;
            state = e.state;
            states.push(state);
        }
        assert_eq!(
            states,
            vec![
                LinkState::DecidingLocal,
                LinkState::DecidingLocal,
                LinkState::DrainingToDistributed
            ]
        );
    }
}

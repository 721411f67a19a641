//! Shared domain types: virtual time, rows and batches, instance ids,
//! the sibling snapshot read by skew models, and per-instance metrics.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraction::Fraction;

/// Virtual time in whole milliseconds.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms)
    }

    pub const fn as_ms(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// `self * factor`, rounded half up to a whole millisecond.
    pub fn scaled(self, factor: &Fraction) -> SimTime {
        SimTime((factor * self.0).round_half_up())
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// One interpreter process on one node. Orders lexicographically by
/// `(node, interpreter)`, which is the canonical order for every tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceId {
    pub node: u32,
    pub interpreter: u32,
}

impl InstanceId {
    pub const fn new(node: u32, interpreter: u32) -> Self {
        InstanceId { node, interpreter }
    }

    /// All instances of a `nodes x interpreters_per_node` cluster, canonical order.
    pub fn cluster(nodes: u32, interpreters_per_node: u32) -> Vec<InstanceId> {
        (0..nodes)
            .flat_map(|n| (0..interpreters_per_node).map(move |i| InstanceId::new(n, i)))
            .collect()
    }
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}.i{}", self.node, self.interpreter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub id: RowId,
    pub payload_bytes: u64,
    /// Processing time on a worker with load factor 1.
    pub cost: SimTime,
}

/// Why the batch builder closed a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchCut {
    RowLimit,
    ByteLimit,
    /// The producer ran out of input. Such a batch says nothing about row size.
    EndOfInput,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    rows: Vec<Row>,
    origin: InstanceId,
    cut: BatchCut,
}

impl Batch {
    pub fn new(rows: Vec<Row>, origin: InstanceId, cut: BatchCut) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::contract("a batch must hold at least one row"));
        }
        Ok(Batch { rows, origin, cut })
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Row> {
        self.rows
    }

    pub fn origin(&self) -> InstanceId {
        self.origin
    }

    pub fn cut(&self) -> BatchCut {
        self.cut
    }

    pub fn total_bytes(&self) -> u64 {
        self.rows.iter().map(|r| r.payload_bytes).sum()
    }
}

/// Rows per batch.
pub fn batch_density(batch: &Batch) -> usize {
    batch.rows.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatchLimits {
    pub max_batch_rows: usize,
    pub max_batch_bytes: u64,
}

impl Default for BatchLimits {
    fn default() -> Self {
        BatchLimits {
            max_batch_rows: 1024,
            max_batch_bytes: 16 * 1024 * 1024,
        }
    }
}

/// Cuts a producer's rows into batches of at most `max_batch_rows` rows and
/// at most `max_batch_bytes` bytes, whichever binds first. A single row
/// larger than the byte cap forms its own batch.
pub fn build_batches(origin: InstanceId, rows: Vec<Row>, limits: BatchLimits) -> Vec<Batch> {
    let mut batches = Vec::new();
    let mut current: Vec<Row> = Vec::new();
    let mut bytes = 0u64;
    let close = |current: &mut Vec<Row>, bytes: &mut u64, cut, batches: &mut Vec<Batch>| {
        let rows = std::mem::take(current);
        *bytes = 0;
        batches.push(Batch { rows, origin, cut });
    };
    for row in rows {
        if !current.is_empty() {
            if current.len() >= limits.max_batch_rows {
                close(&mut current, &mut bytes, BatchCut::RowLimit, &mut batches);
            } else if bytes.saturating_add(row.payload_bytes) > limits.max_batch_bytes {
                close(&mut current, &mut bytes, BatchCut::ByteLimit, &mut batches);
            }
        }
        bytes = bytes.saturating_add(row.payload_bytes);
        current.push(row);
        if bytes >= limits.max_batch_bytes {
            close(&mut current, &mut bytes, BatchCut::ByteLimit, &mut batches);
        }
    }
    if !current.is_empty() {
        let cut = if current.len() >= limits.max_batch_rows {
            BatchCut::RowLimit
        } else {
            BatchCut::EndOfInput
        };
        close(&mut current, &mut bytes, cut, &mut batches);
    }
    batches
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncSample {
    pub at: SimTime,
    /// Cumulative time spent processing rows up to `at`.
    pub cumulative: SimTime,
}

/// What one link instance exposes to its siblings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceObservation {
    pub id: InstanceId,
    /// Rows that have passed through this link instance.
    pub row_count: u64,
    /// Most recent sync-time samples, oldest first.
    pub sync_series: Vec<SyncSample>,
    pub last_activity: SimTime,
}

/// Point-in-time view of every live link instance, including the observer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiblingSnapshot {
    self_id: InstanceId,
    now: SimTime,
    instances: Vec<InstanceObservation>,
}

impl SiblingSnapshot {
    pub fn new(
        self_id: InstanceId,
        now: SimTime,
        instances: Vec<InstanceObservation>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for obs in &instances {
            if !seen.insert(obs.id) {
                return Err(Error::contract(format!("instance {} listed twice", obs.id)));
            }
            if obs.last_activity > now {
                return Err(Error::contract(format!(
                    "instance {} last active at {} after now={}",
                    obs.id, obs.last_activity, now
                )));
            }
            for pair in obs.sync_series.windows(2) {
                if pair[1].at <= pair[0].at {
                    return Err(Error::contract(format!(
                        "sync series of {} has non-increasing timestamps",
                        obs.id
                    )));
                }
                if pair[1].cumulative < pair[0].cumulative {
                    return Err(Error::contract(format!(
                        "sync series of {} decreases",
                        obs.id
                    )));
                }
            }
        }
        if !seen.contains(&self_id) {
            return Err(Error::contract(format!("snapshot lacks self {self_id}")));
        }
        Ok(SiblingSnapshot {
            self_id,
            now,
            instances,
        })
    }

    pub fn self_id(&self) -> InstanceId {
        self.self_id
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn instances(&self) -> &[InstanceObservation] {
        &self.instances
    }

    pub fn get(&self, id: InstanceId) -> Option<&InstanceObservation> {
        self.instances.iter().find(|o| o.id == id)
    }

    pub fn observer(&self) -> &InstanceObservation {
        self.get(self.self_id).expect("checked on construction")
    }

    pub fn siblings(&self) -> impl Iterator<Item = &InstanceObservation> {
        let me = self.self_id;
        self.instances.iter().filter(move |o| o.id != me)
    }

    pub fn sibling_count(&self) -> usize {
        self.instances.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SiblingMean {
    NoSiblings,
    Mean(Fraction),
}

/// Mean row count over every instance except `of`.
pub fn sibling_average_rows(snapshot: &SiblingSnapshot, of: InstanceId) -> Result<SiblingMean> {
    if snapshot.get(of).is_none() {
        return Err(Error::contract(format!("{of} is not in the snapshot")));
    }
    let others: Vec<u64> = snapshot
        .instances
        .iter()
        .filter(|o| o.id != of)
        .map(|o| o.row_count)
        .collect();
    if others.is_empty() {
        return Ok(SiblingMean::NoSiblings);
    }
    let total: u64 = others.iter().sum();
    Ok(SiblingMean::Mean(Fraction::new(total, others.len() as u64)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub instance: InstanceId,
    pub rows_processed: u64,
    pub sync_time_total: SimTime,
    pub idle_time_total: SimTime,
    /// Rows this instance's link routed anywhere, itself included.
    pub rows_routed: u64,
    pub rows_sent_remote: u64,
    pub bytes_sent_remote: u64,
}

impl MetricsRecord {
    pub fn new(instance: InstanceId) -> Self {
        MetricsRecord {
            instance,
            rows_processed: 0,
            sync_time_total: SimTime::ZERO,
            idle_time_total: SimTime::ZERO,
            rows_routed: 0,
            rows_sent_remote: 0,
            bytes_sent_remote: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: u64, bytes: u64) -> Row {
        Row {
            id: RowId(id),
            payload_bytes: bytes,
            cost: SimTime::from_ms(1),
        }
    }

    fn obs(node: u32, rows: u64) -> InstanceObservation {
        InstanceObservation {
            id: InstanceId::new(node, 0),
            row_count: rows,
            sync_series: vec![],
            last_activity: SimTime::ZERO,
        }
    }

    fn snapshot(counts: &[u64]) -> SiblingSnapshot {
        let instances = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| obs(i as u32, c))
            .collect();
        SiblingSnapshot::new(InstanceId::new(0, 0), SimTime::ZERO, instances).unwrap()
    }

    #[test]
    fn density_is_row_count() {
        let origin = InstanceId::new(0, 0);
        let one = Batch::new(vec![row(0, 10)], origin, BatchCut::EndOfInput).unwrap();
        assert_eq!(batch_density(&one), 1);
        let rows = (0..4096).map(|i| row(i, 10)).collect();
        let big = Batch::new(rows, origin, BatchCut::RowLimit).unwrap();
        assert_eq!(batch_density(&big), 4096);
        assert!(Batch::new(vec![], origin, BatchCut::EndOfInput).is_err());
    }

    #[test]
    fn builder_respects_both_caps() {
        let origin = InstanceId::new(0, 0);
        let limits = BatchLimits::default();
        let small: Vec<Row> = (0..2500).map(|i| row(i, 100)).collect();
        let batches = build_batches(origin, small, limits);
        let sizes: Vec<usize> = batches.iter().map(batch_density).collect();
        assert_eq!(sizes, vec![1024, 1024, 452]);
        assert_eq!(batches[0].cut(), BatchCut::RowLimit);
        assert_eq!(batches[2].cut(), BatchCut::EndOfInput);

        let gib = 1u64 << 30;
        let heavy: Vec<Row> = (0..3).map(|i| row(i, gib)).collect();
        let batches = build_batches(origin, heavy, limits);
        assert_eq!(batches.len(), 3);
        assert!(batches
            .iter()
            .all(|b| batch_density(b) == 1 && b.cut() == BatchCut::ByteLimit));
    }

    #[test]
    fn large_objects_collapse_density_by_over_99_percent() {
        let origin = InstanceId::new(0, 0);
        let limits = BatchLimits::default();
        let typical = build_batches(origin, (0..4096).map(|i| row(i, 200)).collect(), limits);
        // 2 MiB blobs: eight fit under the 16 MiB cap.
        let blobs = build_batches(origin, (0..64).map(|i| row(i, 2 << 20)).collect(), limits);
        let typical_density = batch_density(&typical[0]) as f64;
        let blob_density = batch_density(&blobs[0]) as f64;
        assert!(blob_density <= 10.0);
        assert!(1.0 - blob_density / typical_density > 0.99);
    }

    #[test]
    fn sibling_mean_cases() {
        let me = InstanceId::new(0, 0);
        assert_eq!(
            sibling_average_rows(&snapshot(&[100, 40, 60]), me).unwrap(),
            SiblingMean::Mean(Fraction::from_integer(50))
        );
        assert_eq!(
            sibling_average_rows(&snapshot(&[7]), me).unwrap(),
            SiblingMean::NoSiblings
        );
        assert_eq!(
            sibling_average_rows(&snapshot(&[0, 0, 0]), me).unwrap(),
            SiblingMean::Mean(Fraction::zero())
        );
        assert!(sibling_average_rows(&snapshot(&[1, 2]), InstanceId::new(9, 0)).is_err());
    }

    #[test]
    fn snapshot_rejects_bad_input() {
        let me = InstanceId::new(0, 0);
        assert!(SiblingSnapshot::new(me, SimTime::ZERO, vec![obs(1, 0)]).is_err());
        assert!(SiblingSnapshot::new(me, SimTime::ZERO, vec![obs(0, 0), obs(0, 1)]).is_err());
        let mut late = obs(0, 0);
        late.last_activity = SimTime::from_ms(5);
        assert!(SiblingSnapshot::new(me, SimTime::from_ms(4), vec![late]).is_err());
        let mut unordered = obs(0, 0);
        unordered.sync_series = vec![
            SyncSample {
                at: SimTime::from_ms(2),
                cumulative: SimTime::ZERO,
            },
            SyncSample {
                at: SimTime::from_ms(2),
                cumulative: SimTime::ZERO,
            },
        ];
        assert!(SiblingSnapshot::new(me, SimTime::from_ms(4), vec![unordered]).is_err());
    }

    #[test]
    fn cluster_is_canonical() {
        let ids = InstanceId::cluster(2, 2);
        assert_eq!(
            ids,
            vec![
                InstanceId::new(0, 0),
                InstanceId::new(0, 1),
                InstanceId::new(1, 0),
                InstanceId::new(1, 1)
            ]
        );
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(sorted, ids);
    }
}

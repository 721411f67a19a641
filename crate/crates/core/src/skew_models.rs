//! Skew detection.
//!
//! Three detectors read a [`SiblingSnapshot`]:
//!
//! * row percentage: `R_self * theta_rows > mean(R_sibling)`
//! * sync-time slope: `slope_self * theta_slope >= mean(slope_sibling)`, where a
//!   slope is the endpoint difference quotient over the last `slope_window`
//!   cumulative sync-time samples
//! * idle time: enough siblings have been silent for longer than
//!   `idle_period` while this instance is still active
//!
//! A raw verdict only counts once it repeats `strikes_n` times in a row
//! ([`StrikeCounter`]). The row-size guard runs alongside whichever detector
//! is active and shuts redistribution off for sparse (heavy-row) batches when
//! there is no skew.
//!
//! With no siblings, or without enough samples, every detector says "not skewed".

use serde::{Deserialize, Serialize};

use crate::fraction::Fraction;
use crate::types::{SiblingSnapshot, SimTime, SyncSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewModelKind {
    RowPercentage,
    IdleTime,
    SyncSlope,
}

impl SkewModelKind {
    pub const ALL: [SkewModelKind; 3] = [
        SkewModelKind::RowPercentage,
        SkewModelKind::IdleTime,
        SkewModelKind::SyncSlope,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub theta_rows: Fraction,
    pub theta_slope: Fraction,
    pub slope_window: usize,
    pub idle_period: SimTime,
    pub idle_fraction: Fraction,
    pub strikes_n: u32,
    pub density_threshold: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            theta_rows: Fraction::new(1, 2),
            theta_slope: Fraction::new(1, 2),
            slope_window: 5,
            idle_period: SimTime::from_ms(100),
            idle_fraction: Fraction::new(1, 2),
            strikes_n: 3,
            density_threshold: 10,
        }
    }
}

impl ModelParams {
    /// Every range violation, in field order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.theta_rows.in_unit_open_closed() {
            out.push("theta_rows must be in (0,1]".to_string());
        }
        if !self.theta_slope.in_unit_open_closed() {
            out.push("theta_slope must be in (0,1]".to_string());
        }
        if self.slope_window < 2 {
            out.push("slope_window must be >= 2".to_string());
        }
        if self.idle_period == SimTime::ZERO {
            out.push("idle_period must be > 0".to_string());
        }
        if !self.idle_fraction.in_unit_open_closed() {
            out.push("idle_fraction must be in (0,1]".to_string());
        }
        if self.strikes_n < 1 {
            out.push("strikes_n must be >= 1".to_string());
        }
        if self.density_threshold < 1 {
            out.push("density_threshold must be >= 1".to_string());
        }
        out
    }

    pub fn validated(self) -> Result<Self, crate::Error> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(crate::Error::Validation(v))
        }
    }
}

/// Skewed when `own_rows * theta_rows` exceeds the sibling mean.
pub fn row_percentage_skewed(snapshot: &SiblingSnapshot, params: &ModelParams) -> bool {
    let siblings = snapshot.sibling_count() as u64;
    if siblings == 0 {
        return false;
    }
    let own = snapshot.observer().row_count;
    let sibling_total: u64 = snapshot.siblings().map(|o| o.row_count).sum();
    // own * theta > total / siblings, cross-multiplied.
    &(&params.theta_rows * own) * &Fraction::from_integer(siblings)
        > Fraction::from_integer(sibling_total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("insufficient data for a slope")]
pub struct InsufficientData;

/// `(S_last - S_first) / (t_last - t_first)` over the last `window` samples.
pub fn sync_slope(series: &[SyncSample], window: usize) -> Result<Fraction, InsufficientData> {
    let take = window.min(series.len());
    if take < 2 {
        return Err(InsufficientData);
    }
    let tail = &series[series.len() - take..];
    let (first, last) = (tail[0], tail[take - 1]);
    let span = last.at.saturating_sub(first.at).as_ms();
    if span == 0 {
        return Err(InsufficientData);
    }
    let growth = last.cumulative.saturating_sub(first.cumulative).as_ms();
    Ok(Fraction::new(growth, span))
}

/// Skewed when `own_slope * theta_slope` reaches the sibling mean slope.
/// An instance whose own sync time is flat is never the straggler.
pub fn sync_slope_skewed(snapshot: &SiblingSnapshot, params: &ModelParams) -> bool {
    let siblings = snapshot.sibling_count() as u64;
    if siblings == 0 {
        return false;
    }
    let own = match sync_slope(&snapshot.observer().sync_series, params.slope_window) {
        Ok(s) if s.is_positive() => s,
        _ => return false,
    };
    let sibling_sum = snapshot
        .siblings()
        .map(|o| {
            sync_slope(&o.sync_series, params.slope_window).unwrap_or_else(|_| Fraction::zero())
        })
        .fold(Fraction::zero(), |acc, s| acc + s);
    &(&own * &params.theta_slope) * &Fraction::from_integer(siblings) >= sibling_sum
}

fn is_idle(now: SimTime, last_activity: SimTime, period: SimTime) -> bool {
    now.saturating_sub(last_activity) > period
}

/// Idle-sibling test.
pub fn idle_time_skewed(snapshot: &SiblingSnapshot, params: &ModelParams) -> bool {
    let siblings = snapshot.sibling_count() as u64;
    if siblings == 0 {
        return false;
    }
    let now = snapshot.now();
    if is_idle(now, snapshot.observer().last_activity, params.idle_period) {
        return false;
    }
    let idle = snapshot
        .siblings()
        .filter(|o| is_idle(now, o.last_activity, params.idle_period))
        .count() as u64;
    Fraction::new(idle, siblings) >= params.idle_fraction
}

pub fn evaluate_model(
    kind: SkewModelKind,
    snapshot: &SiblingSnapshot,
    params: &ModelParams,
) -> bool {
    match kind {
        SkewModelKind::RowPercentage => row_percentage_skewed(snapshot, params),
        SkewModelKind::IdleTime => idle_time_skewed(snapshot, params),
        SkewModelKind::SyncSlope => sync_slope_skewed(snapshot, params),
    }
}

/// N-strikes confirmation. Latches once confirmed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrikeCounter {
    pub consecutive_positives: u32,
    pub confirmed: bool,
}

impl StrikeCounter {
    pub fn update(self, raw_verdict: bool, n: u32) -> StrikeCounter {
        if self.confirmed {
            return self;
        }
        if !raw_verdict {
            return StrikeCounter::default();
        }
        let consecutive_positives = self.consecutive_positives.saturating_add(1);
        StrikeCounter {
            consecutive_positives,
            confirmed: consecutive_positives >= n.max(1),
        }
    }
}

/// Free-function form of [`StrikeCounter::update`].
pub fn strike_update(counter: StrikeCounter, raw_verdict: bool, n: u32) -> StrikeCounter {
    counter.update(raw_verdict, n)
}

/// Row-size guard: no skew and fewer than `density_threshold` rows per batch.
pub fn row_size_guard_triggered(density: usize, skewed_now: bool, params: &ModelParams) -> bool {
    !skewed_now && density < params.density_threshold
}

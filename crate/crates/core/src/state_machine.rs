//! Per-link-instance redistribution state machine.
//!
//! Each link instance walks Initial -> Deciding -> (Draining) -> Terminal.
//! The redistribution policy picks the transition table:
//!
//! | policy  | start                | transitions                                                        |
//! |---------|----------------------|--------------------------------------------------------------------|
//! | never   | `TerminalLocal`      | none                                                               |
//! | late    | `DecidingLocal`      | skew -> `DrainingToDistributed` -> drain -> `TerminalDistributed`; guard -> `TerminalLocal` |
//! | early   | `DecidingDistributed`| skew -> `TerminalDistributed`; guard -> `TerminalDisabled`         |
//!
//! Terminal states are absorbing.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkState {
    Initial,
    DecidingLocal,
    DecidingDistributed,
    DrainingToDistributed,
    TerminalLocal,
    TerminalDistributed,
    TerminalDisabled,
}

impl LinkState {
    pub const ALL: [LinkState; 7] = [
        LinkState::Initial,
        LinkState::DecidingLocal,
        LinkState::DecidingDistributed,
        LinkState::DrainingToDistributed,
        LinkState::TerminalLocal,
        LinkState::TerminalDistributed,
        LinkState::TerminalDisabled,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            LinkState::TerminalLocal | LinkState::TerminalDistributed | LinkState::TerminalDisabled
        )
    }

    pub fn is_deciding(self) -> bool {
        matches!(
            self,
            LinkState::DecidingLocal | LinkState::DecidingDistributed
        )
    }
}

impl fmt::Display for LinkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            LinkState::Initial => "initial",
            LinkState::DecidingLocal => "deciding_local",
            LinkState::DecidingDistributed => "deciding_distributed",
            LinkState::DrainingToDistributed => "draining_to_distributed",
            LinkState::TerminalLocal => "terminal_local",
            LinkState::TerminalDistributed => "terminal_distributed",
            LinkState::TerminalDisabled => "terminal_disabled",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    NeverDistribute,
    DistributeLate,
    DistributeEarly,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::NeverDistribute,
        PolicyKind::DistributeLate,
        PolicyKind::DistributeEarly,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedistributionPolicy {
    pub kind: PolicyKind,
    /// Exclude the local instance from destinations while distributing.
    #[serde(default)]
    pub self_skip: bool,
    /// Let the row-size guard switch redistribution off.
    #[serde(default = "default_true")]
    pub guard_enabled: bool,
}

fn default_true() -> bool {
    true
}

impl RedistributionPolicy {
    pub const fn new(kind: PolicyKind) -> Self {
        RedistributionPolicy {
            kind,
            self_skip: false,
            guard_enabled: true,
        }
    }
}

impl Default for RedistributionPolicy {
    fn default() -> Self {
        RedistributionPolicy::new(PolicyKind::DistributeLate)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct StepSignals {
    pub skew_confirmed: bool,
    pub guard_triggered: bool,
    pub drain_complete: bool,
}

impl StepSignals {
    /// All eight combinations, for exhaustive checks.
    pub fn all() -> impl Iterator<Item = StepSignals> {
        (0u8..8).map(|bits| StepSignals {
            skew_confirmed: bits & 1 != 0,
            guard_triggered: bits & 2 != 0,
            drain_complete: bits & 4 != 0,
        })
    }
}

pub fn initial_state(policy: &RedistributionPolicy) -> LinkState {
    match policy.kind {
        PolicyKind::NeverDistribute => LinkState::TerminalLocal,
        PolicyKind::DistributeLate => LinkState::DecidingLocal,
        PolicyKind::DistributeEarly => LinkState::DecidingDistributed,
    }
}

/// One transition. Combinations the policy's table does not mention leave
/// the state unchanged. A confirmed skew wins over the guard if both are
/// (improperly) raised together.
pub fn step(state: LinkState, policy: &RedistributionPolicy, signals: StepSignals) -> LinkState {
    let guard = signals.guard_triggered && policy.guard_enabled;
    match (policy.kind, state) {
        (PolicyKind::DistributeLate, LinkState::DecidingLocal) => {
            if signals.skew_confirmed {
                LinkState::DrainingToDistributed
            } else if guard {
                LinkState::TerminalLocal
            } else {
                state
            }
        }
        (PolicyKind::DistributeLate, LinkState::DrainingToDistributed)
            if signals.drain_complete =>
        {
            LinkState::TerminalDistributed
        }
        (PolicyKind::DistributeEarly, LinkState::DecidingDistributed) => {
            if signals.skew_confirmed {
                LinkState::TerminalDistributed
            } else if guard {
                LinkState::TerminalDisabled
            } else {
                state
            }
        }
        _ => state,
    }
}

/// Whether rows emitted in this state may leave the local instance.
pub fn is_distributing(state: LinkState) -> bool {
    matches!(
        state,
        LinkState::DecidingDistributed
            | LinkState::DrainingToDistributed
            | LinkState::TerminalDistributed
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const SKEW: StepSignals = StepSignals {
        skew_confirmed: true,
        guard_triggered: false,
        drain_complete: false,
    };
    const GUARD: StepSignals = StepSignals {
        skew_confirmed: false,
        guard_triggered: true,
        drain_complete: false,
    };
    const DRAIN: StepSignals = StepSignals {
        skew_confirmed: false,
        guard_triggered: false,
        drain_complete: true,
    };

    fn policy(kind: PolicyKind) -> RedistributionPolicy {
        RedistributionPolicy::new(kind)
    }

    #[test]
    fn initial_states() {
        assert_eq!(
            initial_state(&policy(PolicyKind::NeverDistribute)),
            LinkState::TerminalLocal
        );
        assert_eq!(
            initial_state(&policy(PolicyKind::DistributeLate)),
            LinkState::DecidingLocal
        );
        assert_eq!(
            initial_state(&policy(PolicyKind::DistributeEarly)),
            LinkState::DecidingDistributed
        );
    }

    #[test]
    fn late_path() {
        let late = policy(PolicyKind::DistributeLate);
        let s = step(LinkState::DecidingLocal, &late, SKEW);
        assert_eq!(s, LinkState::DrainingToDistributed);
        assert_eq!(step(s, &late, StepSignals::default()), s);
        assert_eq!(step(s, &late, DRAIN), LinkState::TerminalDistributed);
        assert_eq!(
            step(LinkState::DecidingLocal, &late, GUARD),
            LinkState::TerminalLocal
        );
    }

    #[test]
    fn early_path() {
        let early = policy(PolicyKind::DistributeEarly);
        assert_eq!(
            step(LinkState::DecidingDistributed, &early, GUARD),
            LinkState::TerminalDisabled
        );
        assert_eq!(
            step(LinkState::DecidingDistributed, &early, SKEW),
            LinkState::TerminalDistributed
        );
        let no_guard = RedistributionPolicy {
            guard_enabled: false,
            ..early
        };
        assert_eq!(
            step(LinkState::DecidingDistributed, &no_guard, GUARD),
            LinkState::DecidingDistributed
        );
    }

    #[test]
    fn terminal_states_absorb() {
        for kind in PolicyKind::ALL {
            for state in LinkState::ALL.into_iter().filter(|s| s.is_terminal()) {
                for signals in StepSignals::all() {
                    assert_eq!(step(state, &policy(kind), signals), state);
                }
            }
        }
    }

    #[test]
    fn distributing_states() {
        assert!(!is_distributing(LinkState::TerminalLocal));
        assert!(!is_distributing(LinkState::TerminalDisabled));
        assert!(!is_distributing(LinkState::DecidingLocal));
        assert!(is_distributing(LinkState::TerminalDistributed));
        assert!(is_distributing(LinkState::DrainingToDistributed));
        assert!(is_distributing(LinkState::DecidingDistributed));
    }
}

//! Comparison policies. Both reuse the controller's admission, auxiliary,
//! allocation and battery steps and differ only in how subchannels are
//! grouped.
//!
//! * NSRA (no spectrum sharing): every SBS allocates alone on its initial
//!   band, with no prices and no payments.
//! * TDRAA (time division): in slot `t` the SBS `t mod N` gets the whole
//!   band; the others transmit nothing but still draw static power.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::controller::{ControlError, Controller, Group, SlotOutcome};
use crate::queues::QueueState;
use crate::scenario::Scenario;
use crate::stochastic::SlotState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Proposed,
    Nsra,
    Tdraa,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Proposed, PolicyKind::Nsra, PolicyKind::Tdraa];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Proposed => "proposed",
            PolicyKind::Nsra => "nsra",
            PolicyKind::Tdraa => "tdraa",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown policy `{s}` (expected proposed, nsra or tdraa)"))
    }
}

pub fn nsra_groups(scenario: &Scenario) -> Vec<Group> {
    (0..scenario.n_sbs())
        .map(|n| Group::solo(n, scenario.own_subchannels(n)))
        .collect()
}

/// Index of the SBS that holds the pooled band in slot `t`.
pub fn tdraa_active(n_sbs: usize, t: u64) -> usize {
    (t % n_sbs as u64) as usize
}

pub fn tdraa_groups(scenario: &Scenario, t: u64) -> Vec<Group> {
    let active = tdraa_active(scenario.n_sbs(), t);
    (0..scenario.n_sbs())
        .map(|n| {
            let channels = if n == active {
                (0..scenario.n_subchannels()).collect()
            } else {
                Vec::new()
            };
            Group::solo(n, channels)
        })
        .collect()
}

/// One NSRA slot from a fresh controller (NSRA keeps no state across slots).
pub fn nsra_slot(
    slot: &SlotState,
    queues: &QueueState,
    scenario: &Scenario,
) -> Result<SlotOutcome, ControlError> {
    Controller::new(scenario, PolicyKind::Nsra).run_slot(slot, queues)
}

/// One TDRAA slot; the active SBS follows `slot.t`.
pub fn tdraa_slot(
    slot: &SlotState,
    queues: &QueueState,
    scenario: &Scenario,
) -> Result<SlotOutcome, ControlError> {
    Controller::new(scenario, PolicyKind::Tdraa).run_slot(slot, queues)
}

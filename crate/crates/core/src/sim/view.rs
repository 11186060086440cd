use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryClass, DropRecord};
use crate::onion::{Nonce, PartyId};

/// Sparse per-round link counts, sorted by `(from, to)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLinks {
    pub round: u32,
    pub links: Vec<(PartyId, PartyId, u32)>,
}

impl RoundLinks {
    pub fn count(&self, from: PartyId, to: PartyId) -> u32 {
        self.links
            .binary_search_by(|&(f, t, _)| (f, t).cmp(&(from, to)))
            .map_or(0, |i| self.links[i].2)
    }

    pub fn total(&self) -> u64 {
        self.links.iter().map(|l| l.2 as u64).sum()
    }

    pub fn outflow(&self, from: PartyId) -> u32 {
        let start = self.links.partition_point(|l| l.0 < from);
        self.links[start..]
            .iter()
            .take_while(|l| l.0 == from)
            .map(|l| l.2)
            .sum()
    }

    pub fn inflow(&self, to: PartyId) -> u32 {
        self.links.iter().filter(|l| l.1 == to).map(|l| l.2).sum()
    }

    pub fn out_links(&self, from: PartyId) -> &[(PartyId, PartyId, u32)] {
        let start = self.links.partition_point(|l| l.0 < from);
        let end = self.links.partition_point(|l| l.0 <= from);
        &self.links[start..end]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkVolumes {
    pub rounds: Vec<RoundLinks>,
}

impl LinkVolumes {
    pub fn round(&self, r: u32) -> Option<&RoundLinks> {
        self.rounds.get(r.checked_sub(1)? as usize)
    }

    pub fn total(&self) -> u64 {
        self.rounds.iter().map(RoundLinks::total).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PeelSummary {
    Relay {
        next: PartyId,
        nonce: Option<Nonce>,
    },
    /// `message: None` is a discarded dummy.
    Deliver {
        message: Option<Vec<u8>>,
    },
    Fail,
}

/// One onion as seen inside a monitored or corrupted party.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InternalRecord {
    pub round: u32,
    pub from: PartyId,
    pub onion_id: [u8; 16],
    pub peel: PeelSummary,
    /// Where the peeled onion went next and its identifier on that link.
    pub outgoing: Option<(PartyId, [u8; 16])>,
    pub dropped: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryLog {
    pub drops: Vec<DropRecord>,
    /// Bernoulli coins the strategy drew, in order.
    pub coins: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub class: AdversaryClass,
    pub link_volumes: LinkVolumes,
    pub internals: BTreeMap<PartyId, Vec<InternalRecord>>,
    pub adversary_randomness: Option<AdversaryLog>,
}

impl ViewRecord {
    /// Deterministic byte encoding used for equality comparisons.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("view serializes")
    }
}

/// Projects a full view onto what an adversary of `class` observes.
pub fn project_view(view: &ViewRecord, class: AdversaryClass) -> ViewRecord {
    ViewRecord {
        class,
        link_volumes: view.link_volumes.clone(),
        internals: match class {
            AdversaryClass::Network => BTreeMap::new(),
            _ => view.internals.clone(),
        },
        adversary_randomness: match class {
            AdversaryClass::Active => view.adversary_randomness.clone(),
            _ => None,
        },
    }
}

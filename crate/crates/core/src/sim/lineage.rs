//! Ground-truth onion lineage. Kept out of every view; analysis uses it to
//! account for drops and survivors exactly.

use serde::Serialize;

use crate::onion::PartyId;

pub type LineageId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OnionKind {
    Message {
        recipient: PartyId,
    },
    /// Checkpoint dummy whose nonce is revealed to `partner` at `round`.
    Checkpoint {
        round: u32,
        partner: PartyId,
    },
    /// Padding dummy (Π_n / Π_n⁺).
    Padding,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKind {
    Delivered,
    Discarded,
    Dropped { by: PartyId },
    Held { at: PartyId },
    Failed { at: PartyId },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LineageRecord {
    pub origin: PartyId,
    pub kind: OnionKind,
    /// Round in whose processing phase the onion was formed (0 = setup).
    pub formed_round: u32,
    /// `(r, how)`: the onion reached its end after arriving in round `r`.
    pub end: Option<(u32, EndKind)>,
}

impl LineageRecord {
    /// Links traversed. An onion that never ended traversed every round it was
    /// alive for, bounded by `rounds_run`.
    pub fn rounds_survived(&self, rounds_run: u32) -> u32 {
        match self.end {
            Some((r, _)) => r - self.formed_round,
            None => rounds_run - self.formed_round,
        }
    }

    /// Analysis-only mark: the onion was created between a corrupted party and
    /// anyone (its origin or its checkpoint partner is corrupted).
    pub fn marked(&self, corrupted: &[bool]) -> bool {
        corrupted[self.origin as usize]
            || match self.kind {
                OnionKind::Checkpoint { partner, .. } => corrupted[partner as usize],
                OnionKind::Message { recipient } => corrupted[recipient as usize],
                OnionKind::Padding => false,
            }
    }
}

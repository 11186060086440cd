//! Deterministic round-synchronous network simulator.

mod engine;
mod events;
mod input;
mod lineage;
mod view;

pub use engine::{run, Ctx, Envelope, Hop};
pub use events::{write_events, Event, EventKind};
pub use input::{input_distance, sender_message, InputError, InputVector, Message};
pub use lineage::{EndKind, LineageId, LineageRecord, OnionKind};
pub use view::{project_view, AdversaryLog, InternalRecord, LinkVolumes, PeelSummary, RoundLinks, ViewRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversaryClass, AdversaryError};
use crate::analysis::metrics::Metrics;
use crate::checkpoint::CheckpointError;
use crate::onion::{Backend, OnionError, PartyId};
use crate::protocols::ParamError;

pub const DEFAULT_PARTY_CAP: u32 = 1 << 16;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("malformed input: {0}")]
    Input(#[from] InputError),
    #[error("onion formation failed: {0}")]
    Onion(#[from] OnionError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("checkpoint setup: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("network config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NetworkConfig {
    pub parties: u32,
    pub servers: Vec<PartyId>,
    /// Round budget; protocols needing more rounds are truncated.
    pub rounds: u32,
    pub seed: u64,
    pub backend: Backend,
    pub party_cap: u32,
    pub record_events: bool,
    pub message_len: usize,
}

impl NetworkConfig {
    pub fn new(parties: u32, seed: u64) -> Self {
        Self {
            parties,
            servers: Vec::new(),
            rounds: u32::MAX,
            seed,
            backend: Backend::Ideal,
            party_cap: DEFAULT_PARTY_CAP,
            record_events: false,
            message_len: 64,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.parties == 0 || self.parties > self.party_cap {
            return Err(SimError::Config(format!(
                "party count {} outside [1, {}]",
                self.parties, self.party_cap
            )));
        }
        if let Some(s) = self.servers.iter().find(|&&s| s >= self.parties) {
            return Err(SimError::Config(format!("server {s} is not a party")));
        }
        Ok(())
    }
}

/// Raw counters accumulated by the engine.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// Γ: onion-link traversals including dummies.
    pub onions_sent: u64,
    /// |M(σ)|.
    pub messages: u64,
    pub rounds_run: u32,
    pub last_delivery_round: Option<u32>,
    pub last_abort_round: Option<u32>,
    /// Onions received by server parties, per round.
    pub server_receipts: Vec<u64>,
    pub server_count: u32,
    /// Inclusive range of rounds in which servers process.
    pub server_rounds: (u32, u32),
    pub drops: u64,
    pub fails: u64,
    pub anomalies: u64,
    pub overflows: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub parties: u32,
    /// Sorted delivered messages per party.
    pub outputs: Vec<Vec<Message>>,
    pub aborted: Vec<Option<u32>>,
    pub stats: RunStats,
    pub metrics: Metrics,
    pub view: ViewRecord,
    /// The adversary's party set (monitored or corrupted), sorted.
    pub adversary_parties: Vec<PartyId>,
    pub truncated: Option<String>,
    #[serde(skip)]
    pub lineage: Vec<LineageRecord>,
    #[serde(skip)]
    pub events: Option<Vec<Event>>,
}

impl RunReport {
    pub fn extract_view(&self, class: AdversaryClass) -> ViewRecord {
        project_view(&self.view, class)
    }

    pub fn any_abort(&self) -> bool {
        self.aborted.iter().any(Option::is_some)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CorrectnessResult {
    pub correct: bool,
    /// `(recipient, message)` pairs in M(σ) that were not delivered.
    pub missing: Vec<(PartyId, Message)>,
    /// Delivered pairs that are not in M(σ).
    pub unexpected: Vec<(PartyId, Message)>,
}

/// Multiset comparison of outputs against `M(σ)`, per recipient.
pub fn correctness_check(report: &RunReport, input: &InputVector) -> CorrectnessResult {
    let expected = input.expected_outputs();
    let mut missing = Vec::new();
    let mut unexpected = Vec::new();
    for (j, (want, got)) in expected.iter().zip(&report.outputs).enumerate() {
        let (mut a, mut b) = (0, 0);
        while a < want.len() || b < got.len() {
            match (want.get(a), got.get(b)) {
                (Some(x), Some(y)) if x == y => {
                    a += 1;
                    b += 1;
                }
                (Some(x), Some(y)) if x < y => {
                    missing.push((j as PartyId, x.clone()));
                    a += 1;
                }
                (Some(x), None) => {
                    missing.push((j as PartyId, x.clone()));
                    a += 1;
                }
                (_, Some(y)) => {
                    unexpected.push((j as PartyId, y.clone()));
                    b += 1;
                }
                (None, None) => unreachable!(),
            }
        }
    }
    CorrectnessResult {
        correct: missing.is_empty() && unexpected.is_empty(),
        missing,
        unexpected,
    }
}

/// A party behavior plugged into the engine.
pub trait Protocol<S: crate::onion::OnionScheme> {
    /// Rounds from first transmission to final delivery.
    fn rounds(&self) -> u32;

    /// Parties whose per-round receipts define server load.
    fn servers(&self) -> Vec<PartyId>;

    /// Inclusive range of rounds in which servers process onions.
    fn server_rounds(&self) -> (u32, u32);

    fn validate_input(&self, input: &InputVector) -> Result<(), SimError>;

    /// Off-line setup: form the onions transmitted in round 1.
    fn setup(&mut self, input: &InputVector, ctx: &mut Ctx<'_, S>) -> Result<(), SimError>;

    /// Processing phase after round `round` for a party that has not aborted.
    fn process(&mut self, party: PartyId, round: u32, inbox: &mut Vec<Envelope<S::Onion>>, ctx: &mut Ctx<'_, S>);
}

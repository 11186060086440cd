//! Onion routing scheme: key generation, formation and peeling.
//!
//! Two interchangeable backends implement [`OnionScheme`]:
//! [`IdealScheme`] models idealized encryption with information-free random
//! handles resolved by a per-run table, and [`RealScheme`] is a fixed-size
//! layered construction over ristretto255 with ChaCha20-Poly1305.

pub mod ideal;
pub mod probe;
pub mod real;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ideal::{IdealOnion, IdealPublicKey, IdealScheme, IdealSecretKey};
pub use probe::{unlinkability_probe, OnionSpec, ProbeReport};
pub use real::{RealOnion, RealScheme, DEFAULT_MAX_HOPS, DEFAULT_MESSAGE_LEN};

pub type PartyId = u32;

/// Sentinel for "no party".
pub const NO_PARTY: PartyId = u32::MAX;

pub const NONCE_LEN: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OnionError {
    #[error("routing path is empty")]
    EmptyPath,
    #[error("hop {hop} names party {party}, outside [0, {parties})")]
    HopOutOfRange { hop: usize, party: PartyId, parties: u32 },
    #[error("path has {path} hops but {keys} public keys were supplied")]
    KeyCountMismatch { path: usize, keys: usize },
    #[error("path has {path} hops and needs {expected} nonce slots, got {nonces}")]
    NonceCountMismatch {
        path: usize,
        nonces: usize,
        expected: usize,
    },
    #[error("message of {len} bytes exceeds the {max}-byte message space")]
    MessageTooLong { len: usize, max: usize },
    #[error("path of {len} hops exceeds the backend maximum of {max}")]
    PathTooLong { len: usize, max: usize },
    #[error("public key does not belong to hop {hop}")]
    ForeignKey { hop: usize },
    #[error("operation unsupported by the {0} backend")]
    Unsupported(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonceTag {
    Checkpoint,
    Opaque,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Nonce {
    pub tag: NonceTag,
    pub value: [u8; NONCE_LEN],
}

impl Nonce {
    pub fn checkpoint(value: [u8; NONCE_LEN]) -> Self {
        Self {
            tag: NonceTag::Checkpoint,
            value,
        }
    }
}

/// Per-layer nonces. Entry `r - 1` belongs to the layer peeled by hop `r`; it
/// is revealed by that peel and by no other. A path of `L + 1` hops has `L`
/// intermediate layers and therefore `L` entries.
pub type NonceList = Vec<Option<Nonce>>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RoutingPath {
    hops: Vec<PartyId>,
}

impl RoutingPath {
    pub fn new(hops: Vec<PartyId>, parties: u32) -> Result<Self, OnionError> {
        if hops.is_empty() {
            return Err(OnionError::EmptyPath);
        }
        if let Some((hop, &party)) = hops.iter().enumerate().find(|(_, &p)| p >= parties) {
            return Err(OnionError::HopOutOfRange { hop, party, parties });
        }
        Ok(Self { hops })
    }

    pub fn hops(&self) -> &[PartyId] {
        &self.hops
    }

    pub fn recipient(&self) -> PartyId {
        *self.hops.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of relaying layers (`L` for a path of `L + 1` hops).
    pub fn intermediate_len(&self) -> usize {
        self.hops.len() - 1
    }
}

/// What the innermost layer carries. `Message(vec![])` is the empty message ⊥;
/// `Dummy` marks a content-free onion that its final hop discards.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Message(Vec<u8>),
    Dummy,
}

impl Payload {
    pub fn byte_len(&self) -> usize {
        match self {
            Payload::Message(m) => m.len(),
            Payload::Dummy => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PeelResult<O> {
    Relay {
        next: PartyId,
        inner: O,
        nonce: Option<Nonce>,
    },
    Deliver(Payload),
    Fail,
}

#[derive(Clone, Debug)]
pub struct KeyPair<P, S> {
    pub public_key: P,
    pub secret_key: S,
    pub party: PartyId,
}

pub trait OnionScheme {
    type PublicKey: Clone + Send + Sync;
    type SecretKey: Send + Sync;
    type Onion: Clone + Send + Sync;
    /// Stream used for formation randomness (handles, ephemeral keys).
    type FormRng: RngCore + rand::SeedableRng<Seed = [u8; 32]>;

    const BACKEND: Backend;

    /// Registers `party` and returns its key pair. `security_param` must be ≥ 1;
    /// the ideal backend ignores its magnitude, the real one is fixed at 128.
    fn gen<R: RngCore + rand::CryptoRng>(
        &mut self,
        security_param: u32,
        party: PartyId,
        rng: &mut R,
    ) -> KeyPair<Self::PublicKey, Self::SecretKey>;

    /// Forms the full sequence `O_1 … O_{L+1}`; `O_1` is the one to transmit.
    fn form_onion<R: RngCore>(
        &mut self,
        payload: &Payload,
        path: &RoutingPath,
        public_keys: &[&Self::PublicKey],
        nonces: &[Option<Nonce>],
        rng: &mut R,
    ) -> Result<Vec<Self::Onion>, OnionError>;

    /// Like [`form_onion`](Self::form_onion) but only returns `O_1`; backends
    /// may skip materializing the inner layers for the caller.
    fn form_first<R: RngCore>(
        &mut self,
        payload: &Payload,
        path: &RoutingPath,
        public_keys: &[&Self::PublicKey],
        nonces: &[Option<Nonce>],
        rng: &mut R,
    ) -> Result<Self::Onion, OnionError> {
        let mut all = self.form_onion(payload, path, public_keys, nonces, rng)?;
        Ok(all.swap_remove(0))
    }

    fn proc_onion(&self, secret_key: &Self::SecretKey, onion: &Self::Onion) -> PeelResult<Self::Onion>;

    /// Drops per-run state (keys, oracle tables) while keeping allocations.
    fn reset(&mut self) {}

    /// Identifier an observer without keys would record for this onion.
    fn observed_id(&self, onion: &Self::Onion) -> [u8; 16];

    fn size_class(&self) -> u32;

    fn byte_len(&self, onion: &Self::Onion) -> usize;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Ideal,
    Real,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Ideal => "ideal",
            Backend::Real => "real",
        })
    }
}

pub(crate) fn check_shapes<K>(
    payload: &Payload,
    path: &RoutingPath,
    keys: &[K],
    nonces: &[Option<Nonce>],
    max_message: usize,
) -> Result<(), OnionError> {
    if keys.len() != path.len() {
        return Err(OnionError::KeyCountMismatch {
            path: path.len(),
            keys: keys.len(),
        });
    }
    if nonces.len() != path.intermediate_len() {
        return Err(OnionError::NonceCountMismatch {
            path: path.len(),
            nonces: nonces.len(),
            expected: path.intermediate_len(),
        });
    }
    if payload.byte_len() > max_message {
        return Err(OnionError::MessageTooLong {
            len: payload.byte_len(),
            max: max_message,
        });
    }
    Ok(())
}

/// Peels `first` along `path`, returning every intermediate onion and the
/// nonces revealed at each hop. Used by tests and probes.
pub fn peel_chain<S: OnionScheme>(
    scheme: &S,
    secret_keys: &[&S::SecretKey],
    first: &S::Onion,
) -> (Vec<S::Onion>, Vec<Option<Nonce>>, PeelResult<S::Onion>) {
    let mut onions = vec![first.clone()];
    let mut nonces = Vec::new();
    for sk in secret_keys {
        let cur = onions.last().unwrap();
        match scheme.proc_onion(sk, cur) {
            PeelResult::Relay { inner, nonce, .. } => {
                nonces.push(nonce);
                onions.push(inner);
            }
            other => return (onions, nonces, other),
        }
    }
    (onions, nonces, PeelResult::Fail)
}

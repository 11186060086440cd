//! Pairwise checkpoint material: DH-derived shared keys, the keyed PRF, the
//! per-round decision bit and checkpoint nonces.

mod group;
mod prf;
mod schedule;

pub use group::{derive_shared_key, DhKeyPair, GroupParams, SharedKey};
pub use prf::{checkpoint_decision, checkpoint_nonce, HmacPrf, PairPrf, RandomFunction, DOMAIN_BIT, DOMAIN_NONCE};
pub use schedule::{build_checkpoint_schedule, checkpoint_frequency, schedule_for, CheckpointSpec, PairKeys};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("secret exponent is zero")]
    ZeroSecret,
    #[error("public element is not a valid group encoding")]
    InvalidEncoding,
    #[error("public element is the identity")]
    IdentityElement,
    #[error("frequency {0} outside [0, 1]")]
    Frequency(f64),
}

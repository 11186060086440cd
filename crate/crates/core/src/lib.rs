//! Round-based onion-routing simulator with idealized and real layered
//! encryption, checkpoint-based drop detection, adversary models and the
//! statistics used to judge privacy and efficiency claims empirically.

pub mod adversary;
pub mod analysis;
pub mod checkpoint;
pub mod experiment;
pub mod onion;
pub mod protocols;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use adversary::{Adversary, AdversaryClass, AdversaryConfig, Selection, Strategy};
pub use onion::ideal::IdealScheme;
pub use onion::real::RealScheme;
pub use onion::{Backend, OnionScheme, PartyId, Payload, PeelResult, RoutingPath};
pub use protocols::{AnyProtocol, ProtocolId, ProtocolParams};
pub use sim::{run, InputVector, NetworkConfig, RunReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Concrete `f64` instantiations of the generic analysis types.
pub type BeliefVector = analysis::belief::BeliefVector<f64>;
pub type TvEstimate = analysis::estimate::TvEstimate<f64>;
pub type DpEstimate = analysis::estimate::DpEstimate<f64>;
pub type RatioOracleReport = analysis::oracles::RatioOracleReport<f64>;
pub type TailBoundReport = analysis::oracles::TailBoundReport<f64>;

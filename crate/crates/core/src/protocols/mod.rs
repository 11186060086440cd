//! Π_p, Π_a, Π_n and Π_n⁺ as party behaviors for the simulator.

pub mod butterfly;
pub mod params;
pub mod pi_a;
pub mod pi_n;
pub mod pi_n_plus;
pub mod pi_p;

pub use butterfly::{butterfly_digit, butterfly_neighbors, butterfly_path};
pub use params::{abort_threshold, alpha_beta_min, d_prime, ParamError, PrfMode, ProtocolId, ProtocolParams};
pub use pi_a::PiA;
pub use pi_n::PiN;
pub use pi_n_plus::PiNPlus;
pub use pi_p::PiP;

use crate::onion::{OnionScheme, PartyId};
use crate::sim::{Ctx, Envelope, InputVector, Protocol, SimError};

/// Runtime-selected protocol.
#[derive(Debug)]
pub enum AnyProtocol {
    PiP(PiP),
    PiA(PiA),
    PiN(PiN),
    PiNPlus(PiNPlus),
}

impl AnyProtocol {
    pub fn new(id: ProtocolId, params: &ProtocolParams) -> Result<Self, ParamError> {
        Ok(match id {
            ProtocolId::PiP => Self::PiP(PiP::new(params)?),
            ProtocolId::PiA => Self::PiA(PiA::new(params)?),
            ProtocolId::PiN => Self::PiN(PiN::new(params)?),
            ProtocolId::PiNPlus => Self::PiNPlus(PiNPlus::new(params)?),
        })
    }

    pub fn id(&self) -> ProtocolId {
        match self {
            Self::PiP(_) => ProtocolId::PiP,
            Self::PiA(_) => ProtocolId::PiA,
            Self::PiN(_) => ProtocolId::PiN,
            Self::PiNPlus(_) => ProtocolId::PiNPlus,
        }
    }
}

macro_rules! each {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            AnyProtocol::PiP($p) => $e,
            AnyProtocol::PiA($p) => $e,
            AnyProtocol::PiN($p) => $e,
            AnyProtocol::PiNPlus($p) => $e,
        }
    };
}

impl<S: OnionScheme> Protocol<S> for AnyProtocol {
    fn rounds(&self) -> u32 {
        each!(self, p => Protocol::<S>::rounds(p))
    }

    fn servers(&self) -> Vec<PartyId> {
        each!(self, p => Protocol::<S>::servers(p))
    }

    fn server_rounds(&self) -> (u32, u32) {
        each!(self, p => Protocol::<S>::server_rounds(p))
    }

    fn validate_input(&self, input: &InputVector) -> Result<(), SimError> {
        each!(self, p => Protocol::<S>::validate_input(p, input))
    }

    fn setup(&mut self, input: &InputVector, ctx: &mut Ctx<'_, S>) -> Result<(), SimError> {
        each!(self, p => p.setup(input, ctx))
    }

    fn process(&mut self, party: PartyId, round: u32, inbox: &mut Vec<Envelope<S::Onion>>, ctx: &mut Ctx<'_, S>) {
        each!(self, p => p.process(party, round, inbox, ctx))
    }
}

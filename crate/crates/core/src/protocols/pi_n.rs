use rand::Rng;

use super::{ParamError, ProtocolId, ProtocolParams};
use crate::onion::{OnionScheme, PartyId, Payload, PeelResult};
use crate::sim::{Ctx, Envelope, InputVector, OnionKind, Protocol, SimError};

/// Three rounds: user → T_1, T_1 → T_2 in packets padded to `k`, T_2 → recipient.
///
/// T_1 is drawn from the sender's coins and T_2 from a stream keyed by the
/// recipient, so with shared seeds every link count is the same for any
/// permutation input as long as no packet overflows.
#[derive(Clone, Debug)]
pub struct PiN {
    servers: u32,
    packet: u32,
    counts: Vec<u32>,
}

impl PiN {
    pub fn new(params: &ProtocolParams) -> Result<Self, ParamError> {
        params.validate(ProtocolId::PiN)?;
        Ok(Self {
            servers: params.servers,
            packet: params.pi_n_packet(),
            counts: vec![0; params.servers as usize],
        })
    }

    pub fn packet_size(&self) -> u32 {
        self.packet
    }
}

impl<S: OnionScheme> Protocol<S> for PiN {
    fn rounds(&self) -> u32 {
        3
    }

    fn servers(&self) -> Vec<PartyId> {
        (0..self.servers).collect()
    }

    fn server_rounds(&self) -> (u32, u32) {
        (1, 2)
    }

    fn validate_input(&self, input: &InputVector) -> Result<(), SimError> {
        Ok(input.check_simple()?)
    }

    fn setup(&mut self, input: &InputVector, ctx: &mut Ctx<'_, S>) -> Result<(), SimError> {
        for (i, pairs) in input.parties.iter().enumerate() {
            let i = i as PartyId;
            let (m, j) = &pairs[0];
            let t1 = ctx.party_rng(i).gen_range(0..self.servers);
            let t2 = ctx.aux_rng("pi_n/second-hop", *j as u64).gen_range(0..self.servers);
            ctx.send_new(
                i,
                &Payload::Message(m.clone()),
                vec![t1, t2, *j],
                &[None, None],
                OnionKind::Message { recipient: *j },
            )?;
        }
        Ok(())
    }

    fn process(&mut self, party: PartyId, round: u32, inbox: &mut Vec<Envelope<S::Onion>>, ctx: &mut Ctx<'_, S>) {
        let first_hop = round == 1 && party < self.servers;
        if first_hop {
            self.counts.iter_mut().for_each(|c| *c = 0);
        }
        for env in inbox.drain(..) {
            let (res, hop) = ctx.peel(party, &env);
            if first_hop {
                if let PeelResult::Relay { next, .. } = &res {
                    if let Some(c) = self.counts.get_mut(*next as usize) {
                        *c += 1;
                    }
                }
            }
            ctx.route(party, res, hop);
        }
        if first_hop {
            for s in 0..self.servers {
                let real = self.counts[s as usize];
                if real > self.packet {
                    ctx.overflow(party, s);
                }
                for _ in real..self.packet {
                    ctx.send_new(party, &Payload::Dummy, vec![s], &[], OnionKind::Padding)
                        .expect("single-hop dummy to a server is well formed");
                }
            }
        }
    }
}

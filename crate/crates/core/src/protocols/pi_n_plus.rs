use rand::Rng;

use super::{butterfly_digit, butterfly_neighbors, butterfly_path, ParamError, ProtocolId, ProtocolParams};
use crate::onion::{Nonce, OnionScheme, PartyId, Payload, PeelResult};
use crate::sim::{Ctx, Envelope, InputVector, OnionKind, Protocol, SimError};

/// Butterfly routing over `n′ = B^{H−1}` processor nodes (parties `0..n′`):
/// each edge carries a packet padded to `k = (1+d) α log²λ`; H+1 rounds.
#[derive(Clone, Debug)]
pub struct PiNPlus {
    b: u32,
    h: u32,
    nodes: u32,
    packet: u32,
    counts: Vec<u32>,
    none: Vec<Option<Nonce>>,
}

impl PiNPlus {
    pub fn new(params: &ProtocolParams) -> Result<Self, ParamError> {
        params.validate(ProtocolId::PiNPlus)?;
        let nodes = params.butterfly_nodes().expect("validated");
        Ok(Self {
            b: params.branching,
            h: params.height,
            nodes,
            packet: params.pi_n_plus_packet(),
            counts: vec![0; params.branching as usize],
            none: vec![None; params.height as usize],
        })
    }

    pub fn packet_size(&self) -> u32 {
        self.packet
    }

    pub fn nodes(&self) -> u32 {
        self.nodes
    }
}

impl<S: OnionScheme> Protocol<S> for PiNPlus {
    fn rounds(&self) -> u32 {
        self.h + 1
    }

    fn servers(&self) -> Vec<PartyId> {
        (0..self.nodes).collect()
    }

    fn server_rounds(&self) -> (u32, u32) {
        (1, self.h)
    }

    fn validate_input(&self, input: &InputVector) -> Result<(), SimError> {
        Ok(input.check_simple()?)
    }

    fn setup(&mut self, input: &InputVector, ctx: &mut Ctx<'_, S>) -> Result<(), SimError> {
        for (i, pairs) in input.parties.iter().enumerate() {
            let i = i as PartyId;
            let (m, j) = &pairs[0];
            let entry = ctx.party_rng(i).gen_range(0..self.nodes);
            let exit = ctx.aux_rng("pi_n_plus/exit", *j as u64).gen_range(0..self.nodes);
            let mut hops = butterfly_path(entry, exit, self.b, self.h)?;
            hops.push(*j);
            ctx.send_new(
                i,
                &Payload::Message(m.clone()),
                hops,
                &self.none,
                OnionKind::Message { recipient: *j },
            )?;
        }
        Ok(())
    }

    fn process(&mut self, party: PartyId, round: u32, inbox: &mut Vec<Envelope<S::Onion>>, ctx: &mut Ctx<'_, S>) {
        let switching = round < self.h && party < self.nodes;
        if switching {
            self.counts.iter_mut().for_each(|c| *c = 0);
        }
        for env in inbox.drain(..) {
            let (res, hop) = ctx.peel(party, &env);
            if switching {
                if let PeelResult::Relay { next, .. } = &res {
                    if *next < self.nodes {
                        self.counts[butterfly_digit(*next, round, self.b, self.h) as usize] += 1;
                    }
                }
            }
            ctx.route(party, res, hop);
        }
        if switching {
            for nb in butterfly_neighbors(party, round, self.b, self.h) {
                let real = self.counts[butterfly_digit(nb, round, self.b, self.h) as usize];
                if real > self.packet {
                    ctx.overflow(party, nb);
                }
                for _ in real..self.packet {
                    ctx.send_new(party, &Payload::Dummy, vec![nb], &[], OnionKind::Padding)
                        .expect("single-hop dummy to a node is well formed");
                }
            }
        }
    }
}

use rand::Rng;

use super::{ParamError, ProtocolId, ProtocolParams};
use crate::onion::{Nonce, OnionScheme, PartyId, Payload};
use crate::sim::{Ctx, Envelope, InputVector, OnionKind, Protocol, SimError};

/// Every user sends one onion through `L` uniform i.i.d. servers; servers peel
/// and forward in random order.
#[derive(Clone, Debug)]
pub struct PiP {
    servers: Vec<PartyId>,
    path_len: u32,
    none: Vec<Option<Nonce>>,
}

impl PiP {
    pub fn new(params: &ProtocolParams) -> Result<Self, ParamError> {
        params.validate(ProtocolId::PiP)?;
        Ok(Self {
            servers: params.server_ids(),
            path_len: params.path_len,
            none: vec![None; params.path_len as usize],
        })
    }

    /// `(T_1, …, T_L, recipient)`.
    pub fn draw_path<R: Rng>(&self, rng: &mut R, recipient: PartyId) -> Vec<PartyId> {
        let mut hops: Vec<PartyId> = (0..self.path_len)
            .map(|_| self.servers[rng.gen_range(0..self.servers.len())])
            .collect();
        hops.push(recipient);
        hops
    }
}

impl<S: OnionScheme> Protocol<S> for PiP {
    fn rounds(&self) -> u32 {
        self.path_len + 1
    }

    fn servers(&self) -> Vec<PartyId> {
        self.servers.clone()
    }

    fn server_rounds(&self) -> (u32, u32) {
        (1, self.path_len)
    }

    fn validate_input(&self, input: &InputVector) -> Result<(), SimError> {
        Ok(input.check_simple()?)
    }

    fn setup(&mut self, input: &InputVector, ctx: &mut Ctx<'_, S>) -> Result<(), SimError> {
        for (i, pairs) in input.parties.iter().enumerate() {
            let i = i as PartyId;
            let (m, j) = &pairs[0];
            let hops = self.draw_path(ctx.party_rng(i), *j);
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

    fn process(&mut self, party: PartyId, _round: u32, inbox: &mut Vec<Envelope<S::Onion>>, ctx: &mut Ctx<'_, S>) {
        for env in inbox.drain(..) {
            let (res, hop) = ctx.peel(party, &env);
            ctx.route(party, res, hop);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    #[test]
    fn hop_marginal_is_uniform_over_servers() {
        let p = PiP::new(&ProtocolParams {
            parties: 16,
            servers: 4,
            path_len: 3,
            ..Default::default()
        })
        .unwrap();
        let mut rng = SimRng::seed_from_u64(3);
        let mut hits = [0u32; 4];
        let draws = 100_000 / 3 + 1;
        for _ in 0..draws {
            let path = p.draw_path(&mut rng, 9);
            assert_eq!(path.len(), 4);
            assert_eq!(path[3], 9);
            for &h in &path[..3] {
                hits[h as usize] += 1;
            }
        }
        let total = (draws * 3) as f64;
        for h in hits {
            assert!((h as f64 / total - 0.25).abs() < 0.25 * 0.02, "{h}");
        }
    }
}

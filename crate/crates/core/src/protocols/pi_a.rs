use rand::distributions::{Distribution, Uniform};

use super::{ParamError, PrfMode, ProtocolId, ProtocolParams};
use crate::checkpoint::{CheckpointSpec, DhKeyPair, HmacPrf, PairKeys, RandomFunction};
use crate::onion::{Nonce, OnionScheme, PartyId, Payload};
use crate::rng::crypto_rng;
use crate::sim::{Ctx, Envelope, InputVector, OnionKind, Protocol, SimError};

/// Message onions over uniform paths plus checkpoint dummies; every party
/// counts missing checkpoint nonces each round and aborts above `t`.
#[derive(Clone, Debug)]
pub struct PiA {
    parties: u32,
    path_len: u32,
    threshold: f64,
    frequency: f64,
    session: u64,
    prf: PrfMode,
    cumulative: bool,
    /// Expected nonces, grouped by `(party, round)`; see `offsets`.
    expected: Vec<Nonce>,
    offsets: Vec<u32>,
    missing_total: Vec<u32>,
    matched: Vec<bool>,
    nonces: Vec<Option<Nonce>>,
}

impl PiA {
    pub fn new(params: &ProtocolParams) -> Result<Self, ParamError> {
        params.validate(ProtocolId::PiA)?;
        let l = params.pi_a_path_len();
        Ok(Self {
            parties: params.parties,
            path_len: l,
            threshold: params.abort_threshold(),
            frequency: params.checkpoint_frequency(),
            session: params.session,
            prf: params.prf,
            cumulative: params.cumulative_missing,
            expected: Vec::new(),
            offsets: Vec::new(),
            missing_total: vec![0; params.parties as usize],
            matched: Vec::new(),
            nonces: vec![None; l as usize],
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn path_len(&self) -> u32 {
        self.path_len
    }

    fn schedules<S: OnionScheme>(&self, ctx: &Ctx<'_, S>) -> Result<Vec<Vec<CheckpointSpec>>, SimError> {
        let n = self.parties as usize;
        Ok(match self.prf {
            PrfMode::RandomFunction => {
                let keys = PairKeys::random(n, &mut ctx.aux_rng("pi_a/pair-keys", 0));
                let rf = RandomFunction::new(ctx.aux_rng("pi_a/random-function", 0));
                keys.all_schedules(&rf, self.session, self.path_len, self.frequency)
            }
            PrfMode::Hmac => {
                let pairs: Vec<DhKeyPair> = (0..n as u64)
                    .map(|i| DhKeyPair::generate(&mut crypto_rng(ctx.seed(), "pi_a/dh", i, 0)))
                    .collect();
                PairKeys::from_dh(&pairs)?.all_schedules(&HmacPrf, self.session, self.path_len, self.frequency)
            }
        })
    }

    fn expected_at(&self, party: PartyId, round: u32) -> std::ops::Range<usize> {
        if round == 0 || round > self.path_len {
            return 0..0;
        }
        let idx = party as usize * self.path_len as usize + round as usize - 1;
        self.offsets[idx] as usize..self.offsets[idx + 1] as usize
    }
}

impl<S: OnionScheme> Protocol<S> for PiA {
    fn rounds(&self) -> u32 {
        self.path_len + 1
    }

    fn servers(&self) -> Vec<PartyId> {
        (0..self.parties).collect()
    }

    fn server_rounds(&self) -> (u32, u32) {
        (1, self.path_len)
    }

    fn validate_input(&self, _input: &InputVector) -> Result<(), SimError> {
        Ok(())
    }

    fn setup(&mut self, input: &InputVector, ctx: &mut Ctx<'_, S>) -> Result<(), SimError> {
        let n = self.parties;
        let l = self.path_len as usize;
        let schedules = self.schedules(ctx)?;

        self.expected.clear();
        self.offsets.clear();
        self.offsets.push(0);
        for sched in &schedules {
            let mut it = sched.iter().peekable();
            for r in 1..=self.path_len {
                while let Some(spec) = it.next_if(|s| s.round == r) {
                    self.expected.push(spec.nonce);
                }
                self.offsets.push(self.expected.len() as u32);
            }
        }

        let hop = Uniform::new(0, n);
        for (i, pairs) in input.parties.iter().enumerate() {
            let i = i as PartyId;
            for (m, j) in pairs {
                let rng = ctx.party_rng(i);
                let mut hops: Vec<PartyId> = (0..l).map(|_| hop.sample(rng)).collect();
                hops.push(*j);
                ctx.send_new(
                    i,
                    &Payload::Message(m.clone()),
                    hops,
                    &self.nonces,
                    OnionKind::Message { recipient: *j },
                )?;
            }
            for spec in &schedules[i as usize] {
                let r = spec.round as usize;
                let rng = ctx.party_rng(i);
                let hops: Vec<PartyId> = (1..=l + 1)
                    .map(|pos| if pos == r { spec.partner } else { hop.sample(rng) })
                    .collect();
                self.nonces[r - 1] = Some(spec.nonce);
                let sent = ctx.send_new(
                    i,
                    &Payload::Dummy,
                    hops,
                    &self.nonces,
                    OnionKind::Checkpoint {
                        round: spec.round,
                        partner: spec.partner,
                    },
                );
                self.nonces[r - 1] = None;
                sent?;
            }
        }
        Ok(())
    }

    fn process(&mut self, party: PartyId, round: u32, inbox: &mut Vec<Envelope<S::Onion>>, ctx: &mut Ctx<'_, S>) {
        let range = self.expected_at(party, round);
        let expected = &self.expected[range];
        self.matched.clear();
        self.matched.resize(expected.len(), false);
        let mut hits = 0usize;
        let matched = &mut self.matched;
        ctx.process_inbox(party, inbox, |nonce| {
            match expected.iter().zip(matched.iter()).position(|(e, &m)| !m && e == nonce) {
                Some(idx) => {
                    matched[idx] = true;
                    hits += 1;
                    true
                }
                None => false,
            }
        });
        let missing = (expected.len() - hits) as u32;
        let counted = if self.cumulative {
            self.missing_total[party as usize] += missing;
            self.missing_total[party as usize]
        } else {
            missing
        };
        if counted as f64 > self.threshold && !ctx.is_corrupted(party) {
            ctx.abort(party);
        }
    }
}

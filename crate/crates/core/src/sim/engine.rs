use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::{
    EndKind, Event, EventKind, InputVector, InternalRecord, LineageId, LineageRecord, LinkVolumes, Message,
    NetworkConfig, OnionKind, PeelSummary, Protocol, RoundLinks, RunReport, RunStats, SimError, ViewRecord,
};
use crate::adversary::{Adversary, AdversaryClass, Decision};
use crate::analysis::metrics::run_metrics;
use crate::onion::{KeyPair, Nonce, OnionScheme, PartyId, Payload, PeelResult, RoutingPath};
use crate::rng::{crypto_rng, derive_seed, derive_u64, sim_rng, SimRng};

const NO_RECORD: u32 = u32::MAX;

/// An onion in transit. `lineage` is the simulator's hidden ground-truth id.
#[derive(Clone, Debug)]
pub struct Envelope<O> {
    pub from: PartyId,
    pub onion: O,
    pub lineage: LineageId,
}

/// Bookkeeping for one peeled onion, handed back to the engine on forward/deliver.
#[derive(Clone, Copy, Debug)]
pub struct Hop {
    pub from: PartyId,
    pub lineage: LineageId,
    pub revealed_nonce: bool,
    record: u32,
}

/// Everything a party behavior may touch during setup and processing.
pub struct Ctx<'a, S: OnionScheme> {
    scheme: &'a mut S,
    keys: Vec<KeyPair<S::PublicKey, S::SecretKey>>,
    n: u32,
    seed: u64,
    round: u32,
    outboxes: Vec<Vec<(PartyId, Envelope<S::Onion>)>>,
    lineage: Vec<LineageRecord>,
    party_rngs: Vec<SimRng>,
    form_rngs: Vec<S::FormRng>,
    adversary: Adversary,
    internals: Vec<Vec<InternalRecord>>,
    events: Option<Vec<Event>>,
    outputs: Vec<Vec<Message>>,
    aborted: Vec<Option<u32>>,
    stats: RunStats,
    size_class: u32,
}

impl<'a, S: OnionScheme> Ctx<'a, S> {
    pub fn parties(&self) -> u32 {
        self.n
    }

    /// Current round (0 during setup).
    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn is_corrupted(&self, party: PartyId) -> bool {
        self.adversary.acts(party)
    }

    pub fn public_key(&self, party: PartyId) -> &S::PublicKey {
        &self.keys[party as usize].public_key
    }

    /// The party's own protocol coins.
    pub fn party_rng(&mut self, party: PartyId) -> &mut SimRng {
        &mut self.party_rngs[party as usize]
    }

    /// A run-scoped auxiliary stream keyed by `(label, a)`.
    pub fn aux_rng(&self, label: &str, a: u64) -> SimRng {
        sim_rng(self.seed, label, a, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn log(&mut self, round: u32, from: PartyId, to: PartyId, kind: EventKind) {
        if let Some(ev) = self.events.as_mut() {
            ev.push(Event {
                round,
                from,
                to,
                size_class: self.size_class,
                kind,
            });
        }
    }

    #[inline]
    fn end(&mut self, lineage: LineageId, how: EndKind) {
        self.lineage[lineage as usize].end = Some((self.round, how));
    }

    /// Forms a new onion at `party` and queues it for the next transmission.
    pub fn send_new(
        &mut self,
        party: PartyId,
        payload: &Payload,
        hops: Vec<PartyId>,
        nonces: &[Option<Nonce>],
        kind: OnionKind,
    ) -> Result<(), SimError> {
        let path = RoutingPath::new(hops, self.n)?;
        let pks: Vec<&S::PublicKey> = path.hops().iter().map(|&h| &self.keys[h as usize].public_key).collect();
        let onion = self
            .scheme
            .form_first(payload, &path, &pks, nonces, &mut self.form_rngs[party as usize])?;
        let id = self.lineage.len() as LineageId;
        self.lineage.push(LineageRecord {
            origin: party,
            kind,
            formed_round: self.round,
            end: None,
        });
        self.outboxes[party as usize].push((
            path.hops()[0],
            Envelope {
                from: party,
                onion,
                lineage: id,
            },
        ));
        Ok(())
    }

    /// Peels an arrived onion with `party`'s key, recording internals when the
    /// adversary observes this party.
    #[inline(always)]
    pub fn peel(&mut self, party: PartyId, env: &Envelope<S::Onion>) -> (PeelResult<S::Onion>, Hop) {
        let res = self
            .scheme
            .proc_onion(&self.keys[party as usize].secret_key, &env.onion);
        let revealed_nonce = matches!(res, PeelResult::Relay { nonce: Some(_), .. });
        let mut record = NO_RECORD;
        if self.adversary.observes(party) {
            let peel = match &res {
                PeelResult::Relay { next, nonce, .. } => PeelSummary::Relay {
                    next: *next,
                    nonce: *nonce,
                },
                PeelResult::Deliver(Payload::Message(m)) => PeelSummary::Deliver {
                    message: Some(m.clone()),
                },
                PeelResult::Deliver(Payload::Dummy) => PeelSummary::Deliver { message: None },
                PeelResult::Fail => PeelSummary::Fail,
            };
            let recs = &mut self.internals[party as usize];
            record = recs.len() as u32;
            recs.push(InternalRecord {
                round: self.round,
                from: env.from,
                onion_id: self.scheme.observed_id(&env.onion),
                peel,
                outgoing: None,
                dropped: false,
            });
        }
        (
            res,
            Hop {
                from: env.from,
                lineage: env.lineage,
                revealed_nonce,
                record,
            },
        )
    }

    /// Queues a peeled onion for `next`, unless a corrupted `party` drops it.
    #[inline(always)]
    pub fn forward(&mut self, party: PartyId, hop: Hop, next: PartyId, inner: S::Onion) {
        if self.adversary.acts(party)
            && self
                .adversary
                .on_relay(party, hop.from, self.round, next, hop.revealed_nonce)
                == Decision::Drop
        {
            self.stats.drops += 1;
            self.end(hop.lineage, EndKind::Dropped { by: party });
            self.log(self.round, party, next, EventKind::Drop);
            if hop.record != NO_RECORD {
                self.internals[party as usize][hop.record as usize].dropped = true;
            }
            return;
        }
        if hop.record != NO_RECORD {
            let id = self.scheme.observed_id(&inner);
            self.internals[party as usize][hop.record as usize].outgoing = Some((next, id));
        }
        self.outboxes[party as usize].push((
            next,
            Envelope {
                from: party,
                onion: inner,
                lineage: hop.lineage,
            },
        ));
    }

    /// Peels and routes a whole inbox at `party`. `check` sees every revealed
    /// nonce and returns false for an unexpected one, which counts as an anomaly.
    /// Parties the adversary neither observes nor controls take a batched path.
    pub fn process_inbox(
        &mut self,
        party: PartyId,
        inbox: &mut Vec<Envelope<S::Onion>>,
        mut check: impl FnMut(&Nonce) -> bool,
    ) {
        if self.adversary.observes(party) || self.adversary.acts(party) || self.events.is_some() {
            for env in inbox.drain(..) {
                let (res, hop) = self.peel(party, &env);
                if let PeelResult::Relay { nonce: Some(n), .. } = &res {
                    if !check(n) {
                        self.anomaly(party);
                    }
                }
                self.route(party, res, hop);
            }
            return;
        }
        let mut ended = Vec::new();
        {
            let sk = &self.keys[party as usize].secret_key;
            let outbox = &mut self.outboxes[party as usize];
            let scheme = &*self.scheme;
            let mut anomalies = 0;
            for env in inbox.drain(..) {
                match scheme.proc_onion(sk, &env.onion) {
                    PeelResult::Relay { next, inner, nonce } => {
                        if let Some(n) = &nonce {
                            anomalies += !check(n) as u64;
                        }
                        outbox.push((
                            next,
                            Envelope {
                                from: party,
                                onion: inner,
                                lineage: env.lineage,
                            },
                        ));
                    }
                    res => ended.push((res, env.from, env.lineage)),
                }
            }
            self.stats.anomalies += anomalies;
        }
        for (res, from, lineage) in ended {
            let hop = Hop {
                from,
                lineage,
                revealed_nonce: false,
                record: NO_RECORD,
            };
            self.route(party, res, hop);
        }
    }

    pub fn deliver(&mut self, party: PartyId, hop: Hop, payload: Payload) {
        match payload {
            Payload::Message(m) => {
                self.outputs[party as usize].push(m);
                self.end(hop.lineage, EndKind::Delivered);
                self.stats.last_delivery_round = Some(self.round);
                self.log(self.round, hop.from, party, EventKind::Deliver);
            }
            Payload::Dummy => {
                self.end(hop.lineage, EndKind::Discarded);
                self.log(self.round, hop.from, party, EventKind::Discard);
            }
        }
    }

    pub fn fail(&mut self, party: PartyId, hop: Hop) {
        self.stats.fails += 1;
        self.end(hop.lineage, EndKind::Failed { at: party });
        self.log(self.round, hop.from, party, EventKind::Fail);
    }

    /// Default handling of a peel result: relay, deliver or log the failure.
    #[inline(always)]
    pub fn route(&mut self, party: PartyId, res: PeelResult<S::Onion>, hop: Hop) {
        match res {
            PeelResult::Relay { next, inner, .. } => self.forward(party, hop, next, inner),
            PeelResult::Deliver(p) => self.deliver(party, hop, p),
            PeelResult::Fail => self.fail(party, hop),
        }
    }

    /// `party` stops sending for the rest of the run. Onions it already queued
    /// for the next round are held.
    pub fn abort(&mut self, party: PartyId) {
        if self.aborted[party as usize].is_some() {
            return;
        }
        self.aborted[party as usize] = Some(self.round);
        self.stats.last_abort_round = Some(self.stats.last_abort_round.map_or(self.round, |r| r.max(self.round)));
        let held = std::mem::take(&mut self.outboxes[party as usize]);
        for (_, env) in held {
            self.end(env.lineage, EndKind::Held { at: party });
        }
        self.log(self.round, party, party, EventKind::Abort);
    }

    pub fn anomaly(&mut self, party: PartyId) {
        self.stats.anomalies += 1;
        self.log(self.round, party, party, EventKind::Anomaly);
    }

    pub fn overflow(&mut self, party: PartyId, to: PartyId) {
        self.stats.overflows += 1;
        self.log(self.round, party, to, EventKind::Overflow);
    }
}

/// Executes `protocol` on `input` and returns the full report.
pub fn run<S: OnionScheme, P: Protocol<S>>(
    scheme: &mut S,
    protocol: &mut P,
    input: &InputVector,
    adversary: Adversary,
    net: &NetworkConfig,
) -> Result<RunReport, SimError> {
    net.validate()?;
    input.validate(net.parties, net.message_len)?;
    protocol.validate_input(input)?;
    let n = net.parties as usize;
    let seed = net.seed;

    let keys = (0..n as PartyId)
        .map(|i| scheme.gen(128, i, &mut crypto_rng(seed, "keygen", i as u64, 0)))
        .collect();
    let size_class = scheme.size_class();
    let servers = protocol.servers();
    let mut is_server = vec![false; n];
    for &s in &servers {
        is_server[s as usize] = true;
    }
    let adversary_parties = adversary.parties().to_vec();
    let observed: Vec<PartyId> = adversary_parties
        .iter()
        .copied()
        .filter(|&p| adversary.observes(p))
        .collect();
    let class = adversary.class();

    let mut ctx = Ctx {
        scheme,
        keys,
        n: net.parties,
        seed,
        round: 0,
        outboxes: (0..n).map(|_| Vec::new()).collect(),
        lineage: Vec::new(),
        party_rngs: (0..n).map(|i| sim_rng(seed, "party", i as u64, 0)).collect(),
        form_rngs: (0..n)
            .map(|i| S::FormRng::from_seed(derive_seed(seed, "form", i as u64, 0)))
            .collect(),
        adversary,
        internals: vec![Vec::new(); n],
        events: net.record_events.then(Vec::new),
        outputs: vec![Vec::new(); n],
        aborted: vec![None; n],
        stats: RunStats {
            messages: input.message_count() as u64,
            server_count: servers.len() as u32,
            server_rounds: protocol.server_rounds(),
            ..RunStats::default()
        },
        size_class,
    };
    protocol.setup(input, &mut ctx)?;

    let total_rounds = protocol.rounds();
    let budget = total_rounds.min(net.rounds);
    let truncated =
        (budget < total_rounds).then(|| format!("round budget {} exhausted before round {}", net.rounds, total_rounds));
    let shuffle_root = derive_u64(seed, "shuffle", 0, 0);

    let mut inboxes: Vec<Vec<Envelope<S::Onion>>> = (0..n).map(|_| Vec::new()).collect();
    let mut counts = vec![0u32; n * n];
    let mut touched: Vec<u32> = Vec::new();
    let mut volumes = LinkVolumes::default();

    for r in 1..=budget {
        ctx.round = r;
        let mut sent = 0u64;
        let mut server_rx = 0u64;
        for i in 0..n {
            let mut outbox = std::mem::take(&mut ctx.outboxes[i]);
            if outbox.is_empty() {
                continue;
            }
            for (to, mut env) in outbox.drain(..) {
                env.from = i as PartyId;
                let cell = i * n + to as usize;
                if counts[cell] == 0 {
                    touched.push(cell as u32);
                }
                counts[cell] += 1;
                sent += 1;
                server_rx += is_server[to as usize] as u64;
                if let Some(ev) = ctx.events.as_mut() {
                    ev.push(Event {
                        round: r,
                        from: i as PartyId,
                        to,
                        size_class,
                        kind: EventKind::Send,
                    });
                }
                inboxes[to as usize].push(env);
            }
            // Hand the allocation back for reuse.
            ctx.outboxes[i] = outbox;
        }
        // Arrival order is only visible inside observed parties; mixing happens
        // there rather than in every outbox.
        for &j in &observed {
            let mut rng = SimRng::seed_from_u64(shuffle_root ^ ((j as u64) << 32 | r as u64));
            inboxes[j as usize].shuffle(&mut rng);
        }
        // Dense rounds are cheaper to scan than to sort.
        let links: Vec<(PartyId, PartyId, u32)> = if touched.len() * 16 > n * n {
            touched.clear();
            counts
                .iter_mut()
                .enumerate()
                .filter(|(_, c)| **c > 0)
                .map(|(cell, c)| ((cell / n) as PartyId, (cell % n) as PartyId, std::mem::take(c)))
                .collect()
        } else {
            touched.sort_unstable();
            touched
                .drain(..)
                .map(|cell| {
                    let c = std::mem::take(&mut counts[cell as usize]);
                    ((cell as usize / n) as PartyId, (cell as usize % n) as PartyId, c)
                })
                .collect()
        };
        volumes.rounds.push(RoundLinks { round: r, links });
        ctx.stats.onions_sent += sent;
        ctx.stats.server_receipts.push(server_rx);

        for j in 0..n {
            let mut inbox = std::mem::take(&mut inboxes[j]);
            if ctx.aborted[j].is_some() {
                for env in inbox.drain(..) {
                    ctx.lineage[env.lineage as usize].end = Some((r, EndKind::Held { at: j as PartyId }));
                    ctx.log(r, env.from, j as PartyId, EventKind::Held);
                }
            } else {
                protocol.process(j as PartyId, r, &mut inbox, &mut ctx);
                inbox.clear();
            }
            inboxes[j] = inbox;
        }
        ctx.stats.rounds_run = r;
    }

    let mut outputs = ctx.outputs;
    outputs.iter_mut().for_each(|v| v.sort());
    let internals = observed
        .iter()
        .map(|&p| (p, std::mem::take(&mut ctx.internals[p as usize])))
        .collect();
    let adversary_randomness = (class == AdversaryClass::Active).then(|| ctx.adversary.log().clone());
    let metrics = run_metrics(&ctx.stats);
    Ok(RunReport {
        parties: net.parties,
        outputs,
        aborted: ctx.aborted,
        metrics,
        stats: ctx.stats,
        view: ViewRecord {
            class,
            link_volumes: volumes,
            internals,
            adversary_randomness,
        },
        adversary_parties,
        truncated,
        lineage: ctx.lineage,
        events: ctx.events,
    })
}

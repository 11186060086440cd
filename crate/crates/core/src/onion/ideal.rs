//! Idealized-encryption backend.
//!
//! An onion is a fresh uniformly random 128-bit handle. The oracle table maps
//! each handle to its layer record (owner, next hop, nonce or payload). The
//! (record, depth) index travelling with the handle is a simulator-side shortcut
//! into the table; it is never exported by [`OnionScheme::observed_id`] and a
//! stale or forged handle still fails the handle comparison.
//!
//! Layers are stored by depth so that onions peeled in the same round touch
//! one contiguous table.

use rand::RngCore;

use super::{
    check_shapes, Backend, KeyPair, Nonce, OnionError, OnionScheme, PartyId, Payload, PeelResult, RoutingPath,
};
use crate::rng::SimRng;

const NONE: u32 = u32::MAX;

#[inline]
fn fresh_handle<R: RngCore>(rng: &mut R) -> [u8; 16] {
    let mut h = [0u8; 16];
    h[..8].copy_from_slice(&rng.next_u64().to_le_bytes());
    h[8..].copy_from_slice(&rng.next_u64().to_le_bytes());
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IdealOnion {
    handle: [u8; 16],
    depth: u32,
    slot: u32,
}

impl IdealOnion {
    pub fn handle(&self) -> [u8; 16] {
        self.handle
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IdealPublicKey {
    party: PartyId,
    tag: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct IdealSecretKey {
    party: PartyId,
    token: u64,
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    handle: [u8; 16],
    owner: PartyId,
    /// Nonce index on relay layers, payload index on the innermost layer
    /// (`NONE` = no nonce / dummy payload).
    aux: u32,
    /// Slot of the inner layer at `depth + 1`, `NONE` on the innermost layer.
    inner: u32,
    /// Copies of the inner layer's owner and handle, so a peel reads one record.
    next: PartyId,
    next_handle: [u8; 16],
}

/// Per-run oracle. Formation needs `&mut`, peeling only `&`, so a run can
/// share it immutably across parties within a round.
#[derive(Debug, Default)]
pub struct IdealScheme {
    layers: Vec<Vec<Layer>>,
    nonces: Vec<Nonce>,
    payloads: Vec<Vec<u8>>,
    /// Indexed by party: (public tag, secret token).
    registry: Vec<Option<(u64, u64)>>,
    max_message: usize,
    scratch: Vec<[u8; 16]>,
}

impl IdealScheme {
    pub fn new(max_message: usize) -> Self {
        Self {
            max_message,
            ..Default::default()
        }
    }

    /// Pre-sizes `depths` layer tables for `per_depth` onions each.
    pub fn with_capacity(max_message: usize, depths: usize, per_depth: usize) -> Self {
        Self {
            layers: (0..depths).map(|_| Vec::with_capacity(per_depth)).collect(),
            ..Self::new(max_message)
        }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    fn registered(&self, party: PartyId) -> Option<(u64, u64)> {
        self.registry.get(party as usize).copied().flatten()
    }

    fn check_keys(&self, path: &RoutingPath, keys: &[&IdealPublicKey]) -> Result<(), OnionError> {
        for (hop, (&party, key)) in path.hops().iter().zip(keys).enumerate() {
            let ok = matches!(self.registry.get(party as usize), Some(Some((tag, _))) if key.party == party && key.tag == *tag);
            if !ok {
                return Err(OnionError::ForeignKey { hop });
            }
        }
        Ok(())
    }

    fn push_layers<R: RngCore>(
        &mut self,
        payload: &Payload,
        path: &RoutingPath,
        nonces: &[Option<Nonce>],
        rng: &mut R,
    ) -> u32 {
        let hops = path.hops();
        if self.layers.len() < hops.len() {
            self.layers.resize_with(hops.len(), Vec::new);
        }
        let first = self.layers[0].len() as u32;
        let mut handles = std::mem::take(&mut self.scratch);
        handles.clear();
        handles.extend((0..hops.len()).map(|_| fresh_handle(rng)));
        for (d, nonce) in nonces.iter().enumerate() {
            let aux = match nonce {
                Some(n) => {
                    self.nonces.push(*n);
                    (self.nonces.len() - 1) as u32
                }
                None => NONE,
            };
            let inner = self.layers[d + 1].len() as u32;
            self.layers[d].push(Layer {
                handle: handles[d],
                owner: hops[d],
                aux,
                inner,
                next: hops[d + 1],
                next_handle: handles[d + 1],
            });
        }
        let aux = match payload {
            Payload::Message(m) => {
                self.payloads.push(m.clone());
                (self.payloads.len() - 1) as u32
            }
            Payload::Dummy => NONE,
        };
        let last = hops.len() - 1;
        self.layers[last].push(Layer {
            handle: handles[last],
            owner: hops[last],
            aux,
            inner: NONE,
            next: NONE,
            next_handle: [0; 16],
        });
        self.scratch = handles;
        first
    }

    fn onion_at(&self, depth: u32, slot: u32) -> IdealOnion {
        IdealOnion {
            handle: self.layers[depth as usize][slot as usize].handle,
            depth,
            slot,
        }
    }
}

impl OnionScheme for IdealScheme {
    type PublicKey = IdealPublicKey;
    type SecretKey = IdealSecretKey;
    type Onion = IdealOnion;
    type FormRng = SimRng;

    const BACKEND: Backend = Backend::Ideal;

    fn gen<R: RngCore + rand::CryptoRng>(
        &mut self,
        security_param: u32,
        party: PartyId,
        rng: &mut R,
    ) -> KeyPair<IdealPublicKey, IdealSecretKey> {
        assert!(security_param >= 1, "security parameter must be positive");
        let tag = rng.next_u64();
        let token = rng.next_u64();
        let idx = party as usize;
        if self.registry.len() <= idx {
            self.registry.resize(idx + 1, None);
        }
        self.registry[idx] = Some((tag, token));
        KeyPair {
            public_key: IdealPublicKey { party, tag },
            secret_key: IdealSecretKey { party, token },
            party,
        }
    }

    fn form_onion<R: RngCore>(
        &mut self,
        payload: &Payload,
        path: &RoutingPath,
        public_keys: &[&IdealPublicKey],
        nonces: &[Option<Nonce>],
        rng: &mut R,
    ) -> Result<Vec<IdealOnion>, OnionError> {
        check_shapes(payload, path, public_keys, nonces, self.max_message)?;
        self.check_keys(path, public_keys)?;
        let first = self.push_layers(payload, path, nonces, rng);
        let mut out = vec![self.onion_at(0, first)];
        for d in 1..path.len() {
            let prev = &self.layers[d - 1][out[d - 1].slot as usize];
            out.push(self.onion_at(d as u32, prev.inner));
        }
        Ok(out)
    }

    fn form_first<R: RngCore>(
        &mut self,
        payload: &Payload,
        path: &RoutingPath,
        public_keys: &[&IdealPublicKey],
        nonces: &[Option<Nonce>],
        rng: &mut R,
    ) -> Result<IdealOnion, OnionError> {
        check_shapes(payload, path, public_keys, nonces, self.max_message)?;
        self.check_keys(path, public_keys)?;
        let first = self.push_layers(payload, path, nonces, rng);
        Ok(self.onion_at(0, first))
    }

    #[inline(always)]
    fn proc_onion(&self, sk: &IdealSecretKey, onion: &IdealOnion) -> PeelResult<IdealOnion> {
        let Some(layer) = self
            .layers
            .get(onion.depth as usize)
            .and_then(|l| l.get(onion.slot as usize))
        else {
            return PeelResult::Fail;
        };
        if layer.handle != onion.handle || layer.owner != sk.party {
            return PeelResult::Fail;
        }
        match self.registered(sk.party) {
            Some((_, token)) if token == sk.token => {}
            _ => return PeelResult::Fail,
        }
        if layer.inner == NONE {
            return PeelResult::Deliver(if layer.aux == NONE {
                Payload::Dummy
            } else {
                Payload::Message(self.payloads[layer.aux as usize].clone())
            });
        }
        PeelResult::Relay {
            next: layer.next,
            inner: IdealOnion {
                handle: layer.next_handle,
                depth: onion.depth + 1,
                slot: layer.inner,
            },
            nonce: (layer.aux != NONE).then(|| self.nonces[layer.aux as usize]),
        }
    }

    fn reset(&mut self) {
        self.layers.iter_mut().for_each(Vec::clear);
        self.nonces.clear();
        self.payloads.clear();
        self.registry.clear();
    }

    fn observed_id(&self, onion: &IdealOnion) -> [u8; 16] {
        onion.handle
    }

    fn size_class(&self) -> u32 {
        1
    }

    fn byte_len(&self, _onion: &IdealOnion) -> usize {
        16
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onion::peel_chain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup(n: u32) -> (IdealScheme, Vec<KeyPair<IdealPublicKey, IdealSecretKey>>) {
        let mut s = IdealScheme::new(64);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let keys = (0..n).map(|p| s.gen(128, p, &mut rng)).collect();
        (s, keys)
    }

    #[test]
    fn three_hop_chain_with_empty_nonces() {
        let (mut s, keys) = setup(4);
        let path = RoutingPath::new(vec![1, 2, 3], 4).unwrap();
        let pks: Vec<_> = path.hops().iter().map(|&p| &keys[p as usize].public_key).collect();
        let mut rng = SimRng::seed_from_u64(2);
        let m = Payload::Message(b"hello".to_vec());
        let formed = s.form_onion(&m, &path, &pks, &[None, None], &mut rng).unwrap();
        assert_eq!(formed.len(), 3);
        match s.proc_onion(&keys[1].secret_key, &formed[0]) {
            PeelResult::Relay { next, inner, nonce } => {
                assert_eq!((next, inner, nonce), (2, formed[1], None));
            }
            other => panic!("{other:?}"),
        }
        let sks: Vec<_> = path.hops().iter().map(|&p| &keys[p as usize].secret_key).collect();
        let (chain, _, last) = peel_chain(&s, &sks, &formed[0]);
        assert_eq!(chain, formed);
        assert_eq!(last, PeelResult::Deliver(m));
    }

    #[test]
    fn wrong_key_and_forged_handle_fail() {
        let (mut s, keys) = setup(3);
        let path = RoutingPath::new(vec![0, 1], 3).unwrap();
        let pks = [&keys[0].public_key, &keys[1].public_key];
        let o = s
            .form_first(&Payload::Dummy, &path, &pks, &[None], &mut SimRng::seed_from_u64(3))
            .unwrap();
        assert_eq!(s.proc_onion(&keys[2].secret_key, &o), PeelResult::Fail);
        let forged = IdealOnion { handle: [0; 16], ..o };
        assert_eq!(s.proc_onion(&keys[0].secret_key, &forged), PeelResult::Fail);
        // replay is not detected: same answer twice
        assert_eq!(
            s.proc_onion(&keys[0].secret_key, &o),
            s.proc_onion(&keys[0].secret_key, &o)
        );
    }

    #[test]
    fn foreign_public_key_rejected() {
        let (mut s, keys) = setup(3);
        let path = RoutingPath::new(vec![0, 1], 3).unwrap();
        let pks = [&keys[0].public_key, &keys[2].public_key];
        let err = s.form_onion(&Payload::Dummy, &path, &pks, &[None], &mut SimRng::seed_from_u64(3));
        assert_eq!(err, Err(OnionError::ForeignKey { hop: 1 }));
    }
}

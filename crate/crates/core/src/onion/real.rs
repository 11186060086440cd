//! Layered public-key authenticated encryption with a fixed onion size.
//!
//! Header: `max_hops` slots of `SLOT` bytes. Slot 0 holds the current hop's
//! ephemeral ristretto point and an AEAD ciphertext of its routing tuple
//! (role, next hop, nonce); the AEAD covers the rest of the onion as associated
//! data, so any tampering with inner layers is caught by the current hop. After
//! peeling, the header shifts left by one slot, is refilled from the layer
//! keystream, and the payload is stream-decrypted; Sphinx-style filler makes the
//! shifted-in bytes predictable to the sender, so the onion never changes size.

use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::ChaCha20;
use chacha20poly1305::aead::{AeadInPlace, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Tag};
use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use hkdf::Hkdf;
use rand::RngCore;
use sha2::{Digest, Sha256};

use super::{
    check_shapes, Backend, KeyPair, Nonce, NonceTag, OnionError, OnionScheme, PartyId, Payload, PeelResult,
    RoutingPath, NONCE_LEN,
};
use crate::rng::CryptoRng;

pub const DEFAULT_MAX_HOPS: usize = 32;
pub const DEFAULT_MESSAGE_LEN: usize = 64;

const POINT_LEN: usize = 32;
const TAG_LEN: usize = 16;
const ROUTING_LEN: usize = 1 + 4 + 1 + NONCE_LEN;
const SLOT: usize = POINT_LEN + ROUTING_LEN + TAG_LEN;

const ROLE_RELAY: u8 = 0;
const ROLE_DELIVER: u8 = 1;
const KIND_MESSAGE: u8 = 0;
const KIND_DUMMY: u8 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RealOnion(Vec<u8>);

impl RealOnion {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }
}

#[derive(Clone, Debug)]
pub struct RealPublicKey {
    pub party: PartyId,
    pub point: RistrettoPoint,
}

pub struct RealSecretKey {
    party: PartyId,
    scalar: Scalar,
}

impl std::fmt::Debug for RealSecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RealSecretKey(party {})", self.party)
    }
}

#[derive(Clone, Debug)]
pub struct RealScheme {
    max_hops: usize,
    message_len: usize,
}

struct LayerKeys {
    aead: [u8; 32],
    stream: [u8; 32],
}

fn layer_keys(shared: &RistrettoPoint, ephemeral: &CompressedRistretto) -> LayerKeys {
    let mut ikm = [0u8; 64];
    ikm[..32].copy_from_slice(shared.compress().as_bytes());
    ikm[32..].copy_from_slice(ephemeral.as_bytes());
    let hk = Hkdf::<Sha256>::new(Some(b"onionlab/real/layer"), &ikm);
    let mut okm = [0u8; 64];
    hk.expand(b"aead|stream", &mut okm)
        .expect("64 bytes is a valid HKDF length");
    LayerKeys {
        aead: okm[..32].try_into().unwrap(),
        stream: okm[32..].try_into().unwrap(),
    }
}

fn xor_keystream(key: &[u8; 32], buf: &mut [u8]) {
    ChaCha20::new(key.into(), &[0u8; 12].into()).apply_keystream(buf);
}

fn random_scalar<R: RngCore>(rng: &mut R) -> Scalar {
    loop {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        let s = Scalar::from_bytes_mod_order_wide(&wide);
        if s != Scalar::ZERO {
            return s;
        }
    }
}

fn encode_routing(role: u8, next: PartyId, nonce: Option<&Nonce>) -> [u8; ROUTING_LEN] {
    let mut out = [0u8; ROUTING_LEN];
    out[0] = role;
    out[1..5].copy_from_slice(&next.to_le_bytes());
    if let Some(n) = nonce {
        out[5] = match n.tag {
            NonceTag::Checkpoint => 1,
            NonceTag::Opaque => 2,
        };
        out[6..].copy_from_slice(&n.value);
    }
    out
}

impl RealScheme {
    pub fn new(max_hops: usize, message_len: usize) -> Self {
        assert!(max_hops >= 1 && message_len <= u16::MAX as usize);
        Self { max_hops, message_len }
    }

    pub fn max_hops(&self) -> usize {
        self.max_hops
    }

    fn header_len(&self) -> usize {
        self.max_hops * SLOT
    }

    fn payload_len(&self) -> usize {
        3 + self.message_len
    }

    pub fn onion_len(&self) -> usize {
        self.header_len() + self.payload_len()
    }

    fn encode_payload(&self, payload: &Payload) -> Vec<u8> {
        let mut out = vec![0u8; self.payload_len()];
        match payload {
            Payload::Message(m) => {
                out[0] = KIND_MESSAGE;
                out[1..3].copy_from_slice(&(m.len() as u16).to_le_bytes());
                out[3..3 + m.len()].copy_from_slice(m);
            }
            Payload::Dummy => out[0] = KIND_DUMMY,
        }
        out
    }

    fn decode_payload(&self, bytes: &[u8]) -> Option<Payload> {
        match bytes[0] {
            KIND_DUMMY => Some(Payload::Dummy),
            KIND_MESSAGE => {
                let len = u16::from_le_bytes([bytes[1], bytes[2]]) as usize;
                (len <= self.message_len).then(|| Payload::Message(bytes[3..3 + len].to_vec()))
            }
            _ => None,
        }
    }

    /// Seals the routing tuple into slot 0 of `onion`, authenticating the rest.
    fn seal_slot(&self, onion: &mut [u8], eph: &CompressedRistretto, keys: &LayerKeys, routing: &[u8; ROUTING_LEN]) {
        let (slot, rest) = onion.split_at_mut(SLOT);
        slot[..POINT_LEN].copy_from_slice(eph.as_bytes());
        let body = &mut slot[POINT_LEN..POINT_LEN + ROUTING_LEN];
        body.copy_from_slice(routing);
        let tag = ChaCha20Poly1305::new(Key::from_slice(&keys.aead))
            .encrypt_in_place_detached(&[0u8; 12].into(), rest, body)
            .expect("routing block is tiny");
        slot[POINT_LEN + ROUTING_LEN..].copy_from_slice(&tag);
    }
}

impl Default for RealScheme {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_HOPS, DEFAULT_MESSAGE_LEN)
    }
}

impl OnionScheme for RealScheme {
    type PublicKey = RealPublicKey;
    type SecretKey = RealSecretKey;
    type Onion = RealOnion;
    type FormRng = CryptoRng;

    const BACKEND: Backend = Backend::Real;

    fn gen<R: RngCore + rand::CryptoRng>(
        &mut self,
        security_param: u32,
        party: PartyId,
        rng: &mut R,
    ) -> KeyPair<RealPublicKey, RealSecretKey> {
        assert!(security_param >= 1, "security parameter must be positive");
        let scalar = random_scalar(rng);
        let point = &scalar * RISTRETTO_BASEPOINT_TABLE;
        KeyPair {
            public_key: RealPublicKey { party, point },
            secret_key: RealSecretKey { party, scalar },
            party,
        }
    }

    fn form_onion<R: RngCore>(
        &mut self,
        payload: &Payload,
        path: &RoutingPath,
        public_keys: &[&RealPublicKey],
        nonces: &[Option<Nonce>],
        rng: &mut R,
    ) -> Result<Vec<RealOnion>, OnionError> {
        check_shapes(payload, path, public_keys, nonces, self.message_len)?;
        let hops = path.hops();
        let ell = hops.len();
        if ell > self.max_hops {
            return Err(OnionError::PathTooLong {
                len: ell,
                max: self.max_hops,
            });
        }
        for (hop, (&party, key)) in hops.iter().zip(public_keys).enumerate() {
            if key.party != party {
                return Err(OnionError::ForeignKey { hop });
            }
        }
        let hl = self.header_len();
        let total = self.onion_len();

        let mut ephs = Vec::with_capacity(ell);
        let mut keys = Vec::with_capacity(ell);
        let mut streams = Vec::with_capacity(ell);
        for pk in public_keys {
            let e = random_scalar(rng);
            let eph = (&e * RISTRETTO_BASEPOINT_TABLE).compress();
            let k = layer_keys(&(e * pk.point), &eph);
            let mut ks = vec![0u8; total];
            xor_keystream(&k.stream, &mut ks);
            ephs.push(eph);
            keys.push(k);
            streams.push(ks);
        }

        let mut filler: Vec<u8> = Vec::with_capacity(hl);
        for ks in streams.iter().take(ell - 1) {
            filler.extend_from_slice(&[0u8; SLOT]);
            let start = hl - filler.len();
            for (f, k) in filler.iter_mut().zip(&ks[start..hl]) {
                *f ^= k;
            }
        }

        let mut out = vec![Vec::new(); ell];
        let mut last = vec![0u8; total];
        rng.fill_bytes(&mut last[SLOT..hl - filler.len()]);
        last[hl - filler.len()..hl].copy_from_slice(&filler);
        last[hl..].copy_from_slice(&self.encode_payload(payload));
        for (b, k) in last[hl..].iter_mut().zip(&streams[ell - 1][hl..]) {
            *b ^= k;
        }
        let routing = encode_routing(ROLE_DELIVER, 0, None);
        self.seal_slot(&mut last, &ephs[ell - 1], &keys[ell - 1], &routing);
        out[ell - 1] = last;

        for i in (0..ell - 1).rev() {
            let inner = &out[i + 1];
            let ks = &streams[i];
            let mut cur = vec![0u8; total];
            for j in 0..hl - SLOT {
                cur[SLOT + j] = inner[j] ^ ks[j];
            }
            for j in hl..total {
                cur[j] = inner[j] ^ ks[j];
            }
            let routing = encode_routing(ROLE_RELAY, hops[i + 1], nonces[i].as_ref());
            self.seal_slot(&mut cur, &ephs[i], &keys[i], &routing);
            out[i] = cur;
        }
        Ok(out.into_iter().map(RealOnion).collect())
    }

    fn proc_onion(&self, sk: &RealSecretKey, onion: &RealOnion) -> PeelResult<RealOnion> {
        let bytes = &onion.0;
        let total = self.onion_len();
        let hl = self.header_len();
        if bytes.len() != total {
            return PeelResult::Fail;
        }
        let eph = CompressedRistretto(bytes[..POINT_LEN].try_into().unwrap());
        let Some(point) = eph.decompress() else {
            return PeelResult::Fail;
        };
        let keys = layer_keys(&(sk.scalar * point), &eph);
        let mut routing = [0u8; ROUTING_LEN];
        routing.copy_from_slice(&bytes[POINT_LEN..POINT_LEN + ROUTING_LEN]);
        let tag = Tag::from_slice(&bytes[POINT_LEN + ROUTING_LEN..SLOT]);
        if ChaCha20Poly1305::new(Key::from_slice(&keys.aead))
            .decrypt_in_place_detached(&[0u8; 12].into(), &bytes[SLOT..], &mut routing, tag)
            .is_err()
        {
            return PeelResult::Fail;
        }
        let mut next_bytes = vec![0u8; total];
        next_bytes[..hl - SLOT].copy_from_slice(&bytes[SLOT..hl]);
        next_bytes[hl..].copy_from_slice(&bytes[hl..]);
        xor_keystream(&keys.stream, &mut next_bytes);
        match routing[0] {
            ROLE_DELIVER => match self.decode_payload(&next_bytes[hl..]) {
                Some(p) => PeelResult::Deliver(p),
                None => PeelResult::Fail,
            },
            ROLE_RELAY => {
                let next = u32::from_le_bytes(routing[1..5].try_into().unwrap());
                let value: [u8; NONCE_LEN] = routing[6..].try_into().unwrap();
                let nonce = match routing[5] {
                    0 => None,
                    1 => Some(Nonce {
                        tag: NonceTag::Checkpoint,
                        value,
                    }),
                    2 => Some(Nonce {
                        tag: NonceTag::Opaque,
                        value,
                    }),
                    _ => return PeelResult::Fail,
                };
                PeelResult::Relay {
                    next,
                    inner: RealOnion(next_bytes),
                    nonce,
                }
            }
            _ => PeelResult::Fail,
        }
    }

    fn observed_id(&self, onion: &RealOnion) -> [u8; 16] {
        Sha256::digest(&onion.0)[..16].try_into().unwrap()
    }

    fn size_class(&self) -> u32 {
        self.onion_len() as u32
    }

    fn byte_len(&self, onion: &RealOnion) -> usize {
        onion.0.len()
    }
}

use std::cell::RefCell;

use hmac::{Hmac, Mac};
use rand::RngCore;
use rustc_hash::FxHashMap;
use sha2::Sha256;

use super::SharedKey;
use crate::onion::Nonce;
use crate::rng::SimRng;

pub const DOMAIN_BIT: u8 = 0;
pub const DOMAIN_NONCE: u8 = 1;

/// `F(key, input, domain)`: a keyed function with 256-bit output.
pub trait PairPrf {
    fn eval(&self, key: &SharedKey, input: u64, domain: u8) -> [u8; 32];

    fn descriptor(&self) -> &'static str;
}

/// HMAC-SHA256 over a tagged encoding of `(input, domain)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct HmacPrf;

impl PairPrf for HmacPrf {
    fn eval(&self, key: &SharedKey, input: u64, domain: u8) -> [u8; 32] {
        let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(&key.prf_seed).expect("HMAC accepts any key length");
        mac.update(b"onionlab/prf");
        mac.update(&input.to_le_bytes());
        mac.update(&[domain]);
        mac.finalize().into_bytes().into()
    }

    fn descriptor(&self) -> &'static str {
        "hmac-sha256"
    }
}

/// A lazily sampled table of true randomness: every fresh `(key, input,
/// domain)` gets independent uniform bytes, repeated queries get the same
/// answer. Stands in for the PRF when an experiment assumes it is a random
/// function, and is much cheaper than HMAC in Monte Carlo loops.
pub struct RandomFunction {
    table: RefCell<FxHashMap<(SharedKey, u64, u8), [u8; 32]>>,
    rng: RefCell<SimRng>,
}

impl RandomFunction {
    pub fn new(rng: SimRng) -> Self {
        Self {
            table: RefCell::new(FxHashMap::default()),
            rng: RefCell::new(rng),
        }
    }

    pub fn entries(&self) -> usize {
        self.table.borrow().len()
    }
}

impl PairPrf for RandomFunction {
    fn eval(&self, key: &SharedKey, input: u64, domain: u8) -> [u8; 32] {
        *self.table.borrow_mut().entry((*key, input, domain)).or_insert_with(|| {
            let mut out = [0u8; 32];
            self.rng.borrow_mut().fill_bytes(&mut out);
            out
        })
    }

    fn descriptor(&self) -> &'static str {
        "random-function"
    }
}

/// 64-bit threshold for frequency `p`: the bit is 1 iff the PRF word is below it.
pub(crate) fn threshold(p: f64) -> Option<u64> {
    assert!((0.0..=1.0).contains(&p), "checkpoint frequency {p} outside [0, 1]");
    if p >= 1.0 {
        None
    } else {
        // 2^64 · p, saturating; exact enough that the bias is below 2^-53.
        Some((p * 18_446_744_073_709_551_616.0) as u64)
    }
}

#[inline]
pub(crate) fn bit_from_word(word: u64, threshold: Option<u64>) -> bool {
    threshold.map_or(true, |t| word < t)
}

/// Decision bit for `(session, r)`. The PRF input is the integer `session + r`
/// (wrapping), in domain 0.
pub fn checkpoint_decision(prf: &impl PairPrf, key: &SharedKey, session: u64, round: u32, p: f64) -> bool {
    let out = prf.eval(key, session.wrapping_add(round as u64), DOMAIN_BIT);
    bit_from_word(u64::from_le_bytes(out[..8].try_into().unwrap()), threshold(p))
}

pub fn checkpoint_nonce(prf: &impl PairPrf, key: &SharedKey, session: u64, round: u32) -> Nonce {
    Nonce::checkpoint(prf.eval(key, session.wrapping_add(round as u64), DOMAIN_NONCE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn key(b: u8) -> SharedKey {
        SharedKey { prf_seed: [b; 32] }
    }

    #[test]
    fn endpoints_and_domain_separation() {
        let prf = HmacPrf;
        for r in 0..50 {
            assert!(!checkpoint_decision(&prf, &key(1), 7, r, 0.0));
            assert!(checkpoint_decision(&prf, &key(1), 7, r, 1.0));
        }
        assert_ne!(prf.eval(&key(1), 8, DOMAIN_BIT), prf.eval(&key(1), 8, DOMAIN_NONCE));
        assert_eq!(
            checkpoint_nonce(&prf, &key(1), 7, 1),
            checkpoint_nonce(&prf, &key(1), 7, 1)
        );
        assert_ne!(
            checkpoint_nonce(&prf, &key(1), 7, 1),
            checkpoint_nonce(&prf, &key(1), 7, 2)
        );
    }

    #[test]
    fn empirical_frequency_matches_threshold() {
        for prf in [
            &HmacPrf as &dyn PairPrfDyn,
            &RandomFunction::new(SimRng::seed_from_u64(3)),
        ] {
            let trials = 100_000u32;
            let hits = (0..trials)
                .filter(|&i| prf.decision(&key((i % 251) as u8), i as u64 * 1000, i, 0.25))
                .count();
            let freq = hits as f64 / trials as f64;
            assert!((freq - 0.25).abs() < 0.01, "{} gave {freq}", prf.name());
        }
    }

    #[test]
    fn random_function_is_a_function() {
        let rf = RandomFunction::new(SimRng::seed_from_u64(4));
        let a = rf.eval(&key(2), 10, 0);
        assert_eq!(a, rf.eval(&key(2), 10, 0));
        assert_ne!(a, rf.eval(&key(2), 10, 1));
        assert_eq!(rf.entries(), 2);
    }

    // object-safe shim for iterating over both implementations
    trait PairPrfDyn {
        fn decision(&self, key: &SharedKey, session: u64, round: u32, p: f64) -> bool;
        fn name(&self) -> &'static str;
    }
    impl<P: PairPrf> PairPrfDyn for P {
        fn decision(&self, key: &SharedKey, session: u64, round: u32, p: f64) -> bool {
            checkpoint_decision(self, key, session, round, p)
        }
        fn name(&self) -> &'static str {
            self.descriptor()
        }
    }
}

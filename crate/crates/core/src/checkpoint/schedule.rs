use curve25519_dalek::ristretto::CompressedRistretto;
use curve25519_dalek::scalar::Scalar;
use rand::RngCore;
use serde::Serialize;

use super::prf::{bit_from_word, threshold, DOMAIN_BIT};
use super::{checkpoint_nonce, derive_shared_key, CheckpointError, DhKeyPair, PairPrf, SharedKey};
use crate::onion::{Nonce, PartyId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CheckpointSpec {
    pub round: u32,
    pub partner: PartyId,
    pub nonce: Nonce,
}

/// `α · log²λ / N`.
pub fn checkpoint_frequency(alpha: f64, log2_lambda: f64, parties: u32) -> f64 {
    alpha * log2_lambda / parties as f64
}

/// Symmetric table of pairwise keys for a whole run.
#[derive(Clone, Debug)]
pub struct PairKeys {
    n: usize,
    keys: Vec<SharedKey>,
}

impl PairKeys {
    /// Derives every pair from DH key material: entry `(i, k)` is computed by
    /// `i` from its own secret and `k`'s public element.
    pub fn from_dh(pairs: &[DhKeyPair]) -> Result<Self, CheckpointError> {
        let n = pairs.len();
        let mut keys = vec![SharedKey { prf_seed: [0; 32] }; n * n];
        for i in 0..n {
            for k in i..n {
                let key = derive_shared_key(pairs[i].secret(), &pairs[k].public)?;
                keys[i * n + k] = key;
                keys[k * n + i] = key;
            }
        }
        Ok(Self { n, keys })
    }

    /// Independent uniform keys, for runs where the PRF is a random function.
    pub fn random<R: RngCore>(n: usize, rng: &mut R) -> Self {
        let mut keys = vec![SharedKey { prf_seed: [0; 32] }; n * n];
        for i in 0..n {
            for k in i..n {
                let mut seed = [0u8; 32];
                rng.fill_bytes(&mut seed);
                keys[i * n + k] = SharedKey { prf_seed: seed };
                keys[k * n + i] = SharedKey { prf_seed: seed };
            }
        }
        Self { n, keys }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn key(&self, i: PartyId, k: PartyId) -> &SharedKey {
        &self.keys[i as usize * self.n + k as usize]
    }

    /// Every party's schedule at once. Each unordered pair is evaluated once and
    /// entered on both sides, which is exactly what symmetry of the PRF gives.
    pub fn all_schedules(&self, prf: &impl PairPrf, session: u64, rounds: u32, p: f64) -> Vec<Vec<CheckpointSpec>> {
        let thr = threshold(p);
        let mut out = vec![Vec::new(); self.n];
        if p <= 0.0 {
            return out;
        }
        // Round-major order leaves every list sorted by (round, partner): within a
        // round, party x first receives partners i < x (ascending), then k ≥ x.
        for r in 1..=rounds {
            for i in 0..self.n as PartyId {
                for k in i..self.n as PartyId {
                    let key = self.key(i, k);
                    let word = prf.eval(key, session.wrapping_add(r as u64), DOMAIN_BIT);
                    if bit_from_word(u64::from_le_bytes(word[..8].try_into().unwrap()), thr) {
                        let nonce = checkpoint_nonce(prf, key, session, r);
                        out[i as usize].push(CheckpointSpec {
                            round: r,
                            partner: k,
                            nonce,
                        });
                        if k != i {
                            out[k as usize].push(CheckpointSpec {
                                round: r,
                                partner: i,
                                nonce,
                            });
                        }
                    }
                }
            }
        }
        debug_assert!(out.iter().all(|s| s
            .windows(2)
            .all(|w| (w[0].round, w[0].partner) < (w[1].round, w[1].partner))));
        out
    }
}

/// One party's schedule: a spec for every `(r, k) ∈ [L] × [N]` whose decision
/// bit is 1, sorted by `(round, partner)`.
pub fn schedule_for(
    party: PartyId,
    key_of: impl Fn(PartyId) -> SharedKey,
    parties: u32,
    prf: &impl PairPrf,
    session: u64,
    rounds: u32,
    p: f64,
) -> Vec<CheckpointSpec> {
    let thr = threshold(p);
    let mut out = Vec::new();
    if p <= 0.0 {
        return out;
    }
    let _ = party;
    for r in 1..=rounds {
        for k in 0..parties {
            let key = key_of(k);
            let word = prf.eval(&key, session.wrapping_add(r as u64), DOMAIN_BIT);
            if bit_from_word(u64::from_le_bytes(word[..8].try_into().unwrap()), thr) {
                out.push(CheckpointSpec {
                    round: r,
                    partner: k,
                    nonce: checkpoint_nonce(prf, &key, session, r),
                });
            }
        }
    }
    out
}

/// Schedule for party `i` straight from the PKI: keys are derived with `i`'s
/// DH secret against every public element.
#[allow(clippy::too_many_arguments)]
pub fn build_checkpoint_schedule(
    party: PartyId,
    publics: &[CompressedRistretto],
    dh_secret: &Scalar,
    session: u64,
    rounds: u32,
    alpha: f64,
    log2_lambda: f64,
    prf: &impl PairPrf,
) -> Result<Vec<CheckpointSpec>, CheckpointError> {
    let n = publics.len() as u32;
    let p = checkpoint_frequency(alpha, log2_lambda, n);
    if !(0.0..=1.0).contains(&p) {
        return Err(CheckpointError::Frequency(p));
    }
    let keys = publics
        .iter()
        .map(|y| derive_shared_key(dh_secret, y))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(schedule_for(party, |k| keys[k as usize], n, prf, session, rounds, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::{HmacPrf, RandomFunction};
    use crate::rng::SimRng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn dh_schedules_are_mutually_consistent() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let pairs: Vec<_> = (0..8).map(|_| DhKeyPair::generate(&mut rng)).collect();
        let publics: Vec<_> = pairs.iter().map(|p| p.public).collect();
        let scheds: Vec<_> = (0..8)
            .map(|i| {
                build_checkpoint_schedule(i, &publics, pairs[i as usize].secret(), 99, 6, 1.0, 2.0, &HmacPrf).unwrap()
            })
            .collect();
        for i in 0..8u32 {
            for k in 0..8u32 {
                let a: Vec<_> = scheds[i as usize]
                    .iter()
                    .filter(|c| c.partner == k)
                    .map(|c| (c.round, c.nonce))
                    .collect();
                let b: Vec<_> = scheds[k as usize]
                    .iter()
                    .filter(|c| c.partner == i)
                    .map(|c| (c.round, c.nonce))
                    .collect();
                assert_eq!(a, b);
            }
        }
        let table =
            PairKeys::from_dh(&pairs)
                .unwrap()
                .all_schedules(&HmacPrf, 99, 6, checkpoint_frequency(1.0, 2.0, 8));
        assert_eq!(table, scheds);
    }

    #[test]
    fn zero_alpha_gives_empty_schedule() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let pairs: Vec<_> = (0..4).map(|_| DhKeyPair::generate(&mut rng)).collect();
        let publics: Vec<_> = pairs.iter().map(|p| p.public).collect();
        let s = build_checkpoint_schedule(0, &publics, pairs[0].secret(), 1, 10, 0.0, 4.0, &HmacPrf).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn expected_total_count_over_seeds() {
        // N=64, L=16, p=0.25 → L·N·p = 256 specs per party on average.
        let (n, l) = (64usize, 16u32);
        let p = checkpoint_frequency(4.0, 4.0, n as u32);
        assert_eq!(p, 0.25);
        for seed in 0..30 {
            let mut rng = SimRng::seed_from_u64(seed);
            let keys = PairKeys::random(n, &mut rng);
            let rf = RandomFunction::new(SimRng::seed_from_u64(1000 + seed));
            let all = keys.all_schedules(&rf, seed, l, p);
            let mean = all.iter().map(Vec::len).sum::<usize>() as f64 / n as f64;
            assert!((mean - 256.0).abs() <= 25.6, "seed {seed}: {mean}");
            assert!(all[3].iter().all(|c| (1..=l).contains(&c.round)));
        }
    }
}

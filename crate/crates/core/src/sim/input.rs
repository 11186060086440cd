use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::onion::PartyId;

pub type Message = Vec<u8>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InputError {
    #[error("input covers {got} parties, network has {expected}")]
    PartyCount { got: usize, expected: u32 },
    #[error("party {party} addresses recipient {recipient} outside [0, {parties})")]
    Recipient {
        party: PartyId,
        recipient: PartyId,
        parties: u32,
    },
    #[error("party {party} holds a {len}-byte message; the message space is {max} bytes")]
    MessageLen { party: PartyId, len: usize, max: usize },
    #[error("input is not in the simple I/O setting: {0}")]
    NotSimple(String),
}

/// `σ = (σ_1, …, σ_N)`: each party's multiset of `(message, recipient)` pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputVector {
    pub parties: Vec<Vec<(Message, PartyId)>>,
}

impl InputVector {
    pub fn empty(n: u32) -> Self {
        Self {
            parties: vec![Vec::new(); n as usize],
        }
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    /// `|M(σ)|`.
    pub fn message_count(&self) -> usize {
        self.parties.iter().map(Vec::len).sum()
    }

    pub fn validate(&self, n: u32, max_message: usize) -> Result<(), InputError> {
        if self.parties.len() != n as usize {
            return Err(InputError::PartyCount {
                got: self.parties.len(),
                expected: n,
            });
        }
        for (i, pairs) in self.parties.iter().enumerate() {
            for (m, j) in pairs {
                if *j >= n {
                    return Err(InputError::Recipient {
                        party: i as PartyId,
                        recipient: *j,
                        parties: n,
                    });
                }
                if m.len() > max_message {
                    return Err(InputError::MessageLen {
                        party: i as PartyId,
                        len: m.len(),
                        max: max_message,
                    });
                }
            }
        }
        Ok(())
    }

    /// Σ*: every party sends exactly one message and recipients form a permutation.
    pub fn check_simple(&self) -> Result<(), InputError> {
        let mut hit = vec![false; self.parties.len()];
        for (i, pairs) in self.parties.iter().enumerate() {
            if pairs.len() != 1 {
                return Err(InputError::NotSimple(format!("party {i} holds {} pairs", pairs.len())));
            }
            let j = pairs[0].1 as usize;
            if j >= hit.len() || std::mem::replace(&mut hit[j], true) {
                return Err(InputError::NotSimple(format!("recipient {j} addressed twice")));
            }
        }
        Ok(())
    }

    /// Per-recipient sorted multiset `{m : (m, j) ∈ M(σ)}`.
    pub fn expected_outputs(&self) -> Vec<Vec<Message>> {
        let mut out = vec![Vec::new(); self.parties.len()];
        for pairs in &self.parties {
            for (m, j) in pairs {
                if let Some(slot) = out.get_mut(*j as usize) {
                    slot.push(m.clone());
                }
            }
        }
        out.iter_mut().for_each(|v| v.sort());
        out
    }

    /// Σ* input for a uniformly random permutation π; sender `i`'s message is
    /// `"m" ‖ i` so every message is distinct.
    pub fn permutation<R: Rng>(n: u32, rng: &mut R) -> Self {
        let mut pi: Vec<PartyId> = (0..n).collect();
        pi.shuffle(rng);
        Self::from_permutation(&pi)
    }

    pub fn from_permutation(pi: &[PartyId]) -> Self {
        Self {
            parties: pi
                .iter()
                .enumerate()
                .map(|(i, &j)| vec![(sender_message(i as PartyId), j)])
                .collect(),
        }
    }

    /// Arbitrary multisets: each party sends `0..=max_per_party` messages of
    /// random length ≤ `max_len` to uniform recipients.
    pub fn random_multiset<R: Rng>(n: u32, max_per_party: usize, max_len: usize, rng: &mut R) -> Self {
        let parties = (0..n)
            .map(|_| {
                let count = rng.gen_range(0..=max_per_party);
                (0..count)
                    .map(|_| {
                        let len = rng.gen_range(0..=max_len);
                        let m: Message = (0..len).map(|_| rng.gen()).collect();
                        (m, rng.gen_range(0..n))
                    })
                    .collect()
            })
            .collect();
        Self { parties }
    }

    /// Exchange the whole inputs of parties `a` and `b`.
    pub fn swap_parties(&self, a: PartyId, b: PartyId) -> Self {
        let mut out = self.clone();
        out.parties.swap(a as usize, b as usize);
        out
    }

    /// Exchange the recipients of `a`'s and `b`'s (single) messages.
    pub fn swap_recipients(&self, a: PartyId, b: PartyId) -> Self {
        let mut out = self.clone();
        let ra = out.parties[a as usize][0].1;
        let rb = out.parties[b as usize][0].1;
        out.parties[a as usize][0].1 = rb;
        out.parties[b as usize][0].1 = ra;
        out
    }

    pub fn with_extra_message(&self, sender: PartyId, message: Message, recipient: PartyId) -> Self {
        let mut out = self.clone();
        out.parties[sender as usize].push((message, recipient));
        out
    }
}

pub fn sender_message(i: PartyId) -> Message {
    let mut m = b"m".to_vec();
    m.extend_from_slice(&i.to_le_bytes());
    m
}

/// `d(σ₀, σ₁) = Σ_i |σ₀,i ∇ σ₁,i|` with multiset symmetric difference.
pub fn input_distance(a: &InputVector, b: &InputVector) -> usize {
    let n = a.parties.len().max(b.parties.len());
    let empty = Vec::new();
    (0..n)
        .map(|i| {
            let mut count: BTreeMap<&(Message, PartyId), i64> = BTreeMap::new();
            for p in a.parties.get(i).unwrap_or(&empty) {
                *count.entry(p).or_default() += 1;
            }
            for p in b.parties.get(i).unwrap_or(&empty) {
                *count.entry(p).or_default() -= 1;
            }
            count.values().map(|c| c.unsigned_abs() as usize).sum::<usize>()
        })
        .sum()
}

//! Passive posterior over where one sender's onion was delivered.
//!
//! Mass is carried exactly through monitored parties (their internal records
//! link incoming and outgoing identifiers) and spread in proportion to link
//! volumes through everyone else.

use rustc_hash::FxHashMap;

use crate::onion::PartyId;
use crate::scalar::Real;
use crate::sim::{InternalRecord, ViewRecord};

struct Index<'a> {
    by_from: FxHashMap<(PartyId, u32, PartyId), Vec<&'a InternalRecord>>,
    by_id: FxHashMap<(PartyId, u32, [u8; 16]), &'a InternalRecord>,
}

impl<'a> Index<'a> {
    fn new(view: &'a ViewRecord) -> Self {
        let mut by_from: FxHashMap<_, Vec<_>> = FxHashMap::default();
        let mut by_id = FxHashMap::default();
        for (&p, recs) in &view.internals {
            for rec in recs {
                by_from.entry((p, rec.round, rec.from)).or_default().push(rec);
                by_id.insert((p, rec.round, rec.onion_id), rec);
            }
        }
        Self { by_from, by_id }
    }
}

struct Mass<'a, T> {
    honest: FxHashMap<PartyId, T>,
    handles: Vec<(PartyId, &'a InternalRecord, T)>,
}

impl<'a, T: Real> Mass<'a, T> {
    fn new() -> Self {
        Self {
            honest: FxHashMap::default(),
            handles: Vec::new(),
        }
    }

    fn arrive(&mut self, idx: &Index<'a>, to: PartyId, round: u32, from: PartyId, m: T) {
        match idx.by_from.get(&(to, round, from)) {
            Some(recs) if !recs.is_empty() => {
                let share = m / T::from_count(recs.len() as u64);
                self.handles.extend(recs.iter().map(|r| (to, *r, share)));
            }
            _ => *self.honest.entry(to).or_insert_with(T::zero) += m,
        }
    }
}

/// Probability mass, per party, of having received `origin`'s round-1 onion
/// on a link of `final_round`.
pub fn delivery_posterior<T: Real>(view: &ViewRecord, parties: u32, origin: PartyId, final_round: u32) -> Vec<T> {
    let idx = Index::new(view);
    let vols = &view.link_volumes;
    let mut out = vec![T::zero(); parties as usize];
    let Some(first) = vols.round(1) else { return out };
    let sent = first.out_links(origin);
    let total: u64 = sent.iter().map(|l| l.2 as u64).sum();
    if total == 0 {
        return out;
    }
    let mut mass = Mass::new();
    for &(_, to, c) in sent {
        mass.arrive(&idx, to, 1, origin, T::from_count(c as u64) / T::from_count(total));
    }
    for r in 2..=final_round {
        let Some(links) = vols.round(r) else { break };
        let mut next = Mass::new();
        for (&h, &m) in &mass.honest {
            let row = links.out_links(h);
            let t: u64 = row.iter().map(|l| l.2 as u64).sum();
            for &(_, to, c) in row {
                next.arrive(&idx, to, r, h, m * T::from_count(c as u64) / T::from_count(t));
            }
        }
        for &(_, rec, m) in &mass.handles {
            if rec.dropped {
                continue;
            }
            if let Some((to, id)) = rec.outgoing {
                match idx.by_id.get(&(to, r, id)) {
                    Some(r2) => next.handles.push((to, *r2, m)),
                    None => *next.honest.entry(to).or_insert_with(T::zero) += m,
                }
            }
        }
        mass = next;
    }
    for (&p, &m) in &mass.honest {
        out[p as usize] += m;
    }
    for &(p, _, m) in &mass.handles {
        out[p as usize] += m;
    }
    out
}

/// `ln P_a(x) + ln P_b(y) − ln P_a(y) − ln P_b(x)`, clamped to ±`clamp`.
/// Positive when the view favours a→x, b→y.
pub fn delivery_llr<T: Real>(pa: &[T], pb: &[T], x: PartyId, y: PartyId, clamp: T) -> T {
    let ln = |v: T| v.max(T::min_positive_value()).ln();
    let (x, y) = (x as usize, y as usize);
    let d = ln(pa[x]) + ln(pb[y]) - ln(pa[y]) - ln(pb[x]);
    d.max(-clamp).min(clamp)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::adversary::AdversaryClass;
    use crate::sim::{LinkVolumes, PeelSummary, RoundLinks};

    fn rec(round: u32, from: PartyId, id: u8, out: Option<(PartyId, u8)>) -> InternalRecord {
        InternalRecord {
            round,
            from,
            onion_id: [id; 16],
            peel: PeelSummary::Fail,
            outgoing: out.map(|(p, i)| (p, [i; 16])),
            dropped: false,
        }
    }

    #[test]
    fn monitored_relay_pins_the_path() {
        // 0 → 2 (monitored) → 4; 1 → 3 (honest) → {4, 5}.
        let rounds = vec![
            RoundLinks {
                round: 1,
                links: vec![(0, 2, 1), (1, 3, 1)],
            },
            RoundLinks {
                round: 2,
                links: vec![(2, 4, 1), (3, 5, 1)],
            },
        ];
        let mut internals = BTreeMap::new();
        internals.insert(2, vec![rec(1, 0, 7, Some((4, 8)))]);
        let view = ViewRecord {
            class: AdversaryClass::Passive,
            link_volumes: LinkVolumes { rounds },
            internals,
            adversary_randomness: None,
        };
        let pa = delivery_posterior::<f64>(&view, 6, 0, 2);
        assert_eq!(pa[4], 1.0);
        let pb = delivery_posterior::<f64>(&view, 6, 1, 2);
        assert_eq!(pb[5], 1.0);
        assert!(delivery_llr(&pa, &pb, 4, 5, 50.0) > 10.0);
    }

    #[test]
    fn honest_hub_spreads_mass() {
        let rounds = vec![
            RoundLinks {
                round: 1,
                links: vec![(0, 2, 1), (1, 2, 1)],
            },
            RoundLinks {
                round: 2,
                links: vec![(2, 4, 1), (2, 5, 1)],
            },
        ];
        let view = ViewRecord {
            class: AdversaryClass::Network,
            link_volumes: LinkVolumes { rounds },
            internals: BTreeMap::new(),
            adversary_randomness: None,
        };
        let pa = delivery_posterior::<f64>(&view, 6, 0, 2);
        assert_eq!((pa[4], pa[5]), (0.5, 0.5));
        let pb = delivery_posterior::<f64>(&view, 6, 1, 2);
        assert_eq!(delivery_llr(&pa, &pb, 4, 5, 50.0), 0.0);
    }
}

//! Adversary classes and drop strategies.
//!
//! A network adversary sees link volumes only. A passive adversary also sees
//! the internals of a monitored set. An active adversary controls a corrupted
//! set: its parties peel and forward correctly except where the strategy drops,
//! and they never abort. Honest onions can only be dropped, never altered.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::onion::PartyId;
use crate::rng::{sim_rng, SimRng};
use crate::sim::AdversaryLog;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("invalid kappa: {0} is outside [0, 1)")]
    Kappa(f64),
    #[error("invalid adversary.parties: party {0} is outside the network")]
    Party(PartyId),
    #[error("invalid adversary.strategy: {0}")]
    Strategy(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryClass {
    #[default]
    Network,
    Passive,
    Active,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// ⌊κN⌋ parties uniformly from all parties not excluded.
    #[default]
    Uniform,
    /// ⌊κn⌋ parties uniformly from the server set.
    Servers,
    /// Exactly these parties.
    Explicit(Vec<PartyId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DropScope {
    #[default]
    All,
    /// Onions whose previous hop was the target.
    FromTarget,
    /// Onions whose next hop is the target.
    ToTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Strategy {
    #[default]
    None,
    /// Drop every onion that arrived from `target` in round 1.
    DropAllFrom { target: PartyId },
    /// Drop each in-scope onion independently with probability `rate`. The
    /// optional window restricts the transmission rounds affected.
    DropFraction {
        rate: f64,
        #[serde(default)]
        scope: DropScope,
        #[serde(default)]
        target: Option<PartyId>,
        #[serde(default)]
        window: Option<(u32, u32)>,
    },
    /// Forward only onions that revealed a checkpoint nonce at this corrupted
    /// party; drop everything else.
    DropUnmatchedAtCorrupted,
}

impl Strategy {
    pub fn validate(&self, n: u32) -> Result<(), AdversaryError> {
        match self {
            Strategy::DropAllFrom { target } if *target >= n => Err(AdversaryError::Party(*target)),
            Strategy::DropFraction {
                rate, scope, target, ..
            } => {
                if !(0.0..=1.0).contains(rate) {
                    return Err(AdversaryError::Strategy(format!("rate {rate} outside [0, 1]")));
                }
                match (scope, target) {
                    (DropScope::All, _) => Ok(()),
                    (_, Some(t)) if *t < n => Ok(()),
                    (_, Some(t)) => Err(AdversaryError::Party(*t)),
                    (_, None) => Err(AdversaryError::Strategy("targeted scope needs a target".into())),
                }
            }
            _ => Ok(()),
        }
    }

    /// Parties the strategy is aimed at; they must stay honest.
    pub fn targets(&self) -> Vec<PartyId> {
        match self {
            Strategy::DropAllFrom { target } => vec![*target],
            Strategy::DropFraction { target: Some(t), .. } => vec![*t],
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub class: AdversaryClass,
    pub kappa: f64,
    pub selection: Selection,
    /// Parties never selected (e.g. the targets of a privacy comparison).
    pub exclude: Vec<PartyId>,
    pub strategy: Strategy,
}

impl AdversaryConfig {
    pub fn network() -> Self {
        Self::default()
    }

    pub fn passive(kappa: f64, selection: Selection) -> Self {
        Self {
            class: AdversaryClass::Passive,
            kappa,
            selection,
            ..Self::default()
        }
    }

    pub fn active(kappa: f64, selection: Selection, strategy: Strategy) -> Self {
        Self {
            class: AdversaryClass::Active,
            kappa,
            selection,
            strategy,
            ..Self::default()
        }
    }

    pub fn validate(&self, n: u32) -> Result<(), AdversaryError> {
        if !(0.0..1.0).contains(&self.kappa) || self.kappa.is_nan() {
            return Err(AdversaryError::Kappa(self.kappa));
        }
        if let Selection::Explicit(ps) = &self.selection {
            if let Some(&p) = ps.iter().find(|&&p| p >= n) {
                return Err(AdversaryError::Party(p));
            }
        }
        self.strategy.validate(n)
    }
}

/// ⌊κN⌋ distinct parties chosen uniformly.
pub fn select_corrupted(n: u32, kappa: f64, seed: u64) -> Result<Vec<PartyId>, AdversaryError> {
    let pool: Vec<PartyId> = (0..n).collect();
    select_from(&pool, kappa, seed)
}

/// ⌊κ·|pool|⌋ distinct members of `pool` chosen uniformly, sorted.
pub fn select_from(pool: &[PartyId], kappa: f64, seed: u64) -> Result<Vec<PartyId>, AdversaryError> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(AdversaryError::Kappa(kappa));
    }
    let count = (kappa * pool.len() as f64).floor() as usize;
    let mut rng = sim_rng(seed, "adversary/select", 0, 0);
    let mut out: Vec<PartyId> = sample(&mut rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    out.sort_unstable();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    /// Round in which the dropped onion arrived at `party`.
    pub round: u32,
    pub party: PartyId,
    pub from: PartyId,
    pub next: PartyId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Forward,
    Drop,
}

/// Per-run adversary state.
#[derive(Clone, Debug)]
pub struct Adversary {
    class: AdversaryClass,
    parties: Vec<PartyId>,
    member: Vec<bool>,
    strategy: Strategy,
    rng: SimRng,
    log: AdversaryLog,
}

impl Adversary {
    /// Fixes the party set before round 1. `selection_seed` alone determines the
    /// set, so two runs compared for privacy share it.
    pub fn new(
        config: &AdversaryConfig,
        n: u32,
        servers: &[PartyId],
        selection_seed: u64,
        coin_seed: u64,
    ) -> Result<Self, AdversaryError> {
        config.validate(n)?;
        let parties = match (&config.class, &config.selection) {
            (AdversaryClass::Network, _) => Vec::new(),
            (_, Selection::Explicit(ps)) => {
                let mut ps = ps.clone();
                ps.sort_unstable();
                ps.dedup();
                ps
            }
            (_, Selection::Servers) => {
                let pool: Vec<PartyId> = servers
                    .iter()
                    .copied()
                    .filter(|p| !config.exclude.contains(p))
                    .collect();
                select_from(&pool, config.kappa, selection_seed)?
            }
            (_, Selection::Uniform) => {
                let pool: Vec<PartyId> = (0..n).filter(|p| !config.exclude.contains(p)).collect();
                let count = (config.kappa * n as f64).floor() as usize;
                let count = count.min(pool.len());
                let mut rng = sim_rng(selection_seed, "adversary/select", 0, 0);
                let mut out: Vec<PartyId> = sample(&mut rng, pool.len(), count)
                    .into_iter()
                    .map(|i| pool[i])
                    .collect();
                out.sort_unstable();
                out
            }
        };
        Ok(Self::with_parties(
            config.class,
            parties,
            config.strategy.clone(),
            n,
            coin_seed,
        ))
    }

    pub fn with_parties(
        class: AdversaryClass,
        parties: Vec<PartyId>,
        strategy: Strategy,
        n: u32,
        coin_seed: u64,
    ) -> Self {
        let mut member = vec![false; n as usize];
        for &p in &parties {
            member[p as usize] = true;
        }
        Self {
            class,
            parties,
            member,
            strategy,
            rng: sim_rng(coin_seed, "adversary/coins", 0, 0),
            log: AdversaryLog::default(),
        }
    }

    pub fn none(n: u32) -> Self {
        Self::with_parties(AdversaryClass::Network, Vec::new(), Strategy::None, n, 0)
    }

    pub fn class(&self) -> AdversaryClass {
        self.class
    }

    pub fn parties(&self) -> &[PartyId] {
        &self.parties
    }

    pub fn corrupted_mask(&self) -> Vec<bool> {
        if self.class == AdversaryClass::Active {
            self.member.clone()
        } else {
            vec![false; self.member.len()]
        }
    }

    #[inline]
    pub fn observes(&self, party: PartyId) -> bool {
        self.class != AdversaryClass::Network && self.member[party as usize]
    }

    #[inline]
    pub fn acts(&self, party: PartyId) -> bool {
        self.class == AdversaryClass::Active && self.member[party as usize]
    }

    pub fn log(&self) -> &AdversaryLog {
        &self.log
    }

    /// Decision for an onion that arrived at corrupted `party` in `round` from
    /// `from` and is bound for `next` in round `round + 1`.
    pub fn on_relay(
        &mut self,
        party: PartyId,
        from: PartyId,
        round: u32,
        next: PartyId,
        revealed_nonce: bool,
    ) -> Decision {
        let drop = match &self.strategy {
            Strategy::None => false,
            Strategy::DropAllFrom { target } => round == 1 && from == *target,
            Strategy::DropFraction {
                rate,
                scope,
                target,
                window,
            } => {
                let tx = round + 1;
                let in_window = window.map_or(true, |(a, b)| (a..=b).contains(&tx));
                let in_scope = match scope {
                    DropScope::All => true,
                    DropScope::FromTarget => Some(from) == *target,
                    DropScope::ToTarget => Some(next) == *target,
                };
                if in_window && in_scope {
                    self.log.coins += 1;
                    self.rng.gen_bool(*rate)
                } else {
                    false
                }
            }
            Strategy::DropUnmatchedAtCorrupted => !revealed_nonce,
        };
        if drop {
            self.log.drops.push(DropRecord {
                round,
                party,
                from,
                next,
            });
            Decision::Drop
        } else {
            Decision::Forward
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_sizes_and_validation() {
        assert!(select_corrupted(64, 0.0, 1).unwrap().is_empty());
        assert_eq!(select_corrupted(64, 0.5, 1).unwrap().len(), 32);
        assert_eq!(select_corrupted(64, 1.2, 1), Err(AdversaryError::Kappa(1.2)));
        let cfg = AdversaryConfig::active(0.1, Selection::Explicit(vec![3, 1, 2]), Strategy::None);
        let a = Adversary::new(&cfg, 8, &[], 0, 0).unwrap();
        assert_eq!(a.parties(), &[1, 2, 3]);
        assert!(a.acts(2) && !a.acts(0));
    }

    #[test]
    fn uniform_selection_marginals() {
        let n = 64;
        let mut hits = vec![0u32; n as usize];
        for seed in 0..1000 {
            for p in select_corrupted(n, 0.5, seed).unwrap() {
                hits[p as usize] += 1;
            }
        }
        for h in hits {
            assert!((h as f64 / 1000.0 - 0.5).abs() < 0.06, "{h}");
        }
    }

    #[test]
    fn exclusions_are_honored() {
        let cfg = AdversaryConfig {
            exclude: vec![0, 1],
            ..AdversaryConfig::active(0.5, Selection::Uniform, Strategy::None)
        };
        for seed in 0..50 {
            let a = Adversary::new(&cfg, 8, &[], seed, 0).unwrap();
            assert_eq!(a.parties().len(), 4);
            assert!(!a.parties().contains(&0) && !a.parties().contains(&1));
        }
    }

    #[test]
    fn strategies_decide_as_documented() {
        let mut a = Adversary::with_parties(
            AdversaryClass::Active,
            vec![0],
            Strategy::DropAllFrom { target: 5 },
            8,
            0,
        );
        assert_eq!(a.on_relay(0, 5, 1, 2, false), Decision::Drop);
        assert_eq!(a.on_relay(0, 5, 2, 2, false), Decision::Forward);
        assert_eq!(a.on_relay(0, 4, 1, 2, false), Decision::Forward);
        assert_eq!(a.log().drops.len(), 1);

        let mut u = Adversary::with_parties(
            AdversaryClass::Active,
            vec![0],
            Strategy::DropUnmatchedAtCorrupted,
            8,
            0,
        );
        assert_eq!(u.on_relay(0, 1, 3, 2, true), Decision::Forward);
        assert_eq!(u.on_relay(0, 1, 3, 2, false), Decision::Drop);

        let strat = Strategy::DropFraction {
            rate: 1.0,
            scope: DropScope::ToTarget,
            target: Some(7),
            window: Some((5, 5)),
        };
        let mut f = Adversary::with_parties(AdversaryClass::Active, vec![0], strat, 8, 0);
        assert_eq!(f.on_relay(0, 1, 4, 7, false), Decision::Drop);
        assert_eq!(f.on_relay(0, 1, 3, 7, false), Decision::Forward);
        assert_eq!(f.on_relay(0, 1, 4, 6, false), Decision::Forward);
    }

    #[test]
    fn drop_fraction_rate_is_respected() {
        let strat = Strategy::DropFraction {
            rate: 0.1,
            scope: DropScope::All,
            target: None,
            window: None,
        };
        let mut f = Adversary::with_parties(AdversaryClass::Active, vec![0], strat, 2, 9);
        let drops = (0..100_000)
            .filter(|_| f.on_relay(0, 1, 1, 1, false) == Decision::Drop)
            .count();
        assert!((drops as f64 / 1e5 - 0.1).abs() < 0.005);
        assert_eq!(f.log().drops.len(), drops);
    }
}

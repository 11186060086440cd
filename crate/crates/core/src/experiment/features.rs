use sha2::{Digest, Sha256};

use super::config::{Change, FeatureId};
use crate::analysis::trace::{delivery_llr, delivery_posterior};
use crate::onion::PartyId;
use crate::sim::{InputVector, RunReport};

/// Parties a pair experiment is about.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Targets {
    pub senders: Vec<PartyId>,
    /// Recipients of `senders` under the base input, same order.
    pub recipients: Vec<PartyId>,
}

impl Targets {
    pub fn of(change: &Change, base: &InputVector) -> Self {
        match change {
            Change::SwapRecipients { a, b } => Self {
                senders: vec![*a, *b],
                recipients: vec![base.parties[*a as usize][0].1, base.parties[*b as usize][0].1],
            },
            Change::AddMessage { sender, recipient, .. } => Self {
                senders: vec![*sender],
                recipients: vec![*recipient],
            },
            Change::Repermute => Self::default(),
        }
    }

    pub fn all(&self) -> Vec<PartyId> {
        let mut v: Vec<PartyId> = self.senders.iter().chain(&self.recipients).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Numeric features plus, for `ViewDigest`, the hex digest.
pub fn extract_features(
    id: FeatureId,
    report: &RunReport,
    targets: &Targets,
    final_round: u32,
    clamp: f64,
) -> (Vec<f64>, Option<String>) {
    let view = report.extract_view(report.view.class);
    let vols = &view.link_volumes;
    let inflow = |p: PartyId| vols.round(final_round).map_or(0, |l| l.inflow(p)) as f64;
    match id {
        FeatureId::None => (Vec::new(), None),
        FeatureId::DeliveryLlr => {
            let (Some(&a), Some(&b)) = (targets.senders.first(), targets.senders.get(1)) else {
                return (vec![0.0], None);
            };
            let (x, y) = (targets.recipients[0], targets.recipients[1]);
            let pa: Vec<f64> = delivery_posterior(&view, report.parties, a, final_round);
            let pb: Vec<f64> = delivery_posterior(&view, report.parties, b, final_round);
            (vec![delivery_llr(&pa, &pb, x, y, clamp)], None)
        }
        FeatureId::Xy => {
            let s = targets.senders.first().copied().unwrap_or(0);
            let r = targets.recipients.first().copied().unwrap_or(0);
            let x = vols.round(1).map_or(0, |l| l.outflow(s)) as f64;
            (vec![x, inflow(r)], None)
        }
        FeatureId::LinkPattern => {
            // Who delivered to each target, −1 when nothing arrived.
            let last = vols.round(final_round);
            let from = |p: PartyId| {
                last.and_then(|l| l.links.iter().find(|x| x.1 == p))
                    .map_or(-1.0, |x| x.0 as f64)
            };
            (targets.recipients.iter().map(|&p| from(p)).collect(), None)
        }
        FeatureId::ViewDigest => (Vec::new(), Some(format!("{:x}", Sha256::digest(view.to_bytes())))),
    }
}

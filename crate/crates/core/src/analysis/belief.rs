//! The network adversary's posterior over the location of one onion.

use serde::Serialize;

use super::AnalysisError;
use crate::onion::PartyId;
use crate::scalar::{KahanSum, Real};
use crate::sim::{RoundLinks, RunReport};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeliefVector<T> {
    pub x: Vec<T>,
    pub round: u32,
}

impl<T: Real> BeliefVector<T> {
    pub fn point_mass(bins: usize, at: usize, round: u32) -> Self {
        let mut x = vec![T::zero(); bins];
        x[at] = T::one();
        Self { x, round }
    }

    pub fn gap(&self) -> T {
        if self.x.is_empty() {
            return T::zero();
        }
        let max = self.x.iter().copied().fold(T::neg_infinity(), T::max);
        let min = self.x.iter().copied().fold(T::infinity(), T::min);
        max - min
    }

    pub fn total(&self) -> T {
        self.x.iter().copied().collect::<KahanSum<T>>().total()
    }
}

/// Dense `count[i][j]` between bins for one round.
#[derive(Clone, Debug, PartialEq)]
pub struct BinCounts {
    pub bins: usize,
    pub counts: Vec<u32>,
}

impl BinCounts {
    pub fn zeros(bins: usize) -> Self {
        Self {
            bins,
            counts: vec![0; bins * bins],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.bins + j]
    }

    pub fn add(&mut self, i: usize, j: usize, c: u32) {
        self.counts[i * self.bins + j] += c;
    }

    /// Restricts one round's links to the given bins.
    pub fn from_links(links: &RoundLinks, bin_of: &[Option<usize>], bins: usize) -> Self {
        let mut out = Self::zeros(bins);
        for &(f, t, c) in &links.links {
            if let (Some(Some(i)), Some(Some(j))) = (bin_of.get(f as usize), bin_of.get(t as usize)) {
                out.add(*i, *j, c);
            }
        }
        out
    }
}

/// `X′_j = Σ_i X_i · count[i→j] / outflow_i`. A bin with mass but no outflow
/// keeps its mass and the returned flag is set.
pub fn belief_update<T: Real>(x: &BeliefVector<T>, counts: &BinCounts) -> (BeliefVector<T>, bool) {
    let n = counts.bins;
    let mut next = vec![KahanSum::<T>::new(); n];
    let mut anomaly = false;
    for i in 0..n {
        let xi = x.x[i];
        if xi == T::zero() {
            continue;
        }
        let row = &counts.counts[i * n..(i + 1) * n];
        let out: u64 = row.iter().map(|&c| c as u64).sum();
        if out == 0 {
            next[i].add(xi);
            anomaly = true;
            continue;
        }
        let scale = xi / T::from_count(out);
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                next[j].add(scale * T::from_count(c as u64));
            }
        }
    }
    (
        BeliefVector {
            x: next.iter().map(KahanSum::total).collect(),
            round: x.round + 1,
        },
        anomaly,
    )
}

/// `g^r = max X^r − min X^r` for `r = 1..=path_len`, starting from a point mass
/// at the target's first-hop server, using link volumes only.
pub fn mixing_gap_trace<T: Real>(
    report: &RunReport,
    servers: &[PartyId],
    target: PartyId,
    path_len: u32,
) -> Result<Vec<T>, AnalysisError> {
    Ok(gap_traces(report, servers, target, path_len)?.0)
}

/// Like [`mixing_gap_trace`], but on the per-onion likelihood `N·X_j / load_j`.
/// Its fixed point is 1 everywhere, so the gap can reach zero even though
/// `X` itself settles at the (uneven) load profile.
pub fn per_onion_gap_trace<T: Real>(
    report: &RunReport,
    servers: &[PartyId],
    target: PartyId,
    path_len: u32,
) -> Result<Vec<T>, AnalysisError> {
    Ok(gap_traces(report, servers, target, path_len)?.1)
}

fn gap_traces<T: Real>(
    report: &RunReport,
    servers: &[PartyId],
    target: PartyId,
    path_len: u32,
) -> Result<(Vec<T>, Vec<T>), AnalysisError> {
    let n = servers.len();
    if n <= 1 {
        let z = vec![T::zero(); path_len as usize];
        return Ok((z.clone(), z));
    }
    let mut bin_of = vec![None; report.parties as usize];
    for (b, &s) in servers.iter().enumerate() {
        bin_of[s as usize] = Some(b);
    }
    let vols = &report.view.link_volumes;
    let first = vols
        .round(1)
        .ok_or_else(|| AnalysisError::Unsupported("no round 1".into()))?;
    let out = first.out_links(target);
    let total: u32 = out.iter().map(|l| l.2).sum();
    if total == 0 {
        return Err(AnalysisError::Unsupported(format!(
            "party {target} sent nothing in round 1"
        )));
    }
    let mut x = BeliefVector {
        x: vec![T::zero(); n],
        round: 1,
    };
    for &(_, to, c) in out {
        let b =
            bin_of[to as usize].ok_or_else(|| AnalysisError::Unsupported(format!("first hop {to} is not a server")))?;
        x.x[b] += T::from_count(c as u64) / T::from_count(total as u64);
    }
    // Onions held by each bin after a round: its inflow in that round.
    let per_onion = |x: &BeliefVector<T>, links: &RoundLinks| {
        let mut load = vec![0u64; n];
        for &(_, to, c) in &links.links {
            if let Some(b) = bin_of[to as usize] {
                load[b] += c as u64;
            }
        }
        let all = T::from_count(load.iter().sum());
        let (mut hi, mut lo) = (T::neg_infinity(), T::infinity());
        for (xi, &l) in x.x.iter().zip(&load) {
            let v = if l == 0 {
                T::zero()
            } else {
                *xi * all / T::from_count(l)
            };
            hi = hi.max(v);
            lo = lo.min(v);
        }
        hi - lo
    };
    let mut gaps = vec![x.gap()];
    let mut normalized = vec![per_onion(&x, first)];
    for r in 2..=path_len {
        let links = vols
            .round(r)
            .ok_or_else(|| AnalysisError::Unsupported(format!("no round {r}")))?;
        let (next, _) = belief_update(&x, &BinCounts::from_links(links, &bin_of, n));
        x = next;
        gaps.push(x.gap());
        normalized.push(per_onion(&x, links));
    }
    Ok((gaps, normalized))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_splits_evenly_over_successors() {
        let mut c = BinCounts::zeros(4);
        for j in 0..4 {
            c.add(1, j, 1);
        }
        let x = BeliefVector::<f64>::point_mass(4, 1, 1);
        let (y, anomaly) = belief_update(&x, &c);
        assert!(!anomaly);
        assert_eq!(y.x, vec![0.25; 4]);
        assert_eq!(y.round, 2);
    }

    #[test]
    fn uniform_is_a_fixed_point_of_balanced_counts() {
        let mut c = BinCounts::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                c.add(i, j, 5);
            }
        }
        let x = BeliefVector {
            x: vec![1.0f32 / 3.0; 3],
            round: 4,
        };
        let (y, _) = belief_update(&x, &c);
        for v in y.x {
            assert!((v - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_outflow_keeps_mass() {
        let c = BinCounts::zeros(2);
        let (y, anomaly) = belief_update(&BeliefVector::<f64>::point_mass(2, 0, 1), &c);
        assert!(anomaly);
        assert_eq!(y.x, vec![1.0, 0.0]);
    }
}

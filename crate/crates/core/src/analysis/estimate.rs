//! Two-sample privacy estimators on discretised features.
//!
//! Features are mapped to cells by `Ord` on the key; vector features should be
//! pre-binned with [`QuantileBinner`].

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::AnalysisError;
use crate::rng::sim_rng;
use crate::scalar::{KahanSum, Real};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvConfig {
    pub bootstrap: usize,
    pub permutations: usize,
    /// Two-sided confidence of the reported interval.
    pub confidence: f64,
    pub min_trials: usize,
    pub seed: u64,
}

impl Default for TvConfig {
    fn default() -> Self {
        Self {
            bootstrap: 200,
            permutations: 200,
            confidence: 0.95,
            min_trials: 30,
            seed: 0x7476,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvEstimate<T> {
    /// Plug-in ½ Σ |p̂ − q̂|.
    pub estimate: T,
    /// Bias-corrected interval: estimate minus the permutation-null quantiles,
    /// clipped at zero.
    pub ci_low: T,
    pub ci_high: T,
    /// Percentile bootstrap interval of the plug-in value.
    pub bootstrap_low: T,
    pub bootstrap_high: T,
    /// Upper null quantile: plug-in values at or below it are indistinguishable
    /// from sampling noise.
    pub null_quantile: T,
    pub contains_zero: bool,
    pub trials: usize,
    pub cells: usize,
}

/// Dense cell ids for two samples under a shared ordering of keys.
pub fn shared_cells<K: Ord + Clone>(s0: &[K], s1: &[K]) -> (Vec<u32>, Vec<u32>, usize) {
    let mut ids: BTreeMap<K, u32> = BTreeMap::new();
    for k in s0.iter().chain(s1) {
        ids.entry(k.clone()).or_insert(0);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i as u32;
    }
    let map = |s: &[K]| s.iter().map(|k| ids[k]).collect::<Vec<_>>();
    (map(s0), map(s1), ids.len())
}

fn counts(cells: impl Iterator<Item = u32>, m: usize) -> Vec<u64> {
    let mut c = vec![0u64; m];
    for x in cells {
        c[x as usize] += 1;
    }
    c
}

pub fn tv_from_counts<T: Real>(c0: &[u64], c1: &[u64]) -> T {
    let n0 = T::from_count(c0.iter().sum::<u64>().max(1));
    let n1 = T::from_count(c1.iter().sum::<u64>().max(1));
    let s: KahanSum<T> = c0
        .iter()
        .zip(c1)
        .map(|(&a, &b)| (T::from_count(a) / n0 - T::from_count(b) / n1).abs())
        .collect();
    s.total() * T::lit(0.5)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let i = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[i]
}

pub fn tv_distance_estimate<K: Ord + Clone, T: Real>(
    s0: &[K],
    s1: &[K],
    cfg: &TvConfig,
) -> Result<TvEstimate<T>, AnalysisError> {
    if s0.len() < cfg.min_trials || s1.len() < cfg.min_trials {
        return Err(AnalysisError::TooFewSamples(format!(
            "{} and {} samples, need {}",
            s0.len(),
            s1.len(),
            cfg.min_trials
        )));
    }
    let (a, b, m) = shared_cells(s0, s1);
    let estimate: T = tv_from_counts(&counts(a.iter().copied(), m), &counts(b.iter().copied(), m));
    let mut rng = sim_rng(cfg.seed, "estimate/tv", a.len() as u64, b.len() as u64);

    let mut boot = Vec::with_capacity(cfg.bootstrap);
    for _ in 0..cfg.bootstrap {
        let c0 = counts((0..a.len()).map(|_| a[rng.gen_range(0..a.len())]), m);
        let c1 = counts((0..b.len()).map(|_| b[rng.gen_range(0..b.len())]), m);
        boot.push(tv_from_counts::<T>(&c0, &c1).as_f64());
    }
    let mut pooled: Vec<u32> = a.iter().chain(&b).copied().collect();
    let mut null = Vec::with_capacity(cfg.permutations);
    for _ in 0..cfg.permutations {
        pooled.shuffle(&mut rng);
        let (x, y) = pooled.split_at(a.len());
        null.push(tv_from_counts::<T>(&counts(x.iter().copied(), m), &counts(y.iter().copied(), m)).as_f64());
    }
    boot.sort_by(f64::total_cmp);
    null.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.confidence) / 2.0;
    let (q_lo, q_hi) = (quantile(&null, tail), quantile(&null, 1.0 - tail));
    let est = estimate.as_f64();
    Ok(TvEstimate {
        estimate,
        ci_low: T::lit((est - q_hi).max(0.0)),
        ci_high: T::lit((est - q_lo).max(0.0)),
        bootstrap_low: T::lit(quantile(&boot, tail)),
        bootstrap_high: T::lit(quantile(&boot, 1.0 - tail)),
        null_quantile: T::lit(q_hi),
        contains_zero: est <= q_hi,
        trials: a.len().min(b.len()),
        cells: m,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DpConfig {
    pub delta: f64,
    /// Cells with fewer pooled samples are merged with their neighbours.
    pub min_cell: usize,
    pub min_trials: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            min_cell: 50,
            min_trials: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DpEstimate<T> {
    /// Smallest ε with hockey-stick divergence ≤ δ; `None` when no finite ε works.
    pub epsilon: Option<T>,
    pub delta: T,
    pub cells: usize,
    pub trials: usize,
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Real> DpEstimate<T> {
    pub fn delta_at(&self, eps: T) -> T {
        hockey_stick(&self.p, &self.q, eps)
    }
}

/// `max(Σ (p − e^ε q)⁺, Σ (q − e^ε p)⁺)`.
pub fn hockey_stick<T: Real>(p: &[T], q: &[T], eps: T) -> T {
    let e = eps.exp();
    let one_way = |a: &[T], b: &[T]| -> T {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (x - e * y).max(T::zero()))
            .collect::<KahanSum<T>>()
            .total()
    };
    one_way(p, q).max(one_way(q, p))
}

/// Greedy left-to-right merge of adjacent cells until each merged cell holds
/// at least `min_cell` pooled samples; a short tail joins the last cell.
pub fn merge_sparse_cells(c0: &[u64], c1: &[u64], min_cell: usize) -> (Vec<u64>, Vec<u64>) {
    let (mut m0, mut m1) = (Vec::new(), Vec::new());
    let (mut a, mut b) = (0u64, 0u64);
    for (&x, &y) in c0.iter().zip(c1) {
        a += x;
        b += y;
        if (a + b) as usize >= min_cell {
            m0.push(a);
            m1.push(b);
            a = 0;
            b = 0;
        }
    }
    if a + b > 0 {
        match (m0.last_mut(), m1.last_mut()) {
            (Some(x), Some(y)) => {
                *x += a;
                *y += b;
            }
            _ => {
                m0.push(a);
                m1.push(b);
            }
        }
    }
    (m0, m1)
}

pub fn dp_ratio_estimate<K: Ord + Clone, T: Real>(
    s0: &[K],
    s1: &[K],
    cfg: &DpConfig,
) -> Result<DpEstimate<T>, AnalysisError> {
    if s0.len() < cfg.min_trials || s1.len() < cfg.min_trials {
        return Err(AnalysisError::TooFewSamples(format!(
            "{} and {} samples",
            s0.len(),
            s1.len()
        )));
    }
    let (a, b, m) = shared_cells(s0, s1);
    let (c0, c1) = merge_sparse_cells(
        &counts(a.iter().copied(), m),
        &counts(b.iter().copied(), m),
        cfg.min_cell,
    );
    let n0 = T::from_count(a.len() as u64);
    let n1 = T::from_count(b.len() as u64);
    let p: Vec<T> = c0.iter().map(|&c| T::from_count(c) / n0).collect();
    let q: Vec<T> = c1.iter().map(|&c| T::from_count(c) / n1).collect();
    let delta = T::lit(cfg.delta);
    let epsilon = min_epsilon(&p, &q, delta);
    Ok(DpEstimate {
        epsilon,
        delta,
        cells: p.len(),
        trials: a.len().min(b.len()),
        p,
        q,
    })
}

/// Bisection on the non-increasing map ε ↦ hockey_stick(ε).
pub fn min_epsilon<T: Real>(p: &[T], q: &[T], delta: T) -> Option<T> {
    if hockey_stick(p, q, T::zero()) <= delta {
        return Some(T::zero());
    }
    // Beyond the largest finite log-ratio only zero-cells contribute.
    let mut hi = T::zero();
    for (&x, &y) in p.iter().zip(q) {
        if x > T::zero() && y > T::zero() {
            hi = hi.max((x / y).ln().abs());
        }
    }
    hi = hi + T::one();
    if hockey_stick(p, q, hi) > delta {
        return None;
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if hockey_stick(p, q, mid) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Per-dimension quantile edges fitted on the pooled sample, so both
/// distributions share one discretisation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantileBinner {
    pub edges: Vec<Vec<f64>>,
}

impl QuantileBinner {
    pub fn fit(samples: &[&[f64]], bins_per_dim: usize) -> Self {
        let dims = samples.first().map_or(0, |s| s.len());
        let edges = (0..dims)
            .map(|d| {
                let mut col: Vec<f64> = samples.iter().map(|s| s[d]).collect();
                col.sort_by(f64::total_cmp);
                let mut e: Vec<f64> = (1..bins_per_dim)
                    .map(|i| quantile(&col, i as f64 / bins_per_dim as f64))
                    .collect();
                e.dedup();
                e
            })
            .collect();
        Self { edges }
    }

    /// Bin `i` holds values in `(edges[i−1], edges[i]]`.
    pub fn cell(&self, x: &[f64]) -> Vec<u16> {
        self.edges
            .iter()
            .zip(x)
            .map(|(e, &v)| e.partition_point(|&t| t < v) as u16)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_contain_zero() {
        let s: Vec<u8> = (0..2000).map(|i| (i * 7 % 5) as u8).collect();
        let e = tv_distance_estimate::<u8, f64>(&s, &s, &TvConfig::default()).unwrap();
        assert_eq!(e.estimate, 0.0);
        assert!(e.contains_zero);
    }

    #[test]
    fn disjoint_samples_have_unit_distance() {
        let a = vec![0u8; 500];
        let b = vec![1u8; 500];
        let e = tv_distance_estimate::<u8, f64>(&a, &b, &TvConfig::default()).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert!(!e.contains_zero);
        assert!(e.ci_low > 0.9);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(tv_distance_estimate::<u8, f32>(&[1], &[1], &TvConfig::default()).is_err());
    }

    #[test]
    fn hockey_stick_matches_hand_computation() {
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        // e^0: (0.5 − 0.25) = 0.25 either way.
        assert!((hockey_stick(&p, &q, 0.0f64) - 0.25).abs() < 1e-15);
        assert!(hockey_stick(&p, &q, 2f64.ln()) < 1e-15);
        let eps = min_epsilon(&p, &q, 1e-9).unwrap();
        assert!((eps - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn disjoint_support_has_unbounded_epsilon() {
        assert_eq!(min_epsilon(&[1.0f64, 0.0], &[0.0, 1.0], 0.1), None);
        // Unless δ absorbs the mass.
        assert!(min_epsilon(&[0.95f64, 0.05], &[1.0, 0.0], 0.1).is_some());
    }

    #[test]
    fn sparse_cells_merge_left_to_right() {
        let (a, b) = merge_sparse_cells(&[1, 1, 5, 0, 1], &[0, 1, 5, 0, 0], 4);
        assert_eq!((a, b), (vec![8], vec![6]));
    }

    #[test]
    fn quantile_binner_is_monotone() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let b = QuantileBinner::fit(&refs, 4);
        assert_eq!(b.edges[0].len(), 3);
        assert!(b.edges[1].len() <= 3);
        assert!(b.cell(&[0.0, 0.0])[0] < b.cell(&[99.0, 0.0])[0]);
    }
}

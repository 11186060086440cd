//! Statistical indistinguishability probe for the ideal backend.

use serde::Serialize;

use super::{Backend, Nonce, OnionError, OnionScheme, Payload, RoutingPath};
use crate::analysis::estimate::{tv_distance_estimate, TvConfig};

/// Everything needed to (re-)form one onion.
pub struct OnionSpec<'a, K> {
    pub payload: Payload,
    pub path: RoutingPath,
    pub public_keys: Vec<&'a K>,
    pub nonces: Vec<Option<Nonce>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub trials: usize,
    /// Largest per-byte-position plug-in TV between the two handle samples.
    pub max_tv: f64,
    /// Permutation-null quantile the largest TV is compared against.
    pub noise_floor: f64,
    pub equal_byte_lengths: bool,
    pub indistinguishable: bool,
}

/// Re-forms both specs `trials` times and compares the byte distributions of the
/// transmitted onion an observer without keys would see. Only meaningful for
/// the ideal backend; the real backend's hiding is computational.
pub fn unlinkability_probe<S: OnionScheme>(
    scheme: &mut S,
    a: &OnionSpec<'_, S::PublicKey>,
    b: &OnionSpec<'_, S::PublicKey>,
    trials: usize,
    rng: &mut S::FormRng,
) -> Result<ProbeReport, OnionError> {
    if S::BACKEND != Backend::Ideal {
        return Err(OnionError::Unsupported("real"));
    }
    let mut ids = [Vec::with_capacity(trials), Vec::with_capacity(trials)];
    let mut equal_len = true;
    let mut len0 = None;
    for _ in 0..trials {
        for (side, spec) in [a, b].into_iter().enumerate() {
            let o = scheme.form_first(&spec.payload, &spec.path, &spec.public_keys, &spec.nonces, rng)?;
            let l = scheme.byte_len(&o);
            equal_len &= *len0.get_or_insert(l) == l;
            ids[side].push(scheme.observed_id(&o));
        }
    }
    let positions = 16;
    let cfg = TvConfig {
        confidence: 1.0 - 0.05 / positions as f64,
        ..TvConfig::default()
    };
    let mut max_tv = 0.0f64;
    let mut floor = 0.0f64;
    let mut all_zero = true;
    for pos in 0..positions {
        let s0: Vec<u8> = ids[0].iter().map(|h| h[pos]).collect();
        let s1: Vec<u8> = ids[1].iter().map(|h| h[pos]).collect();
        let est = tv_distance_estimate::<u8, f64>(
            &s0,
            &s1,
            &TvConfig {
                seed: cfg.seed ^ pos as u64,
                ..cfg.clone()
            },
        )
        .map_err(|_| OnionError::Unsupported("probe with too few trials"))?;
        if est.estimate >= max_tv {
            max_tv = est.estimate;
            floor = est.null_quantile;
        }
        all_zero &= est.contains_zero;
    }
    Ok(ProbeReport {
        trials,
        max_tv,
        noise_floor: floor,
        equal_byte_lengths: equal_len,
        indistinguishable: all_zero && equal_len,
    })
}

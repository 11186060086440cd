use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::onion::PartyId;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ParamError {
    ParamError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolId {
    PiP,
    PiA,
    PiN,
    PiNPlus,
}

impl std::fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProtocolId::PiP => "pi_p",
            ProtocolId::PiA => "pi_a",
            ProtocolId::PiN => "pi_n",
            ProtocolId::PiNPlus => "pi_n_plus",
        })
    }
}

/// How the pairwise checkpoint PRF is instantiated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrfMode {
    /// DH-derived keys with HMAC-SHA256.
    Hmac,
    /// Independent random keys with a lazily sampled random function.
    #[default]
    RandomFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// N.
    pub parties: u32,
    /// n (Π_p, Π_n). Servers are parties `0..n`.
    pub servers: u32,
    /// L. For Π_a, 0 means `⌈β · log²λ⌉`.
    pub path_len: u32,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub d: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Abort threshold override; derived from (c, d, κ, α, log²λ) when absent.
    pub threshold: Option<f64>,
    pub session: u64,
    /// B (Π_n⁺).
    pub branching: u32,
    /// H (Π_n⁺).
    pub height: u32,
    /// Surrogate for log²λ.
    pub log2_lambda: f64,
    /// Surrogate for log λ.
    pub log_lambda: f64,
    pub message_len: usize,
    pub cumulative_missing: bool,
    pub prf: PrfMode,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            parties: 16,
            servers: 4,
            path_len: 4,
            alpha: 1.0,
            beta: 1.0,
            c: 0.5,
            d: 0.5,
            kappa: 0.0,
            epsilon: 1.0,
            delta: 1.0 / 1024.0,
            threshold: None,
            session: 0,
            branching: 2,
            height: 2,
            log2_lambda: 4.0,
            log_lambda: 2.0,
            message_len: 64,
            cumulative_missing: false,
            prf: PrfMode::RandomFunction,
        }
    }
}

/// `t = c (1−d) (1−κ)² α log²λ`.
pub fn abort_threshold<T: Real>(c: T, d: T, kappa: T, alpha: T, log2_lambda: T) -> T {
    let h = T::one() - kappa;
    c * (T::one() - d) * h * h * alpha * log2_lambda
}

/// `αβ ≥ −36 (1+ε/2)² ln(δ/4) / ((1−c)(1−κ)² ε²)`.
pub fn alpha_beta_min<T: Real>(epsilon: T, delta: T, c: T, kappa: T) -> T {
    let half = epsilon / T::lit(2.0);
    let h = T::one() - kappa;
    -T::lit(36.0) * (T::one() + half) * (T::one() + half) * (delta / T::lit(4.0)).ln()
        / ((T::one() - c) * h * h * epsilon * epsilon)
}

/// `d′ = (ε/2) / (1 + ε/2)`.
pub fn d_prime<T: Real>(epsilon: T) -> T {
    let half = epsilon / T::lit(2.0);
    half / (T::one() + half)
}

impl ProtocolParams {
    pub fn pi_a_path_len(&self) -> u32 {
        if self.path_len > 0 {
            self.path_len
        } else {
            (self.beta * self.log2_lambda).ceil() as u32
        }
    }

    pub fn abort_threshold(&self) -> f64 {
        self.threshold
            .unwrap_or_else(|| abort_threshold(self.c, self.d, self.kappa, self.alpha, self.log2_lambda))
    }

    /// Checkpoint frequency `α log²λ / N`.
    pub fn checkpoint_frequency(&self) -> f64 {
        crate::checkpoint::checkpoint_frequency(self.alpha, self.log2_lambda, self.parties)
    }

    /// Π_n packet size `k = ⌈α log λ⌉`.
    pub fn pi_n_packet(&self) -> u32 {
        (self.alpha * self.log_lambda).ceil() as u32
    }

    /// Π_n⁺ packet size `k = ⌈(1+d) α log²λ⌉`.
    pub fn pi_n_plus_packet(&self) -> u32 {
        ((1.0 + self.d) * self.alpha * self.log2_lambda).ceil() as u32
    }

    /// `n′ = B^{H−1}`.
    pub fn butterfly_nodes(&self) -> Option<u32> {
        self.branching.checked_pow(self.height.checked_sub(1)?)
    }

    pub fn server_ids(&self) -> Vec<PartyId> {
        (0..self.servers).collect()
    }

    pub fn validate(&self, id: ProtocolId) -> Result<(), ParamError> {
        let unit = |field, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("{v} is outside (0, 1)")))
            }
        };
        if self.parties == 0 {
            return Err(invalid("parties", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(invalid("kappa", format!("{} is outside [0, 1)", self.kappa)));
        }
        if !(self.log2_lambda > 0.0) {
            return Err(invalid("log2_lambda", "must be positive"));
        }
        match id {
            ProtocolId::PiP => {
                if self.servers == 0 || self.servers > self.parties {
                    return Err(invalid("servers", format!("{} is outside [1, N]", self.servers)));
                }
                if self.path_len == 0 {
                    return Err(invalid("path_len", "L ≥ 1 is required"));
                }
            }
            ProtocolId::PiA => {
                if self.pi_a_path_len() == 0 {
                    return Err(invalid("path_len", "L ≥ 1 is required"));
                }
                if !(self.alpha >= 0.0) {
                    return Err(invalid("alpha", "must be non-negative"));
                }
                let p = self.checkpoint_frequency();
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(
                        "alpha",
                        format!("checkpoint frequency α·log²λ/N = {p} exceeds 1"),
                    ));
                }
                unit("c", self.c)?;
                unit("d", self.d)?;
                if let Some(t) = self.threshold {
                    if !(t >= 0.0) {
                        return Err(invalid("threshold", "must be non-negative"));
                    }
                }
            }
            ProtocolId::PiN => {
                if self.servers == 0 || self.servers as u64 * self.servers as u64 != self.parties as u64 {
                    return Err(invalid(
                        "servers",
                        format!("N = n² is required (N = {}, n = {})", self.parties, self.servers),
                    ));
                }
                if self.pi_n_packet() == 0 {
                    return Err(invalid("alpha", "packet size α·logλ must be positive"));
                }
            }
            ProtocolId::PiNPlus => {
                if self.branching < 2 {
                    return Err(invalid("branching", "B ≥ 2 is required"));
                }
                if self.height < 2 {
                    return Err(invalid("height", "H ≥ 2 is required"));
                }
                match self.butterfly_nodes() {
                    Some(nodes) if nodes <= self.parties => {}
                    _ => return Err(invalid("height", "B^(H−1) processor nodes must not exceed N")),
                }
                unit("d", self.d)?;
                if self.pi_n_plus_packet() == 0 {
                    return Err(invalid("alpha", "packet size must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Warnings for runs outside the regime where the asymptotic claims apply.
    pub fn regime_notes(&self, id: ProtocolId) -> Vec<String> {
        let mut notes = Vec::new();
        match id {
            ProtocolId::PiP => {
                if (self.parties as f64 / self.servers as f64) < self.alpha * self.log2_lambda {
                    notes.push("N/n < α·log²λ".into());
                }
                if (self.path_len as f64) < self.beta * self.log2_lambda {
                    notes.push("L < β·log²λ".into());
                }
            }
            ProtocolId::PiA => {
                if (self.parties as f64) < 3.0 / (1.0 - self.kappa) {
                    notes.push("N < 3/(1−κ)".into());
                }
                if self.alpha * self.beta < alpha_beta_min(self.epsilon, self.delta, self.c, self.kappa) {
                    notes.push("αβ below the DP bound for (ε, δ)".into());
                }
            }
            ProtocolId::PiN => {
                if self.alpha < std::f64::consts::E / 2.0 {
                    notes.push("α < e/2".into());
                }
            }
            ProtocolId::PiNPlus => {}
        }
        notes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_threshold() {
        assert_eq!(abort_threshold(0.5, 0.5, 0.5, 4.0, 16.0), 4.0);
        assert_eq!(abort_threshold(0.5f32, 0.5, 0.5, 4.0, 16.0), 4.0f32);
    }

    #[test]
    fn worked_bound_and_ratios() {
        let b = alpha_beta_min(1.0, 2f64.powi(-10), 0.5, 0.2);
        assert!((b / 2105.4 - 1.0).abs() < 1e-3, "{b}");
        let r = alpha_beta_min(1.0f64, 0.01, 0.5, 0.5) / alpha_beta_min(1.0, 0.01, 0.5, 0.0);
        assert!((r - 4.0).abs() < 1e-12);
        let grow = alpha_beta_min(1.0, 0.005, 0.5, 0.0) - alpha_beta_min(1.0, 0.01, 0.5, 0.0);
        let expect = -36.0 * 1.5f64.powi(2) * 0.5f64.ln() / 0.5;
        assert!((grow - expect).abs() < 1e-9);
        assert!(alpha_beta_min(1.0, 0.999_999, 0.5, 0.0) > 0.0);
        assert!((d_prime(1.0f64) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn validation_names_fields() {
        let mut p = ProtocolParams {
            kappa: 1.2,
            ..Default::default()
        };
        let err = p.validate(ProtocolId::PiP).unwrap_err().to_string();
        assert!(err.contains("kappa"), "{err}");
        p.kappa = 0.0;
        p.path_len = 0;
        assert!(p
            .validate(ProtocolId::PiP)
            .unwrap_err()
            .to_string()
            .contains("path_len"));
        let n = ProtocolParams {
            parties: 16,
            servers: 4,
            ..Default::default()
        };
        n.validate(ProtocolId::PiN).unwrap();
        let bad = ProtocolParams {
            parties: 17,
            ..n.clone()
        };
        assert!(bad.validate(ProtocolId::PiN).is_err());
    }
}

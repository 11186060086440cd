use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::adversary::AdversaryConfig;
use crate::onion::{Backend, PartyId};
use crate::protocols::{ProtocolId, ProtocolParams};
use crate::sim::{InputVector, Message};

/// One experiment, fully determined by this value and the crate version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub protocol: ProtocolId,
    #[serde(default)]
    pub backend: Backend,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 means one per available core. Does not affect results.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    /// Wall-clock budget. Trials not started in time are skipped and the
    /// report is flagged partial.
    #[serde(default)]
    pub budget_secs: Option<f64>,
    #[serde(default)]
    pub params: ProtocolParams,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    pub input: InputSpec,
    #[serde(default)]
    pub feature: FeatureSpec,
    #[serde(default)]
    pub estimate: EstimateSpec,
    #[serde(default)]
    pub criteria: Criteria,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InputSpec {
    /// Σ* inputs. `fixed` draws one permutation for the whole batch.
    Permutation {
        #[serde(default)]
        fixed: bool,
    },
    /// Arbitrary multisets, `0..=max_per_party` messages per party.
    RandomMultiset {
        max_per_party: usize,
        #[serde(default = "default_max_len")]
        max_len: usize,
        #[serde(default)]
        fixed: bool,
    },
    Explicit {
        parties: Vec<Vec<(String, PartyId)>>,
    },
    /// Two inputs compared against each other. Even trials run the base, odd
    /// trials the changed input. With `shared_seeds`, trials `2k` and `2k+1`
    /// use the same seed.
    NeighboringPair {
        base: BaseInput,
        change: Change,
        #[serde(default)]
        shared_seeds: bool,
    },
}

fn default_max_len() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum BaseInput {
    Empty,
    Permutation,
    /// Sender `i` → recipient `pi[i]`.
    Explicit {
        pi: Vec<PartyId>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Change {
    /// Exchange the recipients of two senders.
    SwapRecipients { a: PartyId, b: PartyId },
    /// Permute all recipients (a second, independent Σ* input).
    Repermute,
    AddMessage {
        sender: PartyId,
        recipient: PartyId,
        #[serde(default = "default_extra")]
        message: String,
    },
}

fn default_extra() -> String {
    "extra".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureId {
    None,
    /// Passive posterior log-likelihood ratio for a swapped sender pair.
    DeliveryLlr,
    /// Sender outflow in round 1 and recipient inflow in the final round.
    Xy,
    /// Final-round delivering party of each target recipient.
    LinkPattern,
    /// SHA-256 of the adversary's view.
    ViewDigest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    /// Defaults by protocol: link pattern for Π_p, (X, Y) for Π_a.
    pub kind: Option<FeatureId>,
    /// Pooled-quantile bins per feature dimension.
    pub bins: usize,
    pub clamp: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            kind: None,
            bins: 16,
            clamp: 30.0,
        }
    }
}

impl FeatureSpec {
    pub fn resolve(&self, protocol: ProtocolId) -> FeatureId {
        self.kind.unwrap_or(match protocol {
            ProtocolId::PiP => FeatureId::LinkPattern,
            ProtocolId::PiA => FeatureId::Xy,
            _ => FeatureId::None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSpec {
    pub tv: bool,
    pub dp: bool,
    pub bootstrap: usize,
    pub permutations: usize,
    pub confidence: f64,
    /// Defaults to `params.delta`.
    pub delta: Option<f64>,
    pub min_cell: usize,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        Self {
            tv: false,
            dp: false,
            bootstrap: 200,
            permutations: 200,
            confidence: 0.95,
            delta: None,
            min_cell: 50,
        }
    }
}

/// Checks evaluated into verdicts. Unset checks are skipped.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Criteria {
    /// Every trial delivers exactly M(σ).
    pub correctness: bool,
    pub blowup: Option<f64>,
    pub latency: Option<f64>,
    pub load: Option<f64>,
    /// Relative tolerance for `load`.
    pub load_tolerance: f64,
    pub tv_contains_zero: bool,
    /// ε̂ must not exceed this.
    pub max_epsilon: Option<f64>,
    /// δ̂(ε) must exceed δ at this ε (a distinguishing attack).
    pub attack_epsilon: Option<f64>,
    pub max_overflows: Option<u64>,
    /// Paired trials with shared seeds produce byte-identical views.
    pub identical_views: bool,
    /// No honest party aborts in any trial.
    pub no_aborts: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub report: String,
    pub trials_csv: String,
    pub sweep_csv: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            report: "report.json".into(),
            trials_csv: "trials.csv".into(),
            sweep_csv: "sweep.csv".into(),
        }
    }
}

/// Cartesian grid over named parameters. Recognised keys: `alpha`, `beta`,
/// `kappa` (protocol and adversary), `c`, `d`, `branching`, `height`,
/// `path_len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub grid: BTreeMap<String, Vec<f64>>,
    /// Pair the lists element-wise instead of taking their product.
    #[serde(default)]
    pub zip: bool,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_cap() -> usize {
    64
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.trials == 0 {
            return bad("invalid trials: must be positive".into());
        }
        self.params
            .validate(self.protocol)
            .map_err(|e| ExperimentError::Config(format!("params: {e}")))?;
        self.adversary
            .validate(self.params.parties)
            .map_err(|e| ExperimentError::Config(format!("adversary: {e}")))?;
        let n = self.params.parties;
        let party = |field: &str, p: PartyId| {
            if p < n {
                Ok(())
            } else {
                Err(ExperimentError::Config(format!(
                    "invalid {field}: party {p} is outside [0, {n})"
                )))
            }
        };
        match &self.input {
            InputSpec::Explicit { parties } if parties.len() != n as usize => {
                return bad(format!(
                    "invalid input.parties: {} entries for {n} parties",
                    parties.len()
                ));
            }
            InputSpec::Explicit { parties } => {
                for (_, r) in parties.iter().flatten() {
                    party("input.parties", *r)?;
                }
            }
            InputSpec::NeighboringPair { base, change, .. } => {
                if let BaseInput::Explicit { pi } = base {
                    let mut sorted = pi.clone();
                    sorted.sort_unstable();
                    if sorted != (0..n).collect::<Vec<_>>() {
                        return bad("invalid input.base.pi: not a permutation of the parties".into());
                    }
                }
                match change {
                    Change::SwapRecipients { a, b } => {
                        party("input.change.a", *a)?;
                        party("input.change.b", *b)?;
                        if a == b {
                            return bad("invalid input.change: a and b must differ".into());
                        }
                        if matches!(base, BaseInput::Empty) {
                            return bad("invalid input.change: swapping needs a permutation base".into());
                        }
                    }
                    Change::AddMessage { sender, recipient, .. } => {
                        party("input.change.sender", *sender)?;
                        party("input.change.recipient", *recipient)?;
                    }
                    Change::Repermute => {}
                }
            }
            _ => {}
        }
        let e = &self.estimate;
        if !(e.confidence > 0.0 && e.confidence < 1.0) {
            return bad(format!(
                "invalid estimate.confidence: {} is outside (0, 1)",
                e.confidence
            ));
        }
        if self.feature.bins == 0 {
            return bad("invalid feature.bins: must be positive".into());
        }
        if let Some(s) = &self.sweep {
            let lens: Vec<usize> = s.grid.values().map(Vec::len).collect();
            if s.zip && lens.windows(2).any(|w| w[0] != w[1]) {
                return bad("invalid sweep.grid: zipped lists must have equal length".into());
            }
            let points: usize = if s.zip {
                lens.first().copied().unwrap_or(1)
            } else {
                lens.iter().product()
            };
            if points > s.cap {
                return bad(format!("invalid sweep.grid: {points} points exceed the cap {}", s.cap));
            }
            if let Some(k) = s.grid.keys().find(|k| !super::sweep::SWEEP_KEYS.contains(&k.as_str())) {
                return bad(format!("invalid sweep.grid: unknown parameter {k}"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(bytes))
    }

    pub fn is_pair(&self) -> bool {
        matches!(self.input, InputSpec::NeighboringPair { .. })
    }
}

pub(crate) fn message_of(s: &str) -> Message {
    s.as_bytes().to_vec()
}

pub(crate) fn base_vector(base: &BaseInput, n: u32, rng: &mut crate::rng::SimRng) -> InputVector {
    match base {
        BaseInput::Empty => InputVector::empty(n),
        BaseInput::Permutation => InputVector::permutation(n, rng),
        BaseInput::Explicit { pi } => InputVector::from_permutation(pi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
protocol = "pi_p"
trials = 4
[params]
parties = 16
servers = 4
path_len = 3
[input]
kind = "permutation"
"#;

    #[test]
    fn parses_and_hashes_stably() {
        let a = RunConfig::from_toml(MINIMAL).unwrap();
        let b = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(a.sha256(), b.sha256());
        assert_eq!(a.feature.resolve(a.protocol), FeatureId::LinkPattern);
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.sha256(), c.sha256());
        // worker count is not part of the experiment
        c.seed = 0;
        c.workers = 7;
        assert_eq!(a.sha256(), c.sha256());
    }

    #[test]
    fn validation_names_the_field() {
        let text = MINIMAL.replace("path_len = 3", "path_len = 3\nkappa = 1.2");
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(err.is_config() && err.to_string().contains("kappa"), "{err}");
        let unknown = MINIMAL.replace("trials = 4", "trials = 4\ntrails = 5");
        assert!(RunConfig::from_toml(&unknown)
            .unwrap_err()
            .to_string()
            .contains("trails"));
    }
}

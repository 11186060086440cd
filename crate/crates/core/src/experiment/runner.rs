use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{base_vector, message_of, Change, FeatureId, InputSpec, RunConfig};
use super::features::{extract_features, Targets};
use super::ExperimentError;
use crate::adversary::Adversary;
use crate::analysis::estimate::{dp_ratio_estimate, tv_distance_estimate, DpConfig, QuantileBinner, TvConfig};
use crate::analysis::metrics::{aggregate, Metrics};
use crate::onion::{Backend, OnionScheme};
use crate::protocols::AnyProtocol;
use crate::rng::{derive_u64, sim_rng};
use crate::sim::{correctness_check, run, InputVector, NetworkConfig, Protocol};
use crate::{IdealScheme, RealScheme, TvEstimate};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    /// 0 = base input, 1 = changed input; always 0 outside pair experiments.
    pub side: u8,
    pub onions_sent: u64,
    pub blowup: Option<f64>,
    pub load: f64,
    pub latency: f64,
    pub rounds: u32,
    pub honest_aborts: u32,
    pub drops: u64,
    pub overflows: u64,
    pub anomalies: u64,
    pub correct: bool,
    pub features: Vec<f64>,
    pub digest: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

/// DP estimate without the per-cell masses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DpSummary {
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub cells: usize,
    pub trials: usize,
    /// δ̂ at the configured attack ε, when one is set.
    pub delta_at_attack: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub version: String,
    pub config_sha256: String,
    pub protocol: String,
    pub backend: Backend,
    pub seed: u64,
    pub trials: u64,
    pub completed_trials: u64,
    /// Set when the wall-clock budget ran out.
    pub partial: bool,
    pub feature: FeatureId,
    pub regime_notes: Vec<String>,
    pub metrics: Metrics,
    pub trials_with_abort: u64,
    pub drops: u64,
    pub overflows: u64,
    pub anomalies: u64,
    pub incorrect_trials: u64,
    pub tv: Option<TvEstimate>,
    pub dp: Option<DpSummary>,
    pub checks: Vec<Verdict>,
    pub pass: bool,
}

struct Plan {
    inputs: [InputVector; 2],
    targets: Targets,
    pair: bool,
    shared: bool,
    fresh: Option<FreshInput>,
}

enum FreshInput {
    Permutation,
    Multiset { max_per_party: usize, max_len: usize },
}

fn plan(cfg: &RunConfig) -> Plan {
    let n = cfg.params.parties;
    let mut rng = sim_rng(cfg.seed, "experiment/input", 0, 0);
    let single = |v: InputVector, fresh| Plan {
        inputs: [v.clone(), v],
        targets: Targets::default(),
        pair: false,
        shared: false,
        fresh,
    };
    match &cfg.input {
        InputSpec::Permutation { fixed } => single(
            InputVector::permutation(n, &mut rng),
            (!fixed).then_some(FreshInput::Permutation),
        ),
        InputSpec::RandomMultiset {
            max_per_party,
            max_len,
            fixed,
        } => single(
            InputVector::random_multiset(n, *max_per_party, *max_len, &mut rng),
            (!fixed).then_some(FreshInput::Multiset {
                max_per_party: *max_per_party,
                max_len: *max_len,
            }),
        ),
        InputSpec::Explicit { parties } => single(
            InputVector {
                parties: parties
                    .iter()
                    .map(|ms| ms.iter().map(|(m, r)| (message_of(m), *r)).collect())
                    .collect(),
            },
            None,
        ),
        InputSpec::NeighboringPair {
            base,
            change,
            shared_seeds,
        } => {
            let b = base_vector(base, n, &mut rng);
            let other = match change {
                Change::SwapRecipients { a, b: c } => b.swap_recipients(*a, *c),
                Change::Repermute => InputVector::permutation(n, &mut rng),
                Change::AddMessage {
                    sender,
                    recipient,
                    message,
                } => b.with_extra_message(*sender, message_of(message), *recipient),
            };
            Plan {
                targets: Targets::of(change, &b),
                inputs: [b, other],
                pair: true,
                shared: *shared_seeds,
                fresh: None,
            }
        }
    }
}

struct Trial<'a> {
    cfg: &'a RunConfig,
    plan: &'a Plan,
    feature: FeatureId,
    selection_seed: u64,
}

impl Trial<'_> {
    fn seed_of(&self, t: u64) -> u64 {
        let k = if self.plan.pair && self.plan.shared { t / 2 } else { t };
        derive_u64(self.cfg.seed, "experiment/trial", k, 0)
    }

    fn run<S: OnionScheme>(&self, scheme: &mut S, t: u64) -> Result<TrialRecord, ExperimentError> {
        let cfg = self.cfg;
        let n = cfg.params.parties;
        let seed = self.seed_of(t);
        let side = if self.plan.pair { (t % 2) as u8 } else { 0 };
        let fresh;
        let input = match &self.plan.fresh {
            None => &self.plan.inputs[side as usize],
            Some(f) => {
                let mut rng = sim_rng(cfg.seed, "experiment/input", t + 1, 0);
                fresh = match f {
                    FreshInput::Permutation => InputVector::permutation(n, &mut rng),
                    FreshInput::Multiset { max_per_party, max_len } => {
                        InputVector::random_multiset(n, *max_per_party, *max_len, &mut rng)
                    }
                };
                &fresh
            }
        };
        let mut protocol = AnyProtocol::new(cfg.protocol, &cfg.params).map_err(crate::sim::SimError::from)?;
        let servers = Protocol::<S>::servers(&protocol);
        let final_round = Protocol::<S>::rounds(&protocol);
        let mut adv_cfg = cfg.adversary.clone();
        adv_cfg.exclude.extend(self.plan.targets.all());
        adv_cfg.exclude.extend(adv_cfg.strategy.targets());
        let adversary =
            Adversary::new(&adv_cfg, n, &servers, self.selection_seed, seed).map_err(crate::sim::SimError::from)?;
        let mut net = NetworkConfig::new(n, seed);
        net.backend = cfg.backend;
        net.message_len = cfg.params.message_len;
        net.servers = servers;
        scheme.reset();
        let report = run(scheme, &mut protocol, input, adversary, &net)?;
        let corrupted = crate::analysis::survivor::corrupted_mask(&report);
        let honest_aborts = report
            .aborted
            .iter()
            .zip(&corrupted)
            .filter(|(a, &c)| a.is_some() && !c)
            .count() as u32;
        let (features, digest) = extract_features(
            self.feature,
            &report,
            &self.plan.targets,
            final_round,
            cfg.feature.clamp,
        );
        Ok(TrialRecord {
            trial: t,
            seed,
            side,
            onions_sent: report.stats.onions_sent,
            blowup: report.metrics.blowup,
            load: report.metrics.server_load,
            latency: report.metrics.latency,
            rounds: report.stats.rounds_run,
            honest_aborts,
            drops: report.stats.drops,
            overflows: report.stats.overflows,
            anomalies: report.stats.anomalies,
            correct: correctness_check(&report, input).correct,
            features,
            digest,
        })
    }
}

fn run_trials<S: OnionScheme + Send>(
    trial: &Trial<'_>,
    make: impl Fn() -> S + Sync + Send,
    started: Instant,
) -> Result<Vec<Option<TrialRecord>>, ExperimentError> {
    let budget = trial.cfg.budget_secs;
    (0..trial.cfg.trials)
        .into_par_iter()
        .map_init(&make, |scheme, t| {
            if budget.is_some_and(|b| started.elapsed().as_secs_f64() > b) {
                return Ok(None);
            }
            trial.run(scheme, t).map(Some)
        })
        .collect()
}

/// Runs every trial of `cfg` and evaluates its criteria. Results do not depend
/// on the worker count: trials are seeded by index and merged in index order.
pub fn run_experiment(cfg: &RunConfig) -> Result<(ExperimentReport, Vec<TrialRecord>), ExperimentError> {
    cfg.validate()?;
    let started = Instant::now();
    let plan = plan(cfg);
    let feature = cfg.feature.resolve(cfg.protocol);
    let trial = Trial {
        cfg,
        plan: &plan,
        feature,
        selection_seed: derive_u64(cfg.seed, "experiment/adversary", 0, 0),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| ExperimentError::Config(format!("invalid workers: {e}")))?;
    let rounds = {
        let p = AnyProtocol::new(cfg.protocol, &cfg.params).map_err(crate::sim::SimError::from)?;
        Protocol::<IdealScheme>::rounds(&p) as usize
    };
    let records = pool.install(|| match cfg.backend {
        Backend::Ideal => run_trials(&trial, || IdealScheme::new(cfg.params.message_len), started),
        Backend::Real => run_trials(&trial, || RealScheme::new(rounds + 1, cfg.params.message_len), started),
    })?;
    let partial = records.iter().any(Option::is_none);
    let records: Vec<TrialRecord> = records.into_iter().flatten().collect();
    if partial {
        log::warn!("budget exhausted: {} of {} trials completed", records.len(), cfg.trials);
    }
    let report = evaluate(cfg, &plan, feature, &records, partial)?;
    Ok((report, records))
}

fn split_sides<'a>(records: &'a [TrialRecord]) -> (Vec<&'a TrialRecord>, Vec<&'a TrialRecord>) {
    records.iter().partition(|r| r.side == 0)
}

fn keys(feature: FeatureId, records: &[TrialRecord], bins: usize) -> (Vec<Vec<u16>>, Vec<String>) {
    if feature == FeatureId::ViewDigest {
        return (
            Vec::new(),
            records.iter().map(|r| r.digest.clone().unwrap_or_default()).collect(),
        );
    }
    let rows: Vec<&[f64]> = records.iter().map(|r| r.features.as_slice()).collect();
    let binner = QuantileBinner::fit(&rows, bins);
    (rows.iter().map(|x| binner.cell(x)).collect(), Vec::new())
}

fn evaluate(
    cfg: &RunConfig,
    plan: &Plan,
    feature: FeatureId,
    records: &[TrialRecord],
    partial: bool,
) -> Result<ExperimentReport, ExperimentError> {
    let metric_rows: Vec<Metrics> = records
        .iter()
        .map(|r| Metrics {
            blowup: r.blowup,
            server_load: r.load,
            latency: r.latency,
            onions_sent: r.onions_sent,
            messages: 0,
        })
        .collect();
    let mut metrics = aggregate(&metric_rows);
    metrics.messages = plan.inputs[0].message_count() as u64;
    let count = |f: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;

    let est = &cfg.estimate;
    let mut tv = None;
    let mut dp = None;
    if plan.pair && (est.tv || est.dp) {
        let (nums, digests) = keys(feature, records, cfg.feature.bins);
        let sides = |k: &dyn Fn(usize) -> bool| -> Vec<usize> { (0..records.len()).filter(|&i| k(i)).collect() };
        let s0 = sides(&|i| records[i].side == 0);
        let s1 = sides(&|i| records[i].side == 1);
        macro_rules! estimate_with {
            ($keys:expr) => {{
                let a: Vec<_> = s0.iter().map(|&i| $keys[i].clone()).collect();
                let b: Vec<_> = s1.iter().map(|&i| $keys[i].clone()).collect();
                if est.tv {
                    let tcfg = TvConfig {
                        bootstrap: est.bootstrap,
                        permutations: est.permutations,
                        confidence: est.confidence,
                        seed: derive_u64(cfg.seed, "experiment/tv", 0, 0),
                        ..TvConfig::default()
                    };
                    tv = Some(tv_distance_estimate(&a, &b, &tcfg)?);
                }
                if est.dp {
                    let dcfg = DpConfig {
                        delta: est.delta.unwrap_or(cfg.params.delta),
                        min_cell: est.min_cell,
                        ..DpConfig::default()
                    };
                    let e: crate::DpEstimate = dp_ratio_estimate(&a, &b, &dcfg)?;
                    dp = Some(DpSummary {
                        epsilon: e.epsilon,
                        delta: e.delta,
                        cells: e.cells,
                        trials: e.trials,
                        delta_at_attack: cfg.criteria.attack_epsilon.map(|x| e.delta_at(x)),
                    });
                }
            }};
        }
        if feature == FeatureId::ViewDigest {
            estimate_with!(digests);
        } else {
            estimate_with!(nums);
        }
    }

    let checks = verdicts(cfg, plan, records, &metrics, tv.as_ref(), dp.as_ref());
    let pass = !partial && checks.iter().all(|v| v.pass);
    let proto = AnyProtocol::new(cfg.protocol, &cfg.params).map_err(crate::sim::SimError::from)?;
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        version: crate::VERSION.into(),
        config_sha256: cfg.sha256(),
        protocol: proto.id().to_string(),
        backend: cfg.backend,
        seed: cfg.seed,
        trials: cfg.trials,
        completed_trials: records.len() as u64,
        partial,
        feature,
        regime_notes: cfg.params.regime_notes(cfg.protocol),
        metrics,
        trials_with_abort: count(&|r| r.honest_aborts > 0),
        drops: records.iter().map(|r| r.drops).sum(),
        overflows: records.iter().map(|r| r.overflows).sum(),
        anomalies: records.iter().map(|r| r.anomalies).sum(),
        incorrect_trials: count(&|r| !r.correct),
        tv,
        dp,
        checks,
        pass,
    })
}

fn verdicts(
    cfg: &RunConfig,
    plan: &Plan,
    records: &[TrialRecord],
    metrics: &Metrics,
    tv: Option<&TvEstimate>,
    dp: Option<&DpSummary>,
) -> Vec<Verdict> {
    let c = &cfg.criteria;
    let mut out = Vec::new();
    if c.correctness {
        let bad = records.iter().filter(|r| !r.correct).count();
        out.push(Verdict::new(
            "correctness",
            bad == 0,
            format!("{bad} of {} trials delivered a different multiset", records.len()),
        ));
    }
    let exact = |name: &str, want: f64, got: &dyn Fn(&TrialRecord) -> Option<f64>| {
        let off = records
            .iter()
            .filter(|r| got(r).map_or(true, |v| (v - want).abs() > 1e-9))
            .count();
        Verdict::new(name, off == 0, format!("{off} trials differ from {want}"))
    };
    if let Some(g) = c.blowup {
        out.push(exact("blowup", g, &|r| r.blowup));
    }
    if let Some(l) = c.latency {
        out.push(exact("latency", l, &|r| Some(r.latency)));
    }
    if let Some(load) = c.load {
        let rel = (metrics.server_load - load).abs() / load;
        out.push(Verdict::new(
            "load",
            rel <= c.load_tolerance,
            format!(
                "mean load {:.4} vs {load} (relative error {rel:.4}, tolerance {})",
                metrics.server_load, c.load_tolerance
            ),
        ));
    }
    if let Some(max) = c.max_overflows {
        let total: u64 = records.iter().map(|r| r.overflows).sum();
        out.push(Verdict::new(
            "overflows",
            total <= max,
            format!("{total} overflows (max {max})"),
        ));
    }
    if c.no_aborts {
        let n = records.iter().filter(|r| r.honest_aborts > 0).count();
        out.push(Verdict::new(
            "no_aborts",
            n == 0,
            format!("{n} trials with an honest abort"),
        ));
    }
    if c.tv_contains_zero {
        out.push(match tv {
            Some(t) => Verdict::new(
                "tv_contains_zero",
                t.contains_zero,
                format!(
                    "TV {:.5}, interval [{:.5}, {:.5}], null quantile {:.5}",
                    t.estimate, t.ci_low, t.ci_high, t.null_quantile
                ),
            ),
            None => Verdict::new(
                "tv_contains_zero",
                false,
                "no TV estimate (pair input and estimate.tv required)".into(),
            ),
        });
    }
    if let Some(max) = c.max_epsilon {
        out.push(match dp {
            Some(d) => Verdict::new(
                "max_epsilon",
                d.epsilon.is_some_and(|e| e <= max),
                format!("epsilon {:?} at delta {:.3e} (max {max})", d.epsilon, d.delta),
            ),
            None => Verdict::new("max_epsilon", false, "no DP estimate".into()),
        });
    }
    if let Some(eps) = c.attack_epsilon {
        out.push(match dp {
            Some(d) => {
                let at = d.delta_at_attack.unwrap_or(0.0);
                Verdict::new(
                    "attack",
                    at > d.delta,
                    format!("delta at epsilon {eps} is {at:.4} vs {:.3e}", d.delta),
                )
            }
            None => Verdict::new("attack", false, "no DP estimate".into()),
        });
    }
    if c.identical_views {
        let ok = plan.pair
            && plan.shared
            && records.chunks(2).all(|w| match w {
                [a, b] => a.digest.is_some() && a.digest == b.digest,
                _ => true,
            });
        let (s0, s1) = split_sides(records);
        out.push(Verdict::new(
            "identical_views",
            ok,
            format!("{} paired trials compared", s0.len().min(s1.len())),
        ));
    }
    out
}

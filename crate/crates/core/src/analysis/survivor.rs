//! Survival of honest-pair checkpoint dummies under an active adversary.

use serde::Serialize;

use crate::adversary::AdversaryClass;
use crate::sim::{OnionKind, RunReport};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSurvival {
    pub run: usize,
    pub honest_pair_dummies: usize,
    pub first_honest_abort: Option<u32>,
    /// `survival[r − 1]`: fraction of honest-pair dummies that traversed at
    /// least `r − 1` links.
    pub survival: Vec<f64>,
    /// Rounds `r` where no honest party had aborted yet survival fell below
    /// `1 − c − slack`.
    pub violations: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivorReport {
    pub c: f64,
    pub slack: f64,
    pub max_round: u32,
    pub runs: Vec<RunSurvival>,
    pub violations: usize,
    pub runs_with_abort: usize,
    pub min_survival: f64,
}

pub fn corrupted_mask(report: &RunReport) -> Vec<bool> {
    let mut mask = vec![false; report.parties as usize];
    if report.view.class == AdversaryClass::Active {
        for &p in &report.adversary_parties {
            mask[p as usize] = true;
        }
    }
    mask
}

pub fn run_survival(report: &RunReport, run: usize, c: f64, slack: f64, max_round: u32) -> RunSurvival {
    let corrupted = corrupted_mask(report);
    let rounds_run = report.stats.rounds_run;
    let mut hist = vec![0usize; max_round as usize + 1];
    let mut total = 0usize;
    for rec in &report.lineage {
        if !matches!(rec.kind, OnionKind::Checkpoint { .. }) || rec.marked(&corrupted) {
            continue;
        }
        total += 1;
        hist[rec.rounds_survived(rounds_run).min(max_round) as usize] += 1;
    }
    // at_least[k] = #{survived ≥ k}.
    let mut at_least = vec![0usize; max_round as usize + 2];
    for k in (0..=max_round as usize).rev() {
        at_least[k] = at_least[k + 1] + hist[k];
    }
    let first_honest_abort = report
        .aborted
        .iter()
        .enumerate()
        .filter(|(i, _)| !corrupted[*i])
        .filter_map(|(_, a)| *a)
        .min();
    let mut survival = Vec::with_capacity(max_round as usize);
    let mut violations = Vec::new();
    for r in 1..=max_round {
        let s = if total == 0 {
            1.0
        } else {
            at_least[r as usize - 1] as f64 / total as f64
        };
        survival.push(s);
        let aborted = first_honest_abort.is_some_and(|a| a <= r);
        if !aborted && s < 1.0 - c - slack {
            violations.push(r);
        }
    }
    RunSurvival {
        run,
        honest_pair_dummies: total,
        first_honest_abort,
        survival,
        violations,
    }
}

pub fn survivor_accounting<'a>(
    reports: impl IntoIterator<Item = &'a RunReport>,
    c: f64,
    slack: f64,
    max_round: u32,
) -> SurvivorReport {
    let runs: Vec<RunSurvival> = reports
        .into_iter()
        .enumerate()
        .map(|(i, r)| run_survival(r, i, c, slack, max_round))
        .collect();
    SurvivorReport {
        c,
        slack,
        max_round,
        violations: runs.iter().filter(|r| !r.violations.is_empty()).count(),
        runs_with_abort: runs.iter().filter(|r| r.first_honest_abort.is_some()).count(),
        min_survival: runs.iter().flat_map(|r| r.survival.iter().copied()).fold(1.0, f64::min),
        runs,
    }
}

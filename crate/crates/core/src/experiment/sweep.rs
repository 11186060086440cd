use serde::Serialize;

use super::config::RunConfig;
use super::runner::run_experiment;
use super::ExperimentError;
use crate::protocols::{abort_threshold, alpha_beta_min};

pub(crate) const SWEEP_KEYS: &[&str] = &["alpha", "beta", "kappa", "c", "d", "branching", "height", "path_len"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub point: Vec<f64>,
    /// Abort threshold t at this point.
    pub threshold: f64,
    pub alpha_beta_min: f64,
    pub rounds: u32,
    pub blowup: Option<f64>,
    pub load: f64,
    pub latency: f64,
    pub overflows: u64,
    pub trials_with_abort: u64,
    pub tv: Option<f64>,
    pub epsilon: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub config_sha256: String,
    pub version: String,
    pub keys: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn apply(cfg: &mut RunConfig, key: &str, v: f64) {
    let p = &mut cfg.params;
    match key {
        "alpha" => p.alpha = v,
        "beta" => p.beta = v,
        "kappa" => {
            p.kappa = v;
            cfg.adversary.kappa = v;
        }
        "c" => p.c = v,
        "d" => p.d = v,
        "branching" => p.branching = v as u32,
        "height" => p.height = v as u32,
        "path_len" => p.path_len = v as u32,
        _ => unreachable!("validated sweep key"),
    }
}

/// One experiment per grid point (row-major over the sorted keys, or
/// element-wise when zipped). A config without a grid is a one-point sweep.
pub fn sweep(cfg: &RunConfig) -> Result<SweepTable, ExperimentError> {
    cfg.validate()?;
    let grid: Vec<(String, Vec<f64>)> = cfg
        .sweep
        .as_ref()
        .map(|s| s.grid.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
        .unwrap_or_default();
    let zip = cfg.sweep.as_ref().is_some_and(|s| s.zip);
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    if zip {
        let len = grid.first().map_or(0, |(_, v)| v.len());
        points = (0..len).map(|i| grid.iter().map(|(_, v)| v[i]).collect()).collect();
    }
    for (_, values) in grid.iter().filter(|_| !zip) {
        points = points
            .iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    let mut rows = Vec::with_capacity(points.len());
    for point in points {
        let mut c = cfg.clone();
        c.sweep = None;
        for ((k, _), &v) in grid.iter().zip(&point) {
            apply(&mut c, k, v);
        }
        let (report, records) = run_experiment(&c)?;
        let p = &c.params;
        rows.push(SweepRow {
            threshold: p.abort_threshold(),
            alpha_beta_min: alpha_beta_min(p.epsilon, p.delta, p.c, p.kappa),
            rounds: records.iter().map(|r| r.rounds).max().unwrap_or(0),
            blowup: report.metrics.blowup,
            load: report.metrics.server_load,
            latency: report.metrics.latency,
            overflows: report.overflows,
            trials_with_abort: report.trials_with_abort,
            tv: report.tv.as_ref().map(|t| t.estimate),
            epsilon: report.dp.as_ref().and_then(|d| d.epsilon),
            pass: report.pass,
            point,
        });
    }
    Ok(SweepTable {
        config_sha256: cfg.sha256(),
        version: crate::VERSION.into(),
        keys: grid.into_iter().map(|(k, _)| k).collect(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamCalc {
    pub threshold: f64,
    pub alpha_beta_min: f64,
    pub alpha: f64,
    pub beta: f64,
    pub d_prime: f64,
}

/// Abort threshold and αβ bound, with the balanced split
/// `α = β = ⌈√αβ_min⌉`; `t` is evaluated at that α.
pub fn param_calc(epsilon: f64, delta: f64, c: f64, d: f64, kappa: f64, log2_lambda: f64) -> ParamCalc {
    let ab = alpha_beta_min(epsilon, delta, c, kappa);
    let side = ab.sqrt().ceil();
    ParamCalc {
        threshold: abort_threshold(c, d, kappa, side, log2_lambda),
        alpha_beta_min: ab,
        alpha: side,
        beta: side,
        d_prime: crate::protocols::d_prime(epsilon),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_split_covers_the_bound() {
        let pc = param_calc(1.0, 2f64.powi(-10), 0.5, 0.5, 0.2, 16.0);
        assert!((pc.alpha_beta_min / 2105.4 - 1.0).abs() < 1e-3);
        assert_eq!(pc.alpha, 46.0);
        assert!(pc.alpha * pc.beta >= pc.alpha_beta_min);
        let quad = param_calc(1.0, 0.01, 0.5, 0.5, 0.5, 16.0).alpha_beta_min
            / param_calc(1.0, 0.01, 0.5, 0.5, 0.0, 16.0).alpha_beta_min;
        assert!((quad - 4.0).abs() < 1e-12);
    }
}

use serde::{Deserialize, Serialize};

use crate::sim::{RunReport, RunStats};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// γ = Γ / |M(σ)|; absent when there are no messages.
    pub blowup: Option<f64>,
    /// Largest per-round mean receipts per server.
    pub server_load: f64,
    /// Round of the last delivery or abort.
    pub latency: f64,
    /// Γ.
    pub onions_sent: u64,
    /// |M(σ)|.
    pub messages: u64,
}

pub fn run_metrics(stats: &RunStats) -> Metrics {
    let (a, b) = stats.server_rounds;
    let b = b.min(stats.rounds_run);
    let server_load = if stats.server_count == 0 || a == 0 || a > b {
        0.0
    } else {
        (a..=b)
            .map(|r| stats.server_receipts[r as usize - 1] as f64 / stats.server_count as f64)
            .fold(0.0, f64::max)
    };
    let latency = stats.last_delivery_round.max(stats.last_abort_round).unwrap_or(0) as f64;
    Metrics {
        blowup: (stats.messages > 0).then(|| stats.onions_sent as f64 / stats.messages as f64),
        server_load,
        latency,
        onions_sent: stats.onions_sent,
        messages: stats.messages,
    }
}

/// Averages over a trial set: γ, load and latency are means of the per-run
/// values; Γ and |M| are totals.
pub fn compute_metrics<'a>(reports: impl IntoIterator<Item = &'a RunReport>) -> Metrics {
    aggregate(reports.into_iter().map(|r| &r.metrics))
}

pub fn aggregate<'a>(metrics: impl IntoIterator<Item = &'a Metrics>) -> Metrics {
    let mut out = Metrics::default();
    let (mut runs, mut blow_runs, mut blow) = (0usize, 0usize, 0.0);
    for m in metrics {
        runs += 1;
        if let Some(g) = m.blowup {
            blow += g;
            blow_runs += 1;
        }
        out.server_load += m.server_load;
        out.latency += m.latency;
        out.onions_sent += m.onions_sent;
        out.messages += m.messages;
    }
    if runs > 0 {
        out.server_load /= runs as f64;
        out.latency /= runs as f64;
    }
    out.blowup = (blow_runs > 0).then(|| blow / blow_runs as f64);
    out
}

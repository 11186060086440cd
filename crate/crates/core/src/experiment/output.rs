use std::io::Write;

use super::runner::{ExperimentReport, TrialRecord};
use super::sweep::SweepTable;
use super::ExperimentError;

pub fn write_report<W: Write>(report: &ExperimentReport, mut w: W) -> Result<(), ExperimentError> {
    serde_json::to_writer_pretty(&mut w, report).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per trial; feature columns are `f0, f1, …`.
pub fn write_trials_csv<W: Write>(records: &[TrialRecord], w: W) -> Result<(), ExperimentError> {
    let dims = records.iter().map(|r| r.features.len()).max().unwrap_or(0);
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = [
        "trial",
        "seed",
        "side",
        "onions_sent",
        "blowup",
        "load",
        "latency",
        "rounds",
        "honest_aborts",
        "drops",
        "overflows",
        "anomalies",
        "correct",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..dims).map(|i| format!("f{i}")));
    header.push("digest".into());
    out.write_record(&header).map_err(csv_io)?;
    for r in records {
        let mut row = vec![
            r.trial.to_string(),
            r.seed.to_string(),
            r.side.to_string(),
            r.onions_sent.to_string(),
            opt(r.blowup),
            r.load.to_string(),
            r.latency.to_string(),
            r.rounds.to_string(),
            r.honest_aborts.to_string(),
            r.drops.to_string(),
            r.overflows.to_string(),
            r.anomalies.to_string(),
            r.correct.to_string(),
        ];
        row.extend((0..dims).map(|i| opt(r.features.get(i).copied())));
        row.push(r.digest.clone().unwrap_or_default());
        out.write_record(&row).map_err(csv_io)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(table: &SweepTable, w: W) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = table.keys.clone();
    header.extend(
        [
            "threshold",
            "alpha_beta_min",
            "rounds",
            "blowup",
            "load",
            "latency",
            "overflows",
            "trials_with_abort",
            "tv",
            "epsilon",
            "pass",
        ]
        .map(String::from),
    );
    out.write_record(&header).map_err(csv_io)?;
    for row in &table.rows {
        let mut rec: Vec<String> = row.point.iter().map(|v| v.to_string()).collect();
        rec.extend([
            row.threshold.to_string(),
            row.alpha_beta_min.to_string(),
            row.rounds.to_string(),
            opt(row.blowup),
            row.load.to_string(),
            row.latency.to_string(),
            row.overflows.to_string(),
            row.trials_with_abort.to_string(),
            opt(row.tv),
            opt(row.epsilon),
            row.pass.to_string(),
        ]);
        out.write_record(&rec).map_err(csv_io)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> ExperimentError {
    ExperimentError::Io(std::io::Error::other(e))
}

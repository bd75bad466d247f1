use std::path::PathBuf;

use clap::Args;
use csa_core::planner::{replay_metrics, verify_log, PlanMetrics, PlannerError, RunLog};
use csa_core::world::scene_hash;

use crate::{read_file, table, to_json, write_file, CliError, CliResult, Format, Global, Output};

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Run log (JSON lines).
    pub log: PathBuf,
    /// Compare recomputed metrics with the stored ones.
    #[arg(long)]
    pub verify: bool,
    /// Also write the telemetry a live session would have streamed.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

pub fn run(g: &Global, a: &ReplayArgs) -> CliResult<Output> {
    let bytes = read_file(&a.log)?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Data(format!("{}: {e}", a.log.display())))?;
    let log = RunLog::from_jsonl(&text).map_err(|e| CliError::Data(format!("{}: {e}", a.log.display())))?;
    let mut out = Output::default();

    if a.verify {
        verify_log(&log).map_err(|e| CliError::Data(mismatch_report(&log, &e)))?;
    }
    if let Some(path) = &a.transcript {
        let (msgs, _) = csa_service::replay(&log).map_err(|e| CliError::Data(e.to_string()))?;
        let mut lines = String::new();
        for m in msgs {
            lines.push_str(&m.to_json());
            lines.push('\n');
        }
        write_file(path, lines.as_bytes())?;
    }

    if a.verify {
        out.stdout = "OK\n".into();
        return Ok(out);
    }
    let metrics = replay_metrics(&log);
    if scene_hash(&log.header.scene) != log.header.scene_hash {
        out.notes.push("scene hash does not match the header".into());
    }
    out.stdout = match g.format {
        Format::Json => to_json(&metrics)?,
        Format::Table => metrics_table(&metrics),
    };
    Ok(out)
}

fn mismatch_report(log: &RunLog, err: &PlannerError) -> String {
    let Some(stored) = &log.metrics else { return format!("MISMATCH: {err}") };
    let fresh = replay_metrics(log);
    if *stored == fresh {
        return format!("MISMATCH: {err}");
    }
    let mut s = "MISMATCH: stored metrics differ from recomputation".to_string();
    for ((name, a), (_, b)) in stored.fields().into_iter().zip(fresh.fields()) {
        if a.to_bits() != b.to_bits() {
            s.push_str(&format!("\n  {name}: stored {a} recomputed {b}"));
        }
    }
    if stored.evidence_total != fresh.evidence_total || stored.frames != fresh.frames || stored.truncated != fresh.truncated {
        s.push_str("\n  evidence_total, frames or truncated differ");
    }
    s
}

pub(crate) fn metrics_table(m: &PlanMetrics) -> String {
    let mut rows = vec![vec!["metric".to_string(), "value".to_string()]];
    for (name, v) in m.fields() {
        rows.push(vec![name.to_string(), format!("{v:.4}")]);
    }
    rows.push(vec!["evidence_total".into(), m.evidence_total.to_string()]);
    rows.push(vec!["frames".into(), m.frames.to_string()]);
    rows.push(vec!["truncated".into(), m.truncated.to_string()]);
    table(&rows)
}

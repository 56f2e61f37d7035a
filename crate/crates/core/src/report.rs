//! CSV renderings of run results and writing them to an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::engine::{RunResult, EVENT_LOG_HEADER, SELECTION_TRACE_HEADER};
use crate::error::Result;
use crate::kpi::{panel_stay_csv_row, SummaryRow, PANEL_STAY_HEADER, SUMMARY_HEADER};

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

pub fn panel_stay_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{PANEL_STAY_HEADER}\n");
    for r in rows {
        s.push_str(&panel_stay_csv_row(r));
        s.push('\n');
    }
    s
}

/// Event log with 1-based cell and beam indices.
pub fn events_csv(res: &RunResult) -> String {
    let mut s = format!("{EVENT_LOG_HEADER}\n");
    for e in &res.events {
        let ev = &e.event;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            ev.t_ms,
            e.ue,
            ev.kind.as_str(),
            ev.src_cell + 1,
            ev.dst_cell + 1,
            ev.beam + 1
        );
    }
    s
}

/// Serving panel / Rx beam changes with 1-based indices.
pub fn selection_csv(res: &RunResult) -> String {
    let mut s = format!("{SELECTION_TRACE_HEADER}\n");
    for (ue, c) in &res.selections {
        let _ = writeln!(s, "{},{},{},{},{}", c.t_ms, ue, c.to.0 + 1, c.to.1 + 1, c.cause.as_str());
    }
    s
}

/// Writes every artifact of one run into `dir`; returns the written file
/// names.
pub fn write_run(res: &RunResult, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let cfg_out = &res.config.output;
    let rows = std::slice::from_ref(&res.summary);
    let mut files: Vec<(String, String)> = vec![
        ("summary.csv".into(), summary_csv(rows)),
        ("panel_stay.csv".into(), panel_stay_csv(rows)),
        ("manifest.toml".into(), res.manifest.clone()),
    ];
    if cfg_out.events {
        files.push(("events.csv".into(), events_csv(res)));
    }
    if cfg_out.selection_trace {
        files.push(("selection_trace.csv".into(), selection_csv(res)));
    }
    if cfg_out.channel_trace {
        for (ue, t) in &res.channel_traces {
            files.push((format!("channel_trace_ue{ue}.csv"), t.clone()));
        }
    }
    if cfg_out.measurement_log {
        for (ue, t) in &res.measurement_logs {
            files.push((format!("measurement_log_ue{ue}.csv"), t.clone()));
        }
    }
    for (name, text) in &files {
        fs::write(dir.join(name), text)?;
    }
    Ok(files.into_iter().map(|(n, _)| n).collect())
}

use std::fmt::Write as _;

use crate::learner::TrainLog;
use crate::sim::{SignalPhase, Trace};

pub const TIMESPACE_HEADER: &str = "# ecolane-timespace v1";
pub const USAGE_HEADER: &str = "# ecolane-usage v1";

/// Signal phase intervals `(phase, start, end)` merged from per-step rows.
pub fn signal_intervals(trace: &Trace) -> Vec<(SignalPhase, f64, f64)> {
    let mut out: Vec<(SignalPhase, f64, f64)> = Vec::new();
    for (i, s) in trace.signal.iter().enumerate() {
        let end = match trace.signal.get(i + 1) {
            Some(n) => n.clock,
            None if i > 0 => s.clock + (s.clock - trace.signal[i - 1].clock),
            None => s.clock,
        };
        match out.last_mut() {
            Some(last) if last.0 == s.phase => last.2 = end,
            _ => out.push((s.phase, s.clock, end)),
        }
    }
    out
}

/// Plot data for a time-space diagram: signal intervals, then one
/// `(t, position)` series per vehicle tagged with its class.
///
/// Columns: `record id class t position phase start end`; unused columns
/// hold `-`.
pub fn export_timespace(trace: &Trace) -> String {
    let mut s = format!("{TIMESPACE_HEADER}\nrecord\tid\tclass\tt\tposition\tphase\tstart\tend\n");
    if trace.is_empty() {
        return s;
    }
    for (phase, start, end) in signal_intervals(trace) {
        let _ = writeln!(s, "interval\t-\t-\t-\t-\t{}\t{start}\t{end}", phase.as_str());
    }
    let mut rows: Vec<_> = trace.rows.iter().collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id).then(a.step.cmp(&b.step)));
    for r in rows {
        let _ = writeln!(s, "point\t{}\t{}\t{}\t{}\t-\t-\t-", r.id, r.class.as_str(), r.clock, r.position);
    }
    s
}

/// Per-iteration nominal usage and mean reward from a training log.
pub fn export_usage(log: &TrainLog) -> String {
    let mut s = format!("{USAGE_HEADER}\niteration\tmean_reward");
    for id in &log.pool {
        let _ = write!(s, "\tusage_{}", id.name());
    }
    s.push('\n');
    for r in &log.rows {
        let _ = write!(s, "{}\t{}", r.iteration, r.mean_reward);
        for u in &r.usage {
            let _ = write!(s, "\t{u}");
        }
        s.push('\n');
    }
    s
}

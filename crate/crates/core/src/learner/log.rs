//! Per-iteration training log, tab separated.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PpoStats;
use crate::error::{Error, Result};
use crate::nominal::NominalId;

pub const TRAIN_LOG_HEADER: &str = "# ecolane-trainlog v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: u64,
    pub episodes: usize,
    pub transitions: usize,
    /// Mean transition reward.
    pub mean_reward: f64,
    pub mean_episode_emissions: f64,
    pub fleet_fraction: f64,
    /// Mean gate vector, in pool order.
    pub usage: Vec<f64>,
    pub stats: PpoStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub pool: Vec<NominalId>,
    pub rows: Vec<IterationLog>,
}

const FIXED: [&str; 6] = [
    "iteration",
    "episodes",
    "transitions",
    "mean_reward",
    "mean_episode_emissions",
    "fleet_fraction",
];
const STATS: [&str; 7] = [
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
    "initial_ratio_deviation",
    "minibatches",
];

impl TrainLog {
    pub fn new(pool: Vec<NominalId>) -> Self {
        TrainLog { pool, rows: Vec::new() }
    }

    pub fn header(&self) -> String {
        let mut cols: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
        cols.extend(self.pool.iter().map(|id| format!("usage_{}", id.name())));
        cols.extend(STATS.iter().map(|s| s.to_string()));
        format!("{TRAIN_LOG_HEADER}\n{}\n", cols.join("\t"))
    }

    pub fn format_row(row: &IterationLog) -> String {
        let mut s = format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            row.iteration,
            row.episodes,
            row.transitions,
            row.mean_reward,
            row.mean_episode_emissions,
            row.fleet_fraction
        );
        for u in &row.usage {
            write!(s, "\t{u}").expect("string write");
        }
        let st = &row.stats;
        write!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            st.policy_loss,
            st.value_loss,
            st.entropy,
            st.clip_fraction,
            st.approx_kl,
            st.initial_ratio_deviation,
            st.minibatches
        )
        .expect("string write");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = self.header();
        for r in &self.rows {
            s.push_str(&Self::format_row(r));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: "training log".into(),
            line,
            field: "row".into(),
            message: msg,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == TRAIN_LOG_HEADER => {}
            _ => return Err(err(1, format!("expected `{TRAIN_LOG_HEADER}`"))),
        }
        let (_, cols) = lines.next().ok_or_else(|| err(2, "missing column header".into()))?;
        let cols: Vec<&str> = cols.split('\t').collect();
        let k = cols.len().checked_sub(FIXED.len() + STATS.len()).ok_or_else(|| err(2, "too few columns".into()))?;
        let pool = cols[FIXED.len()..FIXED.len() + k]
            .iter()
            .map(|c| {
                c.strip_prefix("usage_")
                    .ok_or_else(|| err(2, format!("unexpected column `{c}`")))?
                    .parse()
            })
            .collect::<Result<Vec<NominalId>>>()?;
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != cols.len() {
                return Err(err(i + 1, format!("expected {} fields, got {}", cols.len(), f.len())));
            }
            let num = |j: usize| -> Result<f64> {
                f[j].parse::<f64>().map_err(|e| err(i + 1, format!("{}: {e}", cols[j])))
            };
            let int = |j: usize| -> Result<u64> {
                f[j].parse::<u64>().map_err(|e| err(i + 1, format!("{}: {e}", cols[j])))
            };
            let s0 = FIXED.len() + k;
            rows.push(IterationLog {
                iteration: int(0)?,
                episodes: int(1)? as usize,
                transitions: int(2)? as usize,
                mean_reward: num(3)?,
                mean_episode_emissions: num(4)?,
                fleet_fraction: num(5)?,
                usage: (FIXED.len()..s0).map(num).collect::<Result<_>>()?,
                stats: PpoStats {
                    policy_loss: num(s0)?,
                    value_loss: num(s0 + 1)?,
                    entropy: num(s0 + 2)?,
                    clip_fraction: num(s0 + 3)?,
                    approx_kl: num(s0 + 4)?,
                    initial_ratio_deviation: num(s0 + 5)?,
                    minibatches: int(s0 + 6)? as usize,
                },
            });
        }
        Ok(TrainLog { pool, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, field, message, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                field,
                message,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut log = TrainLog::new(vec![NominalId::Glosa, NominalId::Zero]);
        log.rows.push(IterationLog {
            iteration: 1,
            episodes: 2,
            transitions: 300,
            mean_reward: -1.25,
            mean_episode_emissions: 40.5,
            fleet_fraction: 0.2,
            usage: vec![0.1 + 0.2, 1.0 - (0.1 + 0.2)],
            stats: PpoStats {
                policy_loss: 1e-7,
                value_loss: 3.0,
                entropy: 1.1,
                clip_fraction: 0.05,
                approx_kl: -2e-4,
                initial_ratio_deviation: 0.0,
                minibatches: 0,
            },
        });
        let back = TrainLog::parse(&log.to_text()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn header_only() {
        let log = TrainLog::new(vec![NominalId::Idm]);
        assert!(TrainLog::parse(&log.to_text()).unwrap().rows.is_empty());
        assert!(TrainLog::parse("nope").is_err());
    }
}

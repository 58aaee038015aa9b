//! Scenario file format (TOML, `schema_version = 1`).
//!
//! ```toml
//! schema_version = 1
//!
//! [[scenario]]
//! seed = 7
//! horizon = 300.0        # s
//! dt = 0.1               # s
//! [scenario.context]
//! green_duration = 30.0  # s
//! red_duration = 30.0    # s
//! signal_offset = 0.0    # s into the cycle at t = 0
//! speed_limit = 15.0     # m/s
//! lane_length = 300.0    # m
//! road_grade = 0.0       # slope fraction
//! vehicle_type = "sedan" # sedan | suv | truck
//! engine_type = "ice"    # ice | hybrid
//! vehicle_age = 0.0      # years
//! arrival_rate = 0.1     # vehicles/s
//! av_penetration = 1.0   # [0, 1]
//! # optional scripted demand, replaces random arrivals
//! [[scenario.arrival]]
//! time = 0.0
//! class = "av"
//!
//! # optional, used by `train`
//! [distribution]
//! horizon = 300.0
//! dt = 0.1
//! [[distribution.component]]
//! weight = 1.0
//! green_duration = 30.0
//! lane_length = { choice = [200.0, 400.0] }
//! arrival_rate = { uniform = [0.1, 0.25] }
//! # ... every context field, as a number, {uniform = [lo, hi]} or
//! # {choice = [...], weights = [...]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::context::ScenarioSpec;
use super::distribution::ContextDistribution;
use super::encode::ContextBounds;
use crate::error::{Error, Result};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    /// Normalization bounds for evaluation; the distribution carries its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<ContextBounds>,
    #[serde(default, rename = "scenario", skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<ContextDistribution>,
}

impl ScenarioFile {
    pub fn new(scenarios: Vec<ScenarioSpec>) -> Self {
        ScenarioFile {
            schema_version: SCENARIO_SCHEMA_VERSION,
            bounds: None,
            scenarios,
            distribution: None,
        }
    }

    pub fn bounds(&self) -> ContextBounds {
        self.bounds
            .or_else(|| self.distribution.as_ref().map(|d| d.bounds))
            .unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCENARIO_SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        if let Some(b) = &self.bounds {
            b.validate()?;
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            s.validate().map_err(|e| prefix(e, &format!("scenario[{i}]")))?;
        }
        if let Some(d) = &self.distribution {
            d.validate().map_err(|e| prefix(e, "distribution"))?;
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        if text.lines().all(|l| {
            let l = l.trim();
            l.is_empty() || l.starts_with('#')
        }) {
            return Ok(ScenarioFile::new(Vec::new()));
        }
        let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_error(text, origin, &e))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid("scenario file", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}

fn prefix(e: Error, scope: &str) -> Error {
    match e {
        Error::Invalid { field, message } => Error::Invalid {
            field: format!("{scope}.{field}"),
            message,
        },
        other => other,
    }
}

fn parse_error(text: &str, origin: &str, e: &toml::de::Error) -> Error {
    let (line, field) = match e.span() {
        Some(span) => {
            let start = span.start.min(text.len());
            let line_idx = text[..start].matches('\n').count();
            let line_text = text.lines().nth(line_idx).unwrap_or("");
            let field = line_text
                .split_once('=')
                .map(|(k, _)| k.trim().to_string())
                .unwrap_or_else(|| line_text.trim().to_string());
            (line_idx + 1, field)
        }
        None => (0, String::new()),
    };
    Error::Parse {
        path: origin.to_string(),
        line,
        field,
        message: e.message().to_string(),
    }
}

/// Loads and validates every scenario in file order.
pub fn load_scenarios(path: &Path) -> Result<Vec<ScenarioSpec>> {
    Ok(ScenarioFile::load(path)?.scenarios)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Context;

    fn block(seed: u64, penetration: f64) -> String {
        format!(
            r#"
[[scenario]]
seed = {seed}
horizon = 120.0
dt = 0.1
[scenario.context]
green_duration = 30.0
red_duration = 30.0
signal_offset = 0.0
speed_limit = 15.0
lane_length = 300.0
road_grade = 0.0
vehicle_type = "sedan"
engine_type = "ice"
vehicle_age = 3.0
arrival_rate = 0.1
av_penetration = {penetration:?}
"#
        )
    }

    #[test]
    fn three_blocks_in_order() {
        let text = format!(
            "schema_version = 1\n{}{}{}",
            block(1, 1.0),
            block(2, 0.3),
            block(3, 0.0)
        );
        let f = ScenarioFile::parse(&text, "mem").unwrap();
        assert_eq!(f.scenarios.len(), 3);
        let seeds: Vec<u64> = f.scenarios.iter().map(|s| s.seed).collect();
        assert_eq!(seeds, vec![1, 2, 3]);
    }

    #[test]
    fn penetration_violation_names_field() {
        let text = format!("schema_version = 1\n{}", block(1, 1.3));
        let err = ScenarioFile::parse(&text, "mem").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("av_penetration"), "{msg}");
        assert!(msg.contains("scenario[0]"), "{msg}");
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(ScenarioFile::parse("", "mem").unwrap().scenarios.is_empty());
        assert!(ScenarioFile::parse("# nothing\n\n", "mem").unwrap().scenarios.is_empty());
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "schema_version = 1\n[[scenario]]\nseed = \"x\"\n";
        match ScenarioFile::parse(text, "mem").unwrap_err() {
            Error::Parse { line, .. } => assert!(line >= 2, "line {line}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = format!("schema_version = 1\n{}", block(1, 1.0)).replace("vehicle_age", "vehicle_agee");
        assert!(ScenarioFile::parse(&text, "mem").is_err());
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let text = format!("schema_version = 2\n{}", block(1, 1.0));
        let err = ScenarioFile::parse(&text, "mem").unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn writes_and_reads_distribution() {
        let mut f = ScenarioFile::new(vec![ScenarioSpec::new(Context::default(), 4, 60.0, 0.1)]);
        f.distribution = Some(ContextDistribution::point(&Context::default(), 60.0, 0.1));
        let back = ScenarioFile::parse(&f.to_toml().unwrap(), "mem").unwrap();
        assert_eq!(back, f);
    }
}

//! Episode trace: one row per (step, vehicle) plus one signal row per step.
//!
//! Tab-separated text. The first line is `# ecolane-trace v1`, the second
//! the column header:
//!
//! ```text
//! record step clock id class position speed accel emission_rate phase
//! ```
//!
//! `record` is `signal` (phase governing the step starting at `clock`;
//! vehicle columns are `-`) or `vehicle` (state after the step ending at
//! `clock`; `phase` is `-`).

use std::fmt::Write as _;
use std::path::Path;

use super::world::{SignalPhase, StepReport, World};
use crate::error::{Error, Result};
use crate::scenario::VehicleClass;

pub const TRACE_HEADER: &str = "# ecolane-trace v1";
const COLUMNS: &str = "record\tstep\tclock\tid\tclass\tposition\tspeed\taccel\temission_rate\tphase";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub clock: f64,
    pub id: u64,
    pub class: VehicleClass,
    pub position: f64,
    pub speed: f64,
    pub accel: f64,
    pub emission_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalRow {
    pub step: u64,
    pub clock: f64,
    pub phase: SignalPhase,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub signal: Vec<SignalRow>,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    /// Records the signal governing the step about to run.
    pub fn record_signal(&mut self, world: &World) {
        self.signal.push(SignalRow {
            step: world.step_index,
            clock: world.clock,
            phase: world.signal.phase,
        });
    }

    /// Records every vehicle after a step, including those that just exited.
    pub fn record_vehicles(&mut self, world: &World, report: &StepReport) {
        for v in report.exited.iter().chain(world.vehicles.iter()) {
            self.rows.push(TraceRow {
                step: world.step_index,
                clock: world.clock,
                id: v.id,
                class: v.class,
                position: v.position,
                speed: v.speed,
                accel: v.accel,
                emission_rate: v.emission_rate,
            });
        }
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty() && self.rows.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(TRACE_HEADER);
        out.push('\n');
        out.push_str(COLUMNS);
        out.push('\n');
        // Interleave by step: signal row for step k precedes vehicle rows
        // produced by that step (stamped k + 1).
        let mut rows = self.rows.iter().peekable();
        for s in &self.signal {
            while let Some(r) = rows.peek() {
                if r.step > s.step {
                    break;
                }
                write_vehicle(&mut out, r);
                rows.next();
            }
            let _ = writeln!(out, "signal\t{}\t{}\t-\t-\t-\t-\t-\t-\t{}", s.step, s.clock, s.phase.as_str());
        }
        for r in rows {
            write_vehicle(&mut out, r);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == TRACE_HEADER => {}
            _ => return Err(parse_err(1, "header", "missing trace header")),
        }
        match lines.next() {
            Some((_, l)) if l.trim() == COLUMNS => {}
            None => return Ok(Trace::default()),
            _ => return Err(parse_err(2, "columns", "unexpected column header")),
        }
        let mut trace = Trace::default();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 10 {
                return Err(parse_err(i + 1, "row", "expected 10 columns"));
            }
            let num = |k: usize, name: &str| -> Result<f64> {
                f[k].parse::<f64>().map_err(|_| parse_err(i + 1, name, "not a number"))
            };
            let int = |k: usize, name: &str| -> Result<u64> {
                f[k].parse::<u64>().map_err(|_| parse_err(i + 1, name, "not an integer"))
            };
            match f[0] {
                "signal" => trace.signal.push(SignalRow {
                    step: int(1, "step")?,
                    clock: num(2, "clock")?,
                    phase: match f[9] {
                        "green" => SignalPhase::Green,
                        "red" => SignalPhase::Red,
                        _ => return Err(parse_err(i + 1, "phase", "expected green or red")),
                    },
                }),
                "vehicle" => trace.rows.push(TraceRow {
                    step: int(1, "step")?,
                    clock: num(2, "clock")?,
                    id: int(3, "id")?,
                    class: match f[4] {
                        "av" => VehicleClass::Av,
                        "human" => VehicleClass::Human,
                        _ => return Err(parse_err(i + 1, "class", "expected av or human")),
                    },
                    position: num(5, "position")?,
                    speed: num(6, "speed")?,
                    accel: num(7, "accel")?,
                    emission_rate: num(8, "emission_rate")?,
                }),
                _ => return Err(parse_err(i + 1, "record", "expected signal or vehicle")),
            }
        }
        Ok(trace)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn write_vehicle(out: &mut String, r: &TraceRow) {
    let _ = writeln!(
        out,
        "vehicle\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t-",
        r.step,
        r.clock,
        r.id,
        r.class.as_str(),
        r.position,
        r.speed,
        r.accel,
        r.emission_rate
    );
}

fn parse_err(line: usize, field: &str, message: &str) -> Error {
    Error::Parse {
        path: "trace".into(),
        line,
        field: field.into(),
        message: message.into(),
    }
}

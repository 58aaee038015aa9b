use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::error::{Error, Result};

pub const BENEFIT_HEADER: &str = "# ecolane-benefits v1";

/// Improvement of one method over the baseline on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenefitRow {
    pub scenario: usize,
    pub method: String,
    pub baseline_emissions: f64,
    pub method_emissions: f64,
    /// `(baseline - method) / baseline * 100`.
    pub emission_benefit_pct: f64,
    pub baseline_throughput: f64,
    pub method_throughput: f64,
    /// `(method - baseline) / baseline * 100`.
    pub throughput_benefit_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenefitSummary {
    pub method: String,
    /// Unweighted mean over scenarios.
    pub emission_benefit_pct: f64,
    pub throughput_benefit_pct: f64,
    pub min_emission_benefit_pct: f64,
    pub max_emission_benefit_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenefitTable {
    pub baseline: String,
    pub rows: Vec<BenefitRow>,
    pub summary: Vec<BenefitSummary>,
    /// Context of each scenario, for keying the rows.
    pub contexts: Vec<crate::scenario::Context>,
}

pub fn emission_benefit(baseline: f64, method: f64) -> f64 {
    (baseline - method) / baseline * 100.0
}

pub fn throughput_benefit(baseline: f64, method: f64) -> f64 {
    (method - baseline) / baseline * 100.0
}

fn check_paired(baseline: &EvalReport, other: &EvalReport) -> Result<()> {
    if baseline.scenario_digest != other.scenario_digest || baseline.scenarios.len() != other.scenarios.len() {
        return Err(Error::ScenarioMismatch(format!(
            "{} and {} were evaluated on different scenarios or seeds",
            baseline.method, other.method
        )));
    }
    for (a, b) in baseline.scenarios.iter().zip(&other.scenarios) {
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            if ra.seed != rb.seed || ra.arrivals_digest != rb.arrivals_digest {
                return Err(Error::ScenarioMismatch(format!(
                    "scenario {} seed {}: arrivals differ between {} and {}",
                    a.index, ra.seed, baseline.method, other.method
                )));
            }
        }
    }
    Ok(())
}

/// Per-scenario and aggregate benefits of each report over `baseline`.
/// Per-scenario figures use emissions summed over seeds and throughput
/// averaged over seeds.
pub fn compare(baseline: &EvalReport, reports: &[EvalReport]) -> Result<BenefitTable> {
    for s in &baseline.scenarios {
        if !(s.total_emissions > 0.0 && s.throughput > 0.0) {
            return Err(Error::invalid(
                format!("baseline scenario {}", s.index),
                "baseline emissions and throughput must be positive",
            ));
        }
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for r in reports {
        check_paired(baseline, r)?;
        let name = r.method.to_string();
        let mut e_sum = 0.0;
        let mut t_sum = 0.0;
        let (mut e_min, mut e_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for (b, m) in baseline.scenarios.iter().zip(&r.scenarios) {
            let row = BenefitRow {
                scenario: b.index,
                method: name.clone(),
                baseline_emissions: b.total_emissions,
                method_emissions: m.total_emissions,
                emission_benefit_pct: emission_benefit(b.total_emissions, m.total_emissions),
                baseline_throughput: b.throughput,
                method_throughput: m.throughput,
                throughput_benefit_pct: throughput_benefit(b.throughput, m.throughput),
            };
            e_sum += row.emission_benefit_pct;
            t_sum += row.throughput_benefit_pct;
            e_min = e_min.min(row.emission_benefit_pct);
            e_max = e_max.max(row.emission_benefit_pct);
            rows.push(row);
        }
        let n = baseline.scenarios.len().max(1) as f64;
        summary.push(BenefitSummary {
            method: name,
            emission_benefit_pct: e_sum / n,
            throughput_benefit_pct: t_sum / n,
            min_emission_benefit_pct: if baseline.scenarios.is_empty() { 0.0 } else { e_min },
            max_emission_benefit_pct: if baseline.scenarios.is_empty() { 0.0 } else { e_max },
        });
    }
    Ok(BenefitTable {
        baseline: baseline.method.to_string(),
        rows,
        summary,
        contexts: baseline.scenarios.iter().map(|s| s.context).collect(),
    })
}

impl BenefitTable {
    pub fn summary_for(&self, method: &str) -> Option<&BenefitSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// Tab-separated table keyed by context fields, then a summary block
    /// of `#`-prefixed lines.
    pub fn to_tsv(&self) -> String {
        let mut s = format!("{BENEFIT_HEADER}\n# baseline\t{}\n", self.baseline);
        s.push_str(
            "scenario\tmethod\tlane_length\tgreen_duration\tred_duration\tspeed_limit\troad_grade\tarrival_rate\tav_penetration\t\
             baseline_emissions\tmethod_emissions\temission_benefit_pct\tbaseline_throughput\tmethod_throughput\tthroughput_benefit_pct\n",
        );
        for r in &self.rows {
            let c = &self.contexts[r.scenario];
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.scenario,
                r.method,
                c.lane_length,
                c.green_duration,
                c.red_duration,
                c.speed_limit,
                c.road_grade,
                c.arrival_rate,
                c.av_penetration,
                r.baseline_emissions,
                r.method_emissions,
                r.emission_benefit_pct,
                r.baseline_throughput,
                r.method_throughput,
                r.throughput_benefit_pct
            );
        }
        s.push_str("# summary\tmethod\temission_benefit_pct\tthroughput_benefit_pct\tmin_emission_benefit_pct\tmax_emission_benefit_pct\n");
        for m in &self.summary {
            let _ = writeln!(
                s,
                "# summary\t{}\t{}\t{}\t{}\t{}",
                m.method, m.emission_benefit_pct, m.throughput_benefit_pct, m.min_emission_benefit_pct, m.max_emission_benefit_pct
            );
        }
        s
    }
}

mod common;

use common::four_scenarios;
use ecolane::eval::*;
use ecolane::scenario::ContextBounds;

fn opts(seeds: usize, workers: usize) -> EvalOptions {
    EvalOptions {
        seeds_per_scenario: seeds,
        workers,
        penetration_override: None,
    }
}

fn report(method: Method, controller: &Controller, o: &EvalOptions) -> EvalReport {
    run_method(&four_scenarios(120.0), &ContextBounds::default(), method, controller, None, o).unwrap()
}

#[test]
fn methods_see_identical_demand() {
    let o = opts(3, 1);
    let idm = report(Method::IdmBaseline, &Controller::Idm, &o);
    let glosa = report(Method::GlosaAll, &Controller::Glosa, &o);
    assert_eq!(idm.scenario_digest, glosa.scenario_digest);
    for (a, b) in idm.scenarios.iter().zip(&glosa.scenarios) {
        let seeds: Vec<u64> = a.runs.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![a.runs[0].seed, a.runs[0].seed + 1, a.runs[0].seed + 2]);
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            assert_eq!(ra.arrivals_digest, rb.arrivals_digest);
        }
    }
    assert_ne!(idm.config_digest, glosa.config_digest);
}

#[test]
fn worker_count_does_not_change_the_report() {
    let one = report(Method::GlosaAll, &Controller::Glosa, &opts(2, 1));
    let three = report(Method::GlosaAll, &Controller::Glosa, &opts(2, 3));
    assert_eq!(one.to_json(), three.to_json());
}

#[test]
fn scenario_totals_aggregate_runs() {
    let r = report(Method::IdmBaseline, &Controller::Idm, &opts(3, 1));
    for s in &r.scenarios {
        let e: f64 = s.runs.iter().map(|x| x.total_emissions).sum();
        let t: f64 = s.runs.iter().map(|x| x.throughput).sum::<f64>() / s.runs.len() as f64;
        assert!((s.total_emissions - e).abs() <= 1e-9 * e);
        assert!((s.throughput - t).abs() <= 1e-9 * t);
    }
}

#[test]
fn without_avs_every_method_is_the_baseline() {
    let o = EvalOptions {
        penetration_override: Some(0.0),
        ..opts(2, 1)
    };
    let idm = report(Method::IdmBaseline, &Controller::Idm, &o);
    let glosa = report(Method::GlosaAll, &Controller::Glosa, &o);
    let table = compare(&idm, &[glosa]).unwrap();
    for row in &table.rows {
        assert_eq!(row.emission_benefit_pct, 0.0);
        assert_eq!(row.throughput_benefit_pct, 0.0);
    }
}

#[test]
fn benefit_arithmetic_by_hand() {
    let base = report(Method::IdmBaseline, &Controller::Idm, &opts(1, 1));
    let mut b = base.clone();
    let mut m = base.clone();
    m.method = Method::GlosaAll;
    let hand = [(100.0, 90.0, 1000.0, 1100.0), (200.0, 150.0, 500.0, 450.0), (50.0, 55.0, 800.0, 800.0), (10.0, 10.0, 100.0, 120.0)];
    for (i, &(be, me, bt, mt)) in hand.iter().enumerate() {
        b.scenarios[i].total_emissions = be;
        m.scenarios[i].total_emissions = me;
        b.scenarios[i].throughput = bt;
        m.scenarios[i].throughput = mt;
    }
    let t = compare(&b, &[m]).unwrap();
    let e: Vec<f64> = t.rows.iter().map(|r| r.emission_benefit_pct).collect();
    let th: Vec<f64> = t.rows.iter().map(|r| r.throughput_benefit_pct).collect();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    for (got, want) in e.iter().zip([10.0, 25.0, -10.0, 0.0]) {
        assert!(close(*got, want), "{got} vs {want}");
    }
    for (got, want) in th.iter().zip([10.0, -10.0, 0.0, 20.0]) {
        assert!(close(*got, want), "{got} vs {want}");
    }
    let s = t.summary_for("glosa_all").unwrap();
    assert!(close(s.emission_benefit_pct, 6.25));
    assert!(close(s.throughput_benefit_pct, 5.0));
    assert!(close(s.min_emission_benefit_pct, -10.0));
    assert!(close(s.max_emission_benefit_pct, 25.0));
}

#[test]
fn compare_rejects_unpaired_reports() {
    let base = report(Method::IdmBaseline, &Controller::Idm, &opts(1, 1));
    let mut other = report(Method::GlosaAll, &Controller::Glosa, &opts(1, 1));
    other.scenarios[2].runs[0].arrivals_digest = "0".repeat(64);
    assert_eq!(compare(&base, &[other]).unwrap_err().kind(), "scenario_mismatch");
    let longer = report(Method::GlosaAll, &Controller::Glosa, &opts(2, 1));
    assert_eq!(compare(&base, &[longer]).unwrap_err().kind(), "scenario_mismatch");
}

#[test]
fn glosa_avoids_the_red_stop() {
    let spec = red_arrival_scenario();
    let b = ContextBounds::default();
    let idm = run_episode(&spec, &b, &Controller::Idm, None).unwrap();
    let glosa = run_episode(&spec, &b, &Controller::Glosa, None).unwrap();
    assert!(idm.metrics.stop_count >= 1);
    assert_eq!(glosa.metrics.stop_count, 0);
    assert_eq!(glosa.metrics.exited, 1);
    assert!(glosa.metrics.total_emissions < idm.metrics.total_emissions);
}

#[test]
fn report_json_round_trips() {
    let r = report(Method::GlosaAll, &Controller::Glosa, &opts(1, 1));
    assert_eq!(EvalReport::from_json(&r.to_json()).unwrap(), r);
}

#[test]
fn trace_text_round_trips_and_exports() {
    let mut trace = ecolane::sim::Trace::default();
    run_episode(&red_arrival_scenario(), &ContextBounds::default(), &Controller::Idm, Some(&mut trace)).unwrap();
    let back = ecolane::sim::Trace::parse(&trace.to_text()).unwrap();
    assert_eq!(back.rows.len(), trace.rows.len());
    let intervals = signal_intervals(&trace);
    // offset 25 into a 30/30 cycle: green until 5 s, red until 35 s, ...
    assert_eq!(intervals[0].0, ecolane::sim::SignalPhase::Green);
    assert!((intervals[0].2 - 5.0).abs() < 1e-9);
    assert!((intervals[1].2 - 35.0).abs() < 1e-9);
    for w in intervals.windows(2) {
        assert_ne!(w[0].0, w[1].0);
        assert!((w[0].2 - w[1].1).abs() < 1e-9);
    }
}

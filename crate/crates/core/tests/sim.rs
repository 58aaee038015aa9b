mod common;

use std::collections::BTreeMap;

use common::{drive, random_context};
use ecolane::nominal::glosa_accel;
use ecolane::scenario::{ContextBounds, ScenarioSpec, VehicleClass};
use ecolane::sim::{init_world, World, A_MAX, A_MIN};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn world(ctx_seed: u64, penetration: f64, horizon: f64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx_seed);
    let c = random_context(&mut rng, penetration);
    init_world(&ScenarioSpec::new(c, ctx_seed, horizon, 0.1), &ContextBounds::default()).unwrap()
}

fn av_commands(w: &World, mut f: impl FnMut(u64) -> f64) -> BTreeMap<u64, f64> {
    w.av_ids().into_iter().map(|id| (id, f(id))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_commands_never_collide_or_run_red(ctx_seed in any::<u64>(), cmd_seed in any::<u64>(), pen in 0.0f64..=1.0) {
        let mut w = world(ctx_seed, pen, 200.0);
        let mut rng = ChaCha8Rng::seed_from_u64(cmd_seed);
        let v = drive(&mut w, |w| av_commands(w, |_| rng.gen_range(2.0 * A_MIN..2.0 * A_MAX)));
        prop_assert_eq!(v.negative_gaps, 0);
        prop_assert_eq!(v.red_crossings, 0);
    }

    #[test]
    fn glosa_fleet_is_safe(ctx_seed in any::<u64>()) {
        let mut w = world(ctx_seed, 1.0, 200.0);
        let v = drive(&mut w, |w| av_commands(w, |id| glosa_accel(&w.observe(id).unwrap())));
        prop_assert_eq!(v.negative_gaps, 0);
        prop_assert_eq!(v.red_crossings, 0);
    }

    #[test]
    fn emissions_are_accounted_per_vehicle(ctx_seed in any::<u64>(), pen in 0.0f64..=1.0) {
        let mut w = world(ctx_seed, pen, 150.0);
        drive(&mut w, |_| BTreeMap::new());
        let m = w.collect_metrics();
        let per_vehicle: f64 = m.vehicles.iter().map(|r| r.emissions).sum();
        prop_assert!((m.total_emissions - per_vehicle).abs() <= 1e-9 * per_vehicle.max(1.0));
        prop_assert!(m.vehicles.iter().all(|r| r.emissions >= 0.0));
        prop_assert_eq!(m.exited, m.vehicles.iter().filter(|r| !r.censored).count());
        prop_assert_eq!(m.vehicles.len(), w.arrivals.len());
    }

    #[test]
    fn same_seed_same_trajectory(ctx_seed in any::<u64>()) {
        let mut a = world(ctx_seed, 0.5, 100.0);
        let mut b = world(ctx_seed, 0.5, 100.0);
        drive(&mut a, |_| BTreeMap::new());
        drive(&mut b, |_| BTreeMap::new());
        prop_assert_eq!(a.collect_metrics(), b.collect_metrics());
        prop_assert_eq!(a.arrivals, b.arrivals);
    }
}

#[test]
fn demand_does_not_depend_on_av_behaviour() {
    let run = |accel: f64| {
        let mut w = world(77, 1.0, 200.0);
        drive(&mut w, |w| av_commands(w, |_| accel));
        w.arrivals.clone()
    };
    assert_eq!(run(0.0), run(-2.0));
    assert_eq!(run(0.0), run(2.5));
}

#[test]
fn classes_follow_penetration() {
    let mut humans = world(5, 0.0, 300.0);
    drive(&mut humans, |_| BTreeMap::new());
    assert!(humans.arrivals.iter().all(|a| a.class == VehicleClass::Human));
    let mut avs = world(5, 1.0, 300.0);
    drive(&mut avs, |_| BTreeMap::new());
    assert!(avs.arrivals.iter().all(|a| a.class == VehicleClass::Av));
}

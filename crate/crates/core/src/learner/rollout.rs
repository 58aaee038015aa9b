use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{assign_rewards, TrainConfig};
use crate::error::{Error, Result};
use crate::policy::{ActMode, Policy};
use crate::scenario::{sample_context, ContextDistribution, ScenarioSpec};
use crate::sim::{init_world, OBS_DIM};

/// Upper bound on episodes one worker runs per iteration, so a
/// distribution without AV traffic cannot stall training.
pub const MAX_EPISODES_PER_WORKER: usize = 256;

/// One decision of one AV and the reward collected until the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub features: [f64; OBS_DIM],
    pub gate_index: usize,
    pub gate: Vec<f64>,
    pub residual: f64,
    pub gaussian: f64,
    pub pool: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
    /// Mean of the assigned per-step rewards over the decision interval.
    pub reward: f64,
    /// The vehicle left the corridor during this transition.
    pub done: bool,
    /// Critic value after the last transition of a chain cut by the
    /// horizon; zero elsewhere.
    pub bootstrap: f64,
    pub worker: usize,
    pub episode: usize,
    pub vehicle: u64,
    /// At least one step of the interval was fleet-assigned.
    pub fleet_flag: bool,
    pub steps: usize,
}

/// Everything one worker produced in one iteration. Transitions of one
/// (episode, vehicle) chain are contiguous and in time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkerBatch {
    pub transitions: Vec<Transition>,
    pub episodes: usize,
    pub reward_steps: usize,
    pub fleet_steps: usize,
    pub total_emissions: f64,
}

struct Open {
    t: Transition,
    command: f64,
    reward_sum: f64,
}

/// Runs one episode on a context drawn from `dist`, every AV acting with
/// `policy` in training mode. Appends to `out`.
pub fn run_episode(
    policy: &Policy,
    dist: &ContextDistribution,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    worker: usize,
    episode: usize,
    out: &mut WorkerBatch,
) -> Result<()> {
    let context = sample_context(dist, rng)?;
    let spec = ScenarioSpec::new(context, rng.gen(), dist.horizon, dist.dt);
    let mut world = init_world(&spec, &dist.bounds)?;
    let mut open: BTreeMap<u64, Open> = BTreeMap::new();
    let mut chains: BTreeMap<u64, Vec<Transition>> = BTreeMap::new();
    let close = |o: Open, done: bool, chains: &mut BTreeMap<u64, Vec<Transition>>| {
        let mut t = o.t;
        t.reward = o.reward_sum / t.steps as f64;
        t.done = done;
        chains.entry(t.vehicle).or_default().push(t);
    };

    while !world.is_done() {
        world.spawn_arrivals();

        let mut deciding = Vec::new();
        for (idx, v) in world.vehicles.iter().enumerate() {
            if v.class != crate::scenario::VehicleClass::Av {
                continue;
            }
            let due = open.get(&v.id).map_or(true, |o| o.t.steps >= policy.config.decision_interval);
            if due {
                deciding.push((idx, v.id));
            }
        }
        if !deciding.is_empty() {
            let mut features = Vec::with_capacity(deciding.len());
            let mut pools = Vec::with_capacity(deciding.len());
            for &(idx, _) in &deciding {
                let obs = world.observe_index(idx);
                features.push(policy.features(&obs)?);
                pools.push(policy.config.pool.evaluate(&obs));
            }
            let actions = policy.act_batch(&features, &pools, rng, ActMode::Train)?;
            for ((&(_, id), f), a) in deciding.iter().zip(features).zip(actions) {
                if let Some(prev) = open.remove(&id) {
                    close(prev, false, &mut chains);
                }
                open.insert(
                    id,
                    Open {
                        t: Transition {
                            features: f,
                            gate_index: a.gate_index,
                            gate: a.gate,
                            residual: a.residual,
                            gaussian: a.gaussian,
                            pool: a.pool,
                            log_prob: a.joint_log_prob,
                            value: a.value,
                            reward: 0.0,
                            done: false,
                            bootstrap: 0.0,
                            worker,
                            episode,
                            vehicle: id,
                            fleet_flag: false,
                            steps: 0,
                        },
                        command: a.final_accel,
                        reward_sum: 0.0,
                    },
                );
            }
        }

        // commands are held until the vehicle's next decision
        let commands: BTreeMap<u64, f64> = open.iter().map(|(&id, o)| (id, o.command)).collect();
        let report = world.step(&commands)?;

        let ids: Vec<u64> = commands.keys().copied().collect();
        let individual = ids
            .iter()
            .map(|&id| world.step_reward(id, &cfg.reward))
            .collect::<Result<Vec<f64>>>()?;
        let (assigned, fleet) = assign_rewards(&individual, cfg.fleet_probability, rng);
        if !ids.is_empty() {
            out.reward_steps += 1;
            out.fleet_steps += fleet as usize;
        }
        for (id, r) in ids.iter().zip(assigned) {
            let o = open.get_mut(id).expect("commanded vehicle is open");
            o.reward_sum += r;
            o.t.steps += 1;
            o.t.fleet_flag |= fleet;
        }
        for v in &report.exited {
            if let Some(o) = open.remove(&v.id) {
                close(o, true, &mut chains);
            }
        }
    }

    for (id, mut o) in std::mem::take(&mut open) {
        let idx = world.index_of(id).ok_or(Error::UnknownVehicle(id))?;
        let obs = world.observe_index(idx);
        o.t.bootstrap = policy.critic_forward(&policy.features(&obs)?)?;
        close(o, false, &mut chains);
    }
    for (_, chain) in chains {
        out.transitions.extend(chain);
    }
    out.total_emissions += world.collect_metrics().total_emissions;
    out.episodes += 1;
    Ok(())
}

/// Episodes until at least `quota` transitions are collected.
pub fn collect(
    policy: &Policy,
    dist: &ContextDistribution,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    worker: usize,
    quota: usize,
) -> Result<WorkerBatch> {
    let mut out = WorkerBatch::default();
    let mut episode = 0;
    while out.transitions.len() < quota && episode < MAX_EPISODES_PER_WORKER {
        run_episode(policy, dist, cfg, rng, worker, episode, &mut out)?;
        episode += 1;
    }
    Ok(out)
}

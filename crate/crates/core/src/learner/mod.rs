//! PPO over parallel rollout workers sharing one policy snapshot.

mod config;
mod gae;
mod log;
mod ppo;
mod rollout;

use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::TrainConfig;
pub use gae::{assign_rewards, gae, normalize};
pub use log::{IterationLog, TrainLog, TRAIN_LOG_HEADER};
pub use ppo::{ppo_loss, ppo_update, LossParts, PpoSample, PpoStats};
pub use rollout::{collect, run_episode, Transition, WorkerBatch, MAX_EPISODES_PER_WORKER};

use crate::error::{Error, Result};
use crate::net::{load_optimizer, store_optimizer, AdamConfig, Container, OptimizerState};
use crate::policy::{Policy, PolicyConfig};
use crate::scenario::ContextDistribution;

const STREAM_INIT: u64 = 1;
const STREAM_ROLLOUT: u64 = 2;
const STREAM_UPDATE: u64 = 3;

/// Independent generator for one purpose of one run: same `seed`, a
/// distinct ChaCha stream per `(domain, index)`.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 56) ^ index);
    rng
}

/// Turns ordered transitions into PPO samples with GAE advantages
/// (normalized over the whole set) and return targets.
pub fn build_samples(transitions: &[Transition], cfg: &TrainConfig) -> Result<Vec<PpoSample>> {
    let mut advantages = Vec::with_capacity(transitions.len());
    let mut targets = Vec::with_capacity(transitions.len());
    let same_chain =
        |a: &Transition, b: &Transition| a.worker == b.worker && a.episode == b.episode && a.vehicle == b.vehicle;
    let mut start = 0;
    while start < transitions.len() {
        let mut end = start + 1;
        while end < transitions.len() && same_chain(&transitions[start], &transitions[end]) {
            end += 1;
        }
        let chain = &transitions[start..end];
        let rewards: Vec<f64> = chain.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = chain.iter().map(|t| t.done).collect();
        let mut values: Vec<f64> = chain.iter().map(|t| t.value).collect();
        values.push(chain.last().expect("non-empty chain").bootstrap);
        let (a, r) = gae(&rewards, &values, &dones, cfg.gamma, cfg.gae_lambda)?;
        advantages.extend(a);
        targets.extend(r);
        start = end;
    }
    normalize(&mut advantages);
    Ok(transitions
        .iter()
        .zip(advantages)
        .zip(targets)
        .map(|((t, advantage), target)| PpoSample {
            features: t.features,
            gaussian: t.gaussian,
            gate_index: t.gate_index,
            pool: t.pool.clone(),
            old_log_prob: t.log_prob,
            advantage,
            target,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrainState {
    seed: u64,
    workers: usize,
    config: TrainConfig,
}

/// Learner state: the only mutator of policy parameters.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub policy: Policy,
    pub actor_opt: OptimizerState,
    pub critic_opt: OptimizerState,
    pub config: TrainConfig,
    pub distribution: ContextDistribution,
    pub seed: u64,
    pub workers: usize,
    /// Completed iterations.
    pub iteration: u64,
}

impl Trainer {
    pub fn new(
        policy_config: PolicyConfig,
        distribution: ContextDistribution,
        config: TrainConfig,
        seed: u64,
        workers: usize,
    ) -> Result<Self> {
        config.validate()?;
        distribution.validate()?;
        if workers == 0 {
            return Err(Error::invalid("workers", "need at least one worker"));
        }
        let mut rng = stream_rng(seed, STREAM_INIT, 0);
        let policy = Policy::new(policy_config, distribution.bounds, &mut rng)?;
        let adam = AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        };
        Ok(Trainer {
            actor_opt: OptimizerState::new(&policy.actor, adam),
            critic_opt: OptimizerState::new(&policy.critic, adam),
            policy,
            config,
            distribution,
            seed,
            workers,
            iteration: 0,
        })
    }

    /// Restores a trainer from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(c: &Container, distribution: ContextDistribution) -> Result<Self> {
        let (policy, manifest) = Policy::from_container(c)?;
        let state: TrainState = serde_json::from_value(
            c.manifest
                .get("train")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("checkpoint has no training state".into()))?,
        )
        .map_err(|e| Error::Checkpoint(format!("training state: {e}")))?;
        if distribution.bounds != policy.bounds {
            return Err(Error::CheckpointMismatch(
                "scenario bounds differ from the checkpoint's".into(),
            ));
        }
        Ok(Trainer {
            actor_opt: load_optimizer(c, "opt.actor", &policy.actor)?,
            critic_opt: load_optimizer(c, "opt.critic", &policy.critic)?,
            policy,
            config: state.config,
            distribution,
            seed: state.seed,
            workers: state.workers,
            iteration: manifest.iteration,
        })
    }

    pub fn checkpoint(&self) -> Container {
        let mut c = self.policy.to_container(self.iteration);
        let state = TrainState {
            seed: self.seed,
            workers: self.workers,
            config: self.config.clone(),
        };
        c.manifest
            .as_object_mut()
            .expect("manifest is an object")
            .insert("train".into(), serde_json::to_value(state).expect("state serializes"));
        store_optimizer(&mut c, "opt.actor", &self.actor_opt);
        store_optimizer(&mut c, "opt.critic", &self.critic_opt);
        c
    }

    fn rollouts(&self) -> Result<Vec<WorkerBatch>> {
        let quota = self.config.steps_per_iteration.div_ceil(self.workers);
        let run = |w: usize| -> Result<WorkerBatch> {
            let mut rng = stream_rng(self.seed, STREAM_ROLLOUT, self.iteration * self.workers as u64 + w as u64);
            collect(&self.policy, &self.distribution, &self.config, &mut rng, w, quota)
        };
        if self.workers == 1 {
            return Ok(vec![run(0)?]);
        }
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|s| {
            for w in 0..self.workers {
                let tx = tx.clone();
                let run = &run;
                s.spawn(move || {
                    let result = catch_unwind(AssertUnwindSafe(|| run(w))).unwrap_or_else(|p| {
                        let msg = p
                            .downcast_ref::<&str>()
                            .map(|s| s.to_string())
                            .or_else(|| p.downcast_ref::<String>().cloned())
                            .unwrap_or_else(|| "panic".into());
                        Err(Error::Worker { worker: w, message: msg })
                    });
                    // the receiver outlives the scope
                    let _ = tx.send((w, result));
                });
            }
        });
        drop(tx);
        let mut slots: Vec<Option<WorkerBatch>> = vec![None; self.workers];
        for (w, result) in rx {
            slots[w] = Some(result.map_err(|e| match e {
                Error::Worker { .. } => e,
                other => Error::Worker {
                    worker: w,
                    message: other.to_string(),
                },
            })?);
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(w, b)| {
                b.ok_or(Error::Worker {
                    worker: w,
                    message: "no result".into(),
                })
            })
            .collect()
    }

    /// Collects rollouts from every worker, aggregates them in worker
    /// order and applies one PPO update.
    pub fn step(&mut self) -> Result<IterationLog> {
        let batches = self.rollouts()?;
        let mut transitions = Vec::new();
        let (mut episodes, mut reward_steps, mut fleet_steps, mut emissions) = (0, 0, 0, 0.0);
        for b in batches {
            episodes += b.episodes;
            reward_steps += b.reward_steps;
            fleet_steps += b.fleet_steps;
            emissions += b.total_emissions;
            transitions.extend(b.transitions);
        }
        let k = self.policy.pool_size();
        let n = transitions.len();
        let mut usage = vec![0.0; k];
        for t in &transitions {
            for (u, g) in usage.iter_mut().zip(&t.gate) {
                *u += g;
            }
        }
        if n > 0 {
            usage.iter_mut().for_each(|u| *u /= n as f64);
        }
        let mean_reward = if n > 0 {
            transitions.iter().map(|t| t.reward).sum::<f64>() / n as f64
        } else {
            0.0
        };

        let samples = build_samples(&transitions, &self.config)?;
        let mut rng = stream_rng(self.seed, STREAM_UPDATE, self.iteration);
        let stats = ppo_update(
            &mut self.policy,
            &mut self.actor_opt,
            &mut self.critic_opt,
            &samples,
            &self.config,
            &mut rng,
        )
        .map_err(|e| Error::NonFinite(format!("iteration {}: {e}", self.iteration + 1)))?;
        self.iteration += 1;
        Ok(IterationLog {
            iteration: self.iteration,
            episodes,
            transitions: n,
            mean_reward,
            mean_episode_emissions: if episodes > 0 { emissions / episodes as f64 } else { 0.0 },
            fleet_fraction: if reward_steps > 0 {
                fleet_steps as f64 / reward_steps as f64
            } else {
                0.0
            },
            usage,
            stats,
        })
    }
}

/// Where and how often [`train`] writes its artifacts.
#[derive(Debug, Clone, Default)]
pub struct TrainOutput {
    pub dir: Option<PathBuf>,
    pub ckpt_every: Option<u64>,
}

pub const TRAIN_LOG_FILE: &str = "train_log.tsv";
pub const FINAL_CHECKPOINT: &str = "policy.ckpt";
pub const CHECKPOINT_DIR: &str = "checkpoints";

pub fn checkpoint_path(dir: &Path, iteration: u64) -> PathBuf {
    dir.join(CHECKPOINT_DIR).join(format!("iter_{iteration:06}.ckpt"))
}

/// Runs `trainer` until it has completed `iterations` iterations. With an
/// output directory, the log is appended row by row, periodic checkpoints
/// go under `checkpoints/`, and the final one is `policy.ckpt`.
pub fn train(trainer: &mut Trainer, iterations: u64, output: &TrainOutput) -> Result<TrainLog> {
    let mut log = TrainLog::new(trainer.policy.config.pool.ids().to_vec());
    let mut file = match &output.dir {
        Some(dir) => {
            std::fs::create_dir_all(dir.join(CHECKPOINT_DIR)).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(TRAIN_LOG_FILE);
            let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(log.header().as_bytes()).map_err(|e| Error::io(&path, e))?;
            Some((f, path))
        }
        None => None,
    };
    while trainer.iteration < iterations {
        let row = trainer.step()?;
        ::log::info!(
            "iteration {} reward {:.4} transitions {} usage {:?}",
            row.iteration,
            row.mean_reward,
            row.transitions,
            row.usage
        );
        if let Some((f, path)) = &mut file {
            f.write_all(TrainLog::format_row(&row).as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(path.as_path(), e))?;
        }
        if let (Some(dir), Some(every)) = (&output.dir, output.ckpt_every) {
            if every > 0 && trainer.iteration % every == 0 {
                trainer.checkpoint().write(&checkpoint_path(dir, trainer.iteration))?;
            }
        }
        log.rows.push(row);
    }
    if let Some(dir) = &output.dir {
        trainer.checkpoint().write(&dir.join(FINAL_CHECKPOINT))?;
    }
    Ok(log)
}

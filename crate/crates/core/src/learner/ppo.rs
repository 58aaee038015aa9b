use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::net::{adam_step, OptimizerState, Parameters, LOG_STD_MAX, LOG_STD_MIN};
use crate::policy::{head_terms, ActorGradients, Policy, SampledAction};
use crate::sim::OBS_DIM;

/// One training sample: a decision with its advantage and return target.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoSample {
    pub features: [f64; OBS_DIM],
    pub gaussian: f64,
    pub gate_index: usize,
    pub pool: Vec<f64>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub target: f64,
}

/// Loss terms of one minibatch. `total` is what the gradients minimize.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub gaussian_entropy: f64,
    pub categorical_entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    /// Largest `|ratio - 1|` in the batch.
    pub max_ratio_deviation: f64,
}

/// Clipped-surrogate loss with value and entropy terms, and its exact
/// gradient with respect to actor and critic parameters.
///
/// `total = -mean(min(rA, clip(r)A)) + c_v mean((V - R)^2)
///          - c_g H_gauss - c_c mean(H_cat)`
pub fn ppo_loss(
    policy: &Policy,
    batch: &[&PpoSample],
    cfg: &TrainConfig,
) -> Result<(LossParts, ActorGradients, crate::net::Gradients)> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::Shape("empty minibatch".into()));
    }
    let input = Array2::from_shape_fn((n, OBS_DIM), |(i, j)| batch[i].features[j]);
    let (heads, actor_cache) = policy.actor.net.forward_batch(input.view())?;
    let (values, critic_cache) = policy.critic.forward_batch(input.view())?;
    let k = policy.pool_size();
    let log_std = policy.actor.log_std[0];
    let eps = cfg.clip_epsilon;
    let inv_n = 1.0 / n as f64;

    let mut parts = LossParts::default();
    let mut d_heads = Array2::zeros((n, 1 + k));
    let mut d_log_std = 0.0;
    let mut d_values = Array2::zeros((n, 1));
    let mut clipped = 0usize;
    for (i, s) in batch.iter().enumerate() {
        let head = heads.row(i).to_vec();
        let t = head_terms(
            policy.config.gating,
            &head,
            log_std,
            &SampledAction {
                gaussian: s.gaussian,
                gate_index: s.gate_index,
                pool: &s.pool,
            },
        );
        let log_ratio = t.log_prob - s.old_log_prob;
        let ratio = log_ratio.exp();
        let a = s.advantage;
        let unclipped = ratio * a;
        let clipped_obj = ratio.clamp(1.0 - eps, 1.0 + eps) * a;
        // d(-min)/d(log_prob): the unclipped branch carries gradient
        // only where it is the active minimum.
        let d_lp = if unclipped <= clipped_obj { -a * ratio * inv_n } else { 0.0 };
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }
        parts.policy -= unclipped.min(clipped_obj) * inv_n;
        parts.approx_kl += -log_ratio * inv_n;
        parts.max_ratio_deviation = parts.max_ratio_deviation.max((ratio - 1.0).abs());
        parts.categorical_entropy += t.categorical_entropy * inv_n;
        parts.gaussian_entropy = t.gaussian_entropy;

        for j in 0..=k {
            d_heads[[i, j]] = d_lp * t.d_log_prob[j] - cfg.entropy_categorical * inv_n * t.d_cat_entropy[j];
        }
        d_log_std += d_lp * t.d_log_prob_log_std;

        let err = values[[i, 0]] - s.target;
        parts.value += err * err * inv_n;
        d_values[[i, 0]] = 2.0 * cfg.value_coef * err * inv_n;
    }
    // Gaussian entropy is state independent: dH/dlog_std = 1 inside the clamp.
    if (LOG_STD_MIN..=LOG_STD_MAX).contains(&log_std) {
        d_log_std -= cfg.entropy_gaussian;
    }
    parts.clip_fraction = clipped as f64 * inv_n;
    parts.total = parts.policy + cfg.value_coef * parts.value
        - cfg.entropy_gaussian * parts.gaussian_entropy
        - cfg.entropy_categorical * parts.categorical_entropy;
    if !parts.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "PPO loss (policy {}, value {}, kl {})",
            parts.policy, parts.value, parts.approx_kl
        )));
    }
    let actor_grads = ActorGradients {
        net: policy.actor.net.backward(&actor_cache, d_heads.view())?,
        log_std: vec![d_log_std],
    };
    let critic_grads = policy.critic.backward(&critic_cache, d_values.view())?;
    Ok((parts, actor_grads, critic_grads))
}

fn clip_grad_norm<P: Parameters>(g: &mut P, max_norm: Option<f64>) {
    let Some(max) = max_norm else { return };
    let norm = g
        .segments()
        .iter()
        .flat_map(|s| s.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max {
        let scale = max / norm;
        for s in g.segments_mut() {
            for v in s {
                *v *= scale;
            }
        }
    }
}

/// Averages over every minibatch of an update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    /// `max |ratio - 1|` on the first minibatch, before any update.
    pub initial_ratio_deviation: f64,
    pub minibatches: usize,
}

/// Runs `cfg.epochs` passes of shuffled minibatch updates.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut Policy,
    actor_opt: &mut OptimizerState,
    critic_opt: &mut OptimizerState,
    samples: &[PpoSample],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<PpoStats> {
    let mut stats = PpoStats::default();
    if samples.is_empty() {
        return Ok(stats);
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for (mb, chunk) in order.chunks(cfg.minibatch_size).enumerate() {
            let batch: Vec<&PpoSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (parts, mut ga, mut gc) = ppo_loss(policy, &batch, cfg)?;
            if epoch == 0 && mb == 0 {
                stats.initial_ratio_deviation = parts.max_ratio_deviation;
            }
            clip_grad_norm(&mut ga, cfg.max_grad_norm);
            clip_grad_norm(&mut gc, cfg.max_grad_norm);
            adam_step(&mut policy.actor, &ga, actor_opt)?;
            adam_step(&mut policy.critic, &gc, critic_opt)?;
            stats.policy_loss += parts.policy;
            stats.value_loss += parts.value;
            stats.entropy += parts.gaussian_entropy + parts.categorical_entropy;
            stats.clip_fraction += parts.clip_fraction;
            stats.approx_kl += parts.approx_kl;
            stats.minibatches += 1;
        }
    }
    let m = stats.minibatches as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.clip_fraction /= m;
    stats.approx_kl /= m;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nominal::NominalId;
    use crate::policy::{GatingMode, PolicyConfig, PoolConfig};
    use crate::scenario::ContextBounds;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(gating: GatingMode, rng: &mut ChaCha8Rng) -> (Policy, Vec<PpoSample>) {
        let cfg = PolicyConfig {
            pool: PoolConfig::new(vec![NominalId::Glosa, NominalId::Idm, NominalId::Zero]).unwrap(),
            gating,
            hidden: vec![6, 5],
            init_log_std: -0.3,
            decision_interval: 1,
        };
        let mut p = Policy::new(cfg, ContextBounds::default(), rng).unwrap();
        // non-zero head so every gradient path is exercised
        for w in p.actor.net.layers.last_mut().unwrap().weight.iter_mut() {
            *w = rng.gen_range(-0.5..0.5);
        }
        let samples = (0..10)
            .map(|_| PpoSample {
                features: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
                gaussian: rng.gen_range(-1.5..1.5),
                gate_index: rng.gen_range(0..3),
                pool: (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                old_log_prob: rng.gen_range(-3.0..-1.0),
                advantage: rng.gen_range(-1.0..1.0),
                target: rng.gen_range(-2.0..2.0),
            })
            .collect();
        (p, samples)
    }

    #[test]
    fn full_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for gating in [GatingMode::Hard, GatingMode::Soft] {
            let (mut p, samples) = toy(gating, &mut rng);
            // wide clip band keeps the loss smooth around every sample
            let cfg = TrainConfig {
                clip_epsilon: 100.0,
                ..TrainConfig::default()
            };
            let batch: Vec<&PpoSample> = samples.iter().collect();
            let (_, ga, gc) = ppo_loss(&p, &batch, &cfg).unwrap();
            let h = 1e-5;
            let loss = |p: &Policy| ppo_loss(p, &batch, &cfg).unwrap().0.total;
            let analytic = ga.segments().concat();
            let mut k = 0;
            for s in 0..p.actor.segments().len() {
                for i in 0..p.actor.segments()[s].len() {
                    let orig = p.actor.segments()[s][i];
                    p.actor.segments_mut()[s][i] = orig + h;
                    let up = loss(&p);
                    p.actor.segments_mut()[s][i] = orig - h;
                    let dn = loss(&p);
                    p.actor.segments_mut()[s][i] = orig;
                    let fd = (up - dn) / (2.0 * h);
                    let a = analytic[k];
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                    assert!(rel < 1e-4, "{gating:?} actor seg {s} idx {i}: {a} vs {fd}");
                    k += 1;
                }
            }
            let analytic = gc.segments().concat();
            let mut k = 0;
            for s in 0..p.critic.segments().len() {
                for i in 0..p.critic.segments()[s].len() {
                    let orig = p.critic.segments()[s][i];
                    p.critic.segments_mut()[s][i] = orig + h;
                    let up = loss(&p);
                    p.critic.segments_mut()[s][i] = orig - h;
                    let dn = loss(&p);
                    p.critic.segments_mut()[s][i] = orig;
                    let fd = (up - dn) / (2.0 * h);
                    let a = analytic[k];
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                    assert!(rel < 1e-4, "critic seg {s} idx {i}: {a} vs {fd}");
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn inside_clip_band_matches_plain_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (p, mut samples) = toy(GatingMode::Hard, &mut rng);
        let cfg = TrainConfig {
            value_coef: 0.0,
            entropy_gaussian: 0.0,
            entropy_categorical: 0.0,
            ..TrainConfig::default()
        };
        // old log-prob = current one, so every ratio is exactly 1
        for s in samples.iter_mut() {
            let (head, _) = p.actor.net.forward(&s.features).unwrap();
            let a = SampledAction {
                gaussian: s.gaussian,
                gate_index: s.gate_index,
                pool: &s.pool,
            };
            s.old_log_prob = head_terms(GatingMode::Hard, &head, p.actor.log_std[0], &a).log_prob;
            s.advantage = s.advantage.abs() + 0.1;
        }
        let batch: Vec<&PpoSample> = samples.iter().collect();
        let (parts, clipped, _) = ppo_loss(&p, &batch, &cfg).unwrap();
        assert!(parts.max_ratio_deviation < 1e-9);
        let (_, unclipped, _) = ppo_loss(&p, &batch, &TrainConfig { clip_epsilon: 1e9, ..cfg }).unwrap();
        assert_eq!(clipped, unclipped);
    }

    #[test]
    fn zero_advantage_moves_only_through_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (p, mut samples) = toy(GatingMode::Hard, &mut rng);
        let first = samples[0].clone();
        for s in samples.iter_mut() {
            *s = PpoSample { advantage: 0.0, ..first.clone() };
        }
        let batch: Vec<&PpoSample> = samples.iter().collect();
        let no_entropy = TrainConfig {
            entropy_gaussian: 0.0,
            entropy_categorical: 0.0,
            ..TrainConfig::default()
        };
        let (_, ga, _) = ppo_loss(&p, &batch, &no_entropy).unwrap();
        assert!(ga.segments().iter().all(|s| s.iter().all(|&v| v == 0.0)));
        let (_, ga, _) = ppo_loss(&p, &batch, &TrainConfig::default()).unwrap();
        assert!(ga.segments().iter().any(|s| s.iter().any(|&v| v != 0.0)));
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::RewardWeights;

/// PPO and rollout settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Transitions collected per iteration across all workers. Workers run
    /// whole episodes until their share is reached.
    pub steps_per_iteration: usize,
    pub learning_rate: f64,
    pub value_coef: f64,
    pub entropy_gaussian: f64,
    pub entropy_categorical: f64,
    /// Global gradient-norm clip per network; `None` disables it.
    pub max_grad_norm: Option<f64>,
    /// Probability that a step's reward is the fleet mean.
    pub fleet_probability: f64,
    pub reward: RewardWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs: 10,
            minibatch_size: 1024,
            steps_per_iteration: 4096,
            learning_rate: 1e-4,
            value_coef: 0.5,
            entropy_gaussian: 0.001,
            entropy_categorical: 0.01,
            max_grad_norm: Some(0.5),
            fleet_probability: 0.2,
            reward: RewardWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("train.{field}"), msg))
            }
        };
        check(self.gamma > 0.0 && self.gamma <= 1.0, "gamma", "must be in (0, 1]")?;
        check((0.0..=1.0).contains(&self.gae_lambda), "gae_lambda", "must be in [0, 1]")?;
        check(self.clip_epsilon > 0.0, "clip_epsilon", "must be > 0")?;
        check(self.epochs > 0, "epochs", "must be > 0")?;
        check(self.minibatch_size > 0, "minibatch_size", "must be > 0")?;
        check(self.steps_per_iteration > 0, "steps_per_iteration", "must be > 0")?;
        check(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning_rate",
            "must be finite and > 0",
        )?;
        check(self.value_coef >= 0.0, "value_coef", "must be >= 0")?;
        check(self.entropy_gaussian >= 0.0, "entropy_gaussian", "must be >= 0")?;
        check(self.entropy_categorical >= 0.0, "entropy_categorical", "must be >= 0")?;
        check(
            self.max_grad_norm.map_or(true, |n| n > 0.0),
            "max_grad_norm",
            "must be > 0",
        )?;
        check(
            (0.0..=1.0).contains(&self.fleet_probability),
            "fleet_probability",
            "must be in [0, 1]",
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            field: "train config".into(),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.fleet_probability, 0.2);
        assert_eq!(c.reward, RewardWeights::default());
    }

    #[test]
    fn partial_toml_overrides() {
        let c: TrainConfig = toml::from_str("epochs = 3\n[reward]\nemission = 1.0\nstop = 2.0\naccel = 3.0\n").unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.reward.stop, 2.0);
        assert_eq!(c.gamma, 0.99);
        assert!(toml::from_str::<TrainConfig>("bogus = 1").is_err());
    }

    #[test]
    fn rejects_bad_probability() {
        let c = TrainConfig {
            fleet_probability: 1.5,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}

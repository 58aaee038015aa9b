//! Actor-critic over a gated pool of nominal controllers.
//!
//! The actor emits a Gaussian residual and gate logits over the pool; the
//! executed command is `clip(sum_k g_k * pool_k + residual)`.

mod head;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use head::{gaussian_mean, head_terms, HeadTerms, SampledAction};

use crate::error::{Error, Result};
use crate::net::{
    argmax, categorical_sample, gaussian_log_prob, gaussian_sample, log_softmax, softmax, Container,
    Gradients, Mlp, Parameters, DEFAULT_HIDDEN,
};
use crate::nominal::{evaluate_pool, NominalId, POOL_SIZE};
use crate::scenario::{encode_context, ContextBounds};
use crate::sim::{Observation, A_MAX, A_MIN, OBS_DIM};

const SIMPLEX_TOLERANCE: f64 = 1e-9;
pub const POLICY_FORMAT: &str = "ecolane-policy";
pub const POLICY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatingMode {
    /// Sample one controller (argmax at evaluation).
    Hard,
    /// Blend the pool with the softmax weights.
    Soft,
}

impl GatingMode {
    pub fn name(self) -> &'static str {
        match self {
            GatingMode::Hard => "hard",
            GatingMode::Soft => "soft",
        }
    }
}

impl fmt::Display for GatingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GatingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(GatingMode::Hard),
            "soft" => Ok(GatingMode::Soft),
            _ => Err(Error::invalid("gating", format!("expected hard or soft, got `{s}`"))),
        }
    }
}

/// Non-empty subset of the nominal controllers, kept in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<NominalId>", into = "Vec<NominalId>")]
pub struct PoolConfig(Vec<NominalId>);

impl PoolConfig {
    pub fn new(mut ids: Vec<NominalId>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::invalid("pool", "pool must not be empty"));
        }
        ids.sort();
        let n = ids.len();
        ids.dedup();
        if ids.len() != n {
            return Err(Error::invalid("pool", "duplicate controller in pool"));
        }
        Ok(PoolConfig(ids))
    }

    pub fn full() -> Self {
        PoolConfig(NominalId::ALL.to_vec())
    }

    pub fn single(id: NominalId) -> Self {
        PoolConfig(vec![id])
    }

    pub fn ids(&self) -> &[NominalId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Picks this pool's entries out of a full pool evaluation.
    pub fn select(&self, full: &[f64; POOL_SIZE]) -> Vec<f64> {
        self.0.iter().map(|id| full[id.ordinal()]).collect()
    }

    pub fn evaluate(&self, obs: &Observation) -> Vec<f64> {
        self.select(&evaluate_pool(obs))
    }
}

impl TryFrom<Vec<NominalId>> for PoolConfig {
    type Error = Error;

    fn try_from(ids: Vec<NominalId>) -> Result<Self> {
        PoolConfig::new(ids)
    }
}

impl From<PoolConfig> for Vec<NominalId> {
    fn from(p: PoolConfig) -> Self {
        p.0
    }
}

impl fmt::Display for PoolConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|id| id.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for PoolConfig {
    type Err = Error;

    /// `all` or a comma-separated list of controller names.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(PoolConfig::full());
        }
        let ids = s
            .split(',')
            .map(|p| p.trim().parse())
            .collect::<Result<Vec<NominalId>>>()?;
        PoolConfig::new(ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    /// Sample gate and residual.
    Train,
    /// Argmax gate, mean residual.
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub pool: PoolConfig,
    pub gating: GatingMode,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Simulation steps a decision is held for. During training a
    /// transition's reward is the mean of the per-step rewards it covers.
    #[serde(default = "one_step")]
    pub decision_interval: usize,
}

fn one_step() -> usize {
    1
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            pool: PoolConfig::full(),
            gating: GatingMode::Hard,
            hidden: DEFAULT_HIDDEN.to_vec(),
            init_log_std: 0.5f64.ln(),
            decision_interval: 1,
        }
    }
}

/// Actor network plus its state-independent log-std.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub net: Mlp,
    pub log_std: Vec<f64>,
}

impl Parameters for Actor {
    fn segments(&self) -> Vec<&[f64]> {
        let mut s = self.net.segments();
        s.push(&self.log_std);
        s
    }

    fn segments_mut(&mut self) -> Vec<&mut [f64]> {
        let mut s = self.net.segments_mut();
        s.push(&mut self.log_std);
        s
    }

    fn mark_updated(&mut self) {
        self.net.mark_updated();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorGradients {
    pub net: Gradients,
    pub log_std: Vec<f64>,
}

impl Parameters for ActorGradients {
    fn segments(&self) -> Vec<&[f64]> {
        let mut s = self.net.segments();
        s.push(&self.log_std);
        s
    }

    fn segments_mut(&mut self) -> Vec<&mut [f64]> {
        let mut s = self.net.segments_mut();
        s.push(&mut self.log_std);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorOutput {
    pub residual_mean: f64,
    pub residual_log_std: f64,
    pub gate_logits: Vec<f64>,
}

/// One decision of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub gate_index: usize,
    /// One-hot under hard gating, softmax weights under soft gating.
    pub gate: Vec<f64>,
    pub residual: f64,
    /// The Gaussian draw the log-probability refers to.
    pub gaussian: f64,
    pub final_accel: f64,
    pub joint_log_prob: f64,
    pub value: f64,
    pub pool: Vec<f64>,
}

/// `clip(sum_k gate_k * pool_k + residual)`; the clip comes last.
pub fn compose(gate: &[f64], pool: &[f64], residual: f64) -> Result<f64> {
    if gate.len() != pool.len() {
        return Err(Error::Dimension {
            expected: pool.len(),
            got: gate.len(),
        });
    }
    let sum: f64 = gate.iter().sum();
    if gate.iter().any(|&g| !(g >= -SIMPLEX_TOLERANCE)) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::NotOnSimplex(format!("{gate:?}")));
    }
    if !residual.is_finite() {
        return Err(Error::NonFinite(format!("residual {residual}")));
    }
    let blended: f64 = gate.iter().zip(pool).map(|(g, q)| g * q).sum();
    Ok((blended + residual).clamp(A_MIN, A_MAX))
}

pub fn one_hot(k: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[index] = 1.0;
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub config: PolicyConfig,
    pub bounds: ContextBounds,
    pub actor: Actor,
    pub critic: Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyManifest {
    pub format: String,
    pub format_version: u32,
    pub config: PolicyConfig,
    pub bounds: ContextBounds,
    pub obs_dim: usize,
    pub iteration: u64,
}

impl Policy {
    /// Fresh policy. The actor's output layer starts at zero, so the
    /// residual mean is 0 and the gate is uniform.
    pub fn new<R: Rng + ?Sized>(config: PolicyConfig, bounds: ContextBounds, rng: &mut R) -> Result<Self> {
        bounds.validate()?;
        if config.decision_interval == 0 {
            return Err(Error::invalid("decision_interval", "must be > 0"));
        }
        let widths = |out: usize| {
            let mut w = vec![OBS_DIM];
            w.extend(&config.hidden);
            w.push(out);
            w
        };
        let actor = Actor {
            net: Mlp::new(&widths(1 + config.pool.len()), 0.0, rng)?,
            log_std: vec![config.init_log_std],
        };
        let critic = Mlp::new(&widths(1), 1.0, rng)?;
        Ok(Policy {
            config,
            bounds,
            actor,
            critic,
        })
    }

    pub fn pool_size(&self) -> usize {
        self.config.pool.len()
    }

    /// Network input for `obs`, with the context encoded against this
    /// policy's bounds.
    pub fn features(&self, obs: &Observation) -> Result<[f64; OBS_DIM]> {
        let mut f = obs.features();
        let cv = encode_context(&obs.context, &self.bounds)?;
        f[OBS_DIM - cv.len()..].copy_from_slice(&cv);
        Ok(f)
    }

    pub fn actor_forward(&self, features: &[f64]) -> Result<ActorOutput> {
        let (y, _) = self.actor.net.forward(features)?;
        Ok(ActorOutput {
            residual_mean: y[0],
            residual_log_std: self.actor.log_std[0],
            gate_logits: y[1..].to_vec(),
        })
    }

    pub fn critic_forward(&self, features: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(features)?.0[0])
    }

    /// Batched decision for several vehicles. Gate draws precede residual
    /// draws for each row, rows in order.
    pub fn act_batch<R: Rng + ?Sized>(
        &self,
        features: &[[f64; OBS_DIM]],
        pools: &[Vec<f64>],
        rng: &mut R,
        mode: ActMode,
    ) -> Result<Vec<ActionRecord>> {
        if features.len() != pools.len() {
            return Err(Error::Dimension {
                expected: features.len(),
                got: pools.len(),
            });
        }
        if features.is_empty() {
            return Ok(Vec::new());
        }
        let input = Array2::from_shape_fn((features.len(), OBS_DIM), |(i, j)| features[i][j]);
        let (heads, _) = self.actor.net.forward_batch(input.view())?;
        let (values, _) = self.critic.forward_batch(input.view())?;
        let log_std = self.actor.log_std[0];
        let k = self.pool_size();
        let mut out = Vec::with_capacity(features.len());
        for (i, pool) in pools.iter().enumerate() {
            if pool.len() != k {
                return Err(Error::Dimension {
                    expected: k,
                    got: pool.len(),
                });
            }
            let head = heads.row(i).to_vec();
            if head.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("actor output".into()));
            }
            let logits = &head[1..];
            let record = match self.config.gating {
                GatingMode::Hard => {
                    let (gate_index, cat_lp, residual, gauss_lp) = match mode {
                        ActMode::Train => {
                            let (idx, clp) = categorical_sample(logits, rng);
                            let (r, glp) = gaussian_sample(&[head[0]], &[log_std], rng);
                            (idx, clp, r[0], glp)
                        }
                        ActMode::Eval => {
                            let idx = argmax(logits);
                            let glp = gaussian_log_prob(&[head[0]], &[log_std], &[head[0]]);
                            (idx, log_softmax(logits)[idx], head[0], glp)
                        }
                    };
                    let gate = one_hot(k, gate_index);
                    let final_accel = compose(&gate, pool, residual)?;
                    ActionRecord {
                        gate_index,
                        gate,
                        residual,
                        gaussian: residual,
                        final_accel,
                        joint_log_prob: cat_lp + gauss_lp,
                        value: values[[i, 0]],
                        pool: pool.clone(),
                    }
                }
                GatingMode::Soft => {
                    let gate = softmax(logits);
                    let mean = gaussian_mean(GatingMode::Soft, &head, pool);
                    let (x, lp) = match mode {
                        ActMode::Train => {
                            let (x, lp) = gaussian_sample(&[mean], &[log_std], rng);
                            (x[0], lp)
                        }
                        ActMode::Eval => (mean, gaussian_log_prob(&[mean], &[log_std], &[mean])),
                    };
                    let blended: f64 = gate.iter().zip(pool).map(|(g, q)| g * q).sum();
                    let residual = x - blended;
                    let final_accel = compose(&gate, pool, residual)?;
                    ActionRecord {
                        gate_index: argmax(&gate),
                        gate,
                        residual,
                        gaussian: x,
                        final_accel,
                        joint_log_prob: lp,
                        value: values[[i, 0]],
                        pool: pool.clone(),
                    }
                }
            };
            out.push(record);
        }
        Ok(out)
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, rng: &mut R, mode: ActMode) -> Result<ActionRecord> {
        let f = self.features(obs)?;
        let pool = self.config.pool.evaluate(obs);
        Ok(self.act_batch(&[f], &[pool], rng, mode)?.remove(0))
    }

    pub fn manifest(&self, iteration: u64) -> PolicyManifest {
        PolicyManifest {
            format: POLICY_FORMAT.into(),
            format_version: POLICY_FORMAT_VERSION,
            config: self.config.clone(),
            bounds: self.bounds,
            obs_dim: OBS_DIM,
            iteration,
        }
    }

    /// Container holding the manifest and all network parameters.
    pub fn to_container(&self, iteration: u64) -> Container {
        let mut c = Container {
            manifest: serde_json::to_value(self.manifest(iteration)).expect("manifest serializes"),
            ..Container::default()
        };
        crate::net::store_mlp(&mut c, "actor", &self.actor.net);
        crate::net::store_mlp(&mut c, "critic", &self.critic);
        c.blobs.insert("actor.log_std".into(), self.actor.log_std.clone());
        c
    }

    pub fn from_container(c: &Container) -> Result<(Self, PolicyManifest)> {
        let m: PolicyManifest = serde_json::from_value(c.manifest.clone())
            .map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
        if m.format != POLICY_FORMAT || m.format_version != POLICY_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported policy format {} v{}",
                m.format, m.format_version
            )));
        }
        if m.obs_dim != OBS_DIM {
            return Err(Error::CheckpointMismatch(format!(
                "observation size {} (this build uses {OBS_DIM})",
                m.obs_dim
            )));
        }
        let actor_net = crate::net::load_mlp(c, "actor")?;
        let critic = crate::net::load_mlp(c, "critic")?;
        let log_std = c.blob("actor.log_std")?.to_vec();
        if actor_net.input_dim() != OBS_DIM
            || actor_net.output_dim() != 1 + m.config.pool.len()
            || critic.input_dim() != OBS_DIM
            || critic.output_dim() != 1
            || log_std.len() != 1
        {
            return Err(Error::CheckpointMismatch("network shapes disagree with manifest".into()));
        }
        let policy = Policy {
            config: m.config.clone(),
            bounds: m.bounds,
            actor: Actor { net: actor_net, log_std },
            critic,
        };
        Ok((policy, m))
    }

    pub fn load(path: &Path) -> Result<(Self, PolicyManifest)> {
        Self::from_container(&Container::read(path)?)
    }

    /// Fails unless this policy was trained with exactly `pool` and `gating`.
    pub fn check_config(&self, pool: &PoolConfig, gating: GatingMode) -> Result<()> {
        if &self.config.pool != pool || self.config.gating != gating {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint has pool [{}] gating {}, expected pool [{pool}] gating {gating}",
                self.config.pool, self.config.gating
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(pool: PoolConfig, gating: GatingMode) -> Policy {
        let cfg = PolicyConfig {
            pool,
            gating,
            hidden: vec![8, 8],
            ..PolicyConfig::default()
        };
        Policy::new(cfg, ContextBounds::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn compose_examples() {
        assert_eq!(compose(&one_hot(5, 4), &[1.0, 0.1, -0.1, 0.7, 0.0], 0.4).unwrap(), 0.4);
        let c = compose(&one_hot(5, 1), &[1.0, 0.1, -0.1, 0.7, 0.0], -0.05).unwrap();
        assert!((c - 0.05).abs() < 1e-15);
        assert_eq!(compose(&[1.0], &[2.5], 1.0).unwrap(), A_MAX);
        assert_eq!(compose(&[1.0], &[-2.5], -1.0).unwrap(), A_MIN);
    }

    #[test]
    fn compose_rejects_off_simplex() {
        assert!(matches!(compose(&[0.5, 0.6], &[0.0, 0.0], 0.0), Err(Error::NotOnSimplex(_))));
        assert!(matches!(compose(&[1.2, -0.2], &[0.0, 0.0], 0.0), Err(Error::NotOnSimplex(_))));
        assert!(compose(&[1.0], &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn zero_head_init() {
        let p = small(PoolConfig::full(), GatingMode::Hard);
        let out = p.actor_forward(&[0.3; OBS_DIM]).unwrap();
        assert_eq!(out.residual_mean, 0.0);
        assert_eq!(softmax(&out.gate_logits), vec![0.2; 5]);
        let pool = vec![1.25, 0.1, -0.1, 0.5, 0.0];
        let r = p
            .act_batch(&[[0.3; OBS_DIM]], &[pool], &mut ChaCha8Rng::seed_from_u64(0), ActMode::Eval)
            .unwrap();
        assert_eq!(r[0].gate_index, 0);
        assert_eq!(r[0].final_accel, 1.25);
    }

    #[test]
    fn dominant_gate_sampled_almost_always() {
        let mut p = small(PoolConfig::full(), GatingMode::Hard);
        p.actor.net.layers.last_mut().unwrap().bias[1] = 10.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pool = vec![0.0; 5];
        let mut hits = 0;
        for _ in 0..10_000 {
            let r = p.act_batch(&[[0.0; OBS_DIM]], &[pool.clone()], &mut rng, ActMode::Train).unwrap();
            hits += (r[0].gate_index == 0) as usize;
        }
        assert!(hits as f64 / 1e4 > 0.999, "{hits}");
    }

    #[test]
    fn soft_gating_blends_pool() {
        let p = small(PoolConfig::new(vec![NominalId::ConstAcc, NominalId::ConstDec]).unwrap(), GatingMode::Soft);
        let r = p
            .act_batch(&[[0.1; OBS_DIM]], &[vec![0.1, -0.1]], &mut ChaCha8Rng::seed_from_u64(0), ActMode::Eval)
            .unwrap();
        assert_eq!(r[0].gate, vec![0.5, 0.5]);
        assert!(r[0].final_accel.abs() < 1e-15);
    }

    #[test]
    fn pool_parsing_is_canonical() {
        let p: PoolConfig = "zero, glosa".parse().unwrap();
        assert_eq!(p.ids(), &[NominalId::Glosa, NominalId::Zero]);
        assert_eq!(p.to_string(), "glosa,zero");
        assert!("glosa,glosa".parse::<PoolConfig>().is_err());
        assert!("".parse::<PoolConfig>().is_err());
        assert_eq!("all".parse::<PoolConfig>().unwrap(), PoolConfig::full());
    }

    #[test]
    fn checkpoint_round_trip_and_mismatch() {
        let p = small(PoolConfig::single(NominalId::Glosa), GatingMode::Hard);
        let bytes = p.to_container(7).to_bytes();
        let (q, m) = Policy::from_container(&Container::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(m.iteration, 7);
        assert_eq!(q.actor.segments(), p.actor.segments());
        assert_eq!(q.critic.segments(), p.critic.segments());
        assert!(q.check_config(&PoolConfig::single(NominalId::Glosa), GatingMode::Hard).is_ok());
        assert!(matches!(
            q.check_config(&PoolConfig::full(), GatingMode::Hard),
            Err(Error::CheckpointMismatch(_))
        ));
    }
}

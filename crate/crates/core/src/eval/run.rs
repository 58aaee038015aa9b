use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nominal::{glosa_accel, NominalId};
use crate::policy::{ActMode, GatingMode, Policy, PoolConfig};
use crate::scenario::{Context, ContextBounds, ScenarioSpec};
use crate::sim::{init_world, ArrivalRecord, EpisodeMetrics, Trace, World};

/// Evaluated driving strategy for the AVs; humans always follow IDM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// AVs drive like humans: the reference every benefit is measured against.
    IdmBaseline,
    /// Every AV follows GLOSA.
    GlosaAll,
    /// Residual policy on a single nominal controller.
    SingleNominalRrl(NominalId),
    /// Context-conditioned policy without a nominal controller.
    MultitaskScratch,
    /// Residual policy over the gated nominal pool.
    Mrmel,
}

impl Method {
    pub fn needs_checkpoint(self) -> bool {
        matches!(
            self,
            Method::SingleNominalRrl(_) | Method::MultitaskScratch | Method::Mrmel
        )
    }

    /// Pool a checkpoint for this method must have been trained with.
    /// `requested` overrides the full pool for MRMEL.
    pub fn expected_pool(self, requested: Option<&PoolConfig>) -> Option<PoolConfig> {
        match self {
            Method::IdmBaseline | Method::GlosaAll => None,
            Method::SingleNominalRrl(id) => Some(PoolConfig::single(id)),
            Method::MultitaskScratch => Some(PoolConfig::single(NominalId::Zero)),
            Method::Mrmel => Some(requested.cloned().unwrap_or_else(PoolConfig::full)),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::IdmBaseline => f.write_str("idm_baseline"),
            Method::GlosaAll => f.write_str("glosa_all"),
            Method::SingleNominalRrl(id) => write!(f, "rrl:{id}"),
            Method::MultitaskScratch => f.write_str("multitask_scratch"),
            Method::Mrmel => f.write_str("mrmel"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `idm_baseline`, `glosa_all`, `rrl:<nominal>`, `multitask_scratch`
    /// or `mrmel`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idm_baseline" => Ok(Method::IdmBaseline),
            "glosa_all" => Ok(Method::GlosaAll),
            "multitask_scratch" => Ok(Method::MultitaskScratch),
            "mrmel" => Ok(Method::Mrmel),
            _ => match s.strip_prefix("rrl:") {
                Some(id) => Ok(Method::SingleNominalRrl(id.parse()?)),
                None => Err(Error::invalid(
                    "method",
                    format!(
                        "unknown method `{s}` (expected idm_baseline, glosa_all, rrl:<nominal>, multitask_scratch or mrmel)"
                    ),
                )),
            },
        }
    }
}

/// What drives the AVs during an evaluation episode.
#[derive(Debug, Clone)]
pub enum Controller {
    Idm,
    Glosa,
    Policy(Box<Policy>),
}

impl Controller {
    /// Builds the controller for `method`, loading and checking the
    /// checkpoint when one is needed. Returns the checkpoint's SHA-256.
    pub fn for_method(
        method: Method,
        checkpoint: Option<&Path>,
        pool: Option<&PoolConfig>,
        gating: GatingMode,
    ) -> Result<(Controller, Option<String>)> {
        if !method.needs_checkpoint() {
            return Ok((
                match method {
                    Method::GlosaAll => Controller::Glosa,
                    _ => Controller::Idm,
                },
                None,
            ));
        }
        let path = checkpoint.ok_or_else(|| Error::MissingFlag("--ckpt".into()))?;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let (policy, _) = Policy::from_container(&crate::net::Container::from_bytes(&bytes)?)?;
        let expected = method.expected_pool(pool).expect("checkpoint methods have a pool");
        policy.check_config(&expected, gating)?;
        Ok((Controller::Policy(Box::new(policy)), Some(hex::encode(Sha256::digest(&bytes)))))
    }
}

/// Result of one controlled episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub metrics: EpisodeMetrics,
    pub arrivals: Vec<ArrivalRecord>,
    /// Gate choices per pool entry (policy controllers only).
    pub gate_counts: Vec<u64>,
}

/// Digest of an arrival log; equal digests mean identical demand.
pub fn arrivals_digest(arrivals: &[ArrivalRecord]) -> String {
    let mut h = Sha256::new();
    for a in arrivals {
        h.update(a.id.to_le_bytes());
        h.update(a.time.to_bits().to_le_bytes());
        h.update(a.class.as_str().as_bytes());
    }
    hex::encode(h.finalize())
}

fn commands(world: &World, controller: &Controller, held: &mut BTreeMap<u64, (f64, usize)>, counts: &mut [u64]) -> Result<BTreeMap<u64, f64>> {
    match controller {
        Controller::Idm => Ok(BTreeMap::new()),
        Controller::Glosa => Ok(world
            .vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.class == crate::scenario::VehicleClass::Av)
            .map(|(i, v)| (v.id, glosa_accel(&world.observe_index(i))))
            .collect()),
        Controller::Policy(policy) => {
            let interval = policy.config.decision_interval;
            held.retain(|id, _| world.index_of(*id).is_some());
            let mut due = Vec::new();
            let mut features = Vec::new();
            let mut pools = Vec::new();
            for (i, v) in world.vehicles.iter().enumerate() {
                if v.class != crate::scenario::VehicleClass::Av {
                    continue;
                }
                if held.get(&v.id).map_or(true, |&(_, age)| age >= interval) {
                    let obs = world.observe_index(i);
                    features.push(policy.features(&obs)?);
                    pools.push(policy.config.pool.evaluate(&obs));
                    due.push(v.id);
                }
            }
            if !due.is_empty() {
                // evaluation mode draws nothing from the generator
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let actions = policy.act_batch(&features, &pools, &mut rng, ActMode::Eval)?;
                for (id, a) in due.into_iter().zip(actions) {
                    counts[a.gate_index] += 1;
                    held.insert(id, (a.final_accel, 0));
                }
            }
            Ok(held
                .iter_mut()
                .map(|(&id, (cmd, age))| {
                    *age += 1;
                    (id, *cmd)
                })
                .collect())
        }
    }
}

/// Simulates `spec` to its horizon with the AVs under `controller`.
pub fn run_episode(
    spec: &ScenarioSpec,
    bounds: &ContextBounds,
    controller: &Controller,
    mut trace: Option<&mut Trace>,
) -> Result<EpisodeOutcome> {
    let mut world = init_world(spec, bounds)?;
    let k = match controller {
        Controller::Policy(p) => p.pool_size(),
        _ => 0,
    };
    let mut counts = vec![0u64; k];
    let mut held = BTreeMap::new();
    while !world.is_done() {
        world.spawn_arrivals();
        let cmds = commands(&world, controller, &mut held, &mut counts)?;
        if let Some(t) = trace.as_deref_mut() {
            t.record_signal(&world);
        }
        let report = world.step(&cmds)?;
        if let Some(t) = trace.as_deref_mut() {
            t.record_vehicles(&world, &report);
        }
    }
    Ok(EpisodeOutcome {
        metrics: world.collect_metrics(),
        arrivals: world.arrivals.clone(),
        gate_counts: counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Seeds per scenario: the scenario's own seed and the following ones.
    pub seeds_per_scenario: usize,
    /// Parallelism only; results do not depend on it.
    #[serde(skip, default = "one_worker")]
    pub workers: usize,
    pub penetration_override: Option<f64>,
}

fn one_worker() -> usize {
    1
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            seeds_per_scenario: 1,
            workers: 1,
            penetration_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub total_emissions: f64,
    pub mean_travel_time: f64,
    pub throughput: f64,
    pub stop_count: u64,
    pub exited: usize,
    pub vehicles: usize,
    pub arrivals_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub index: usize,
    pub context: Context,
    pub horizon: f64,
    pub dt: f64,
    pub runs: Vec<RunSummary>,
    /// Sum over seeds, g.
    pub total_emissions: f64,
    /// Mean over seeds, vehicles per hour.
    pub throughput: f64,
    pub stop_count: u64,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub method: Method,
    pub checkpoint_sha256: Option<String>,
    pub options: EvalOptions,
    /// Digest of contexts, horizons and seeds: equal for paired reports.
    pub scenario_digest: String,
    /// Scenario digest plus method and checkpoint.
    pub config_digest: String,
    pub scenarios: Vec<ScenarioResult>,
    /// Fraction of decisions per pool entry, for policy methods.
    pub gate_usage: Option<BTreeMap<String, f64>>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport =
            serde_json::from_str(text).map_err(|e| Error::invalid("report", e.to_string()))?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::invalid(
                "report.schema_version",
                format!("expected {REPORT_SCHEMA_VERSION}, got {}", r.schema_version),
            ));
        }
        Ok(r)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn mean_emissions(&self) -> f64 {
        let n = self.scenarios.len().max(1) as f64;
        self.scenarios.iter().map(|s| s.total_emissions).sum::<f64>() / n
    }
}

/// The specs actually simulated for scenario `spec`: one per seed, with
/// the penetration override applied.
pub fn expand_seeds(spec: &ScenarioSpec, opts: &EvalOptions) -> Vec<ScenarioSpec> {
    (0..opts.seeds_per_scenario as u64)
        .map(|j| {
            let mut s = spec.clone();
            s.seed = spec.seed.wrapping_add(j);
            if let Some(p) = opts.penetration_override {
                s.context.av_penetration = p;
            }
            s
        })
        .collect()
}

fn scenario_digest(scenarios: &[ScenarioSpec], opts: &EvalOptions) -> String {
    let mut h = Sha256::new();
    for s in scenarios {
        for e in expand_seeds(s, opts) {
            h.update(serde_json::to_vec(&e).expect("spec serializes"));
        }
    }
    hex::encode(h.finalize())
}

fn evaluate_one(
    index: usize,
    spec: &ScenarioSpec,
    bounds: &ContextBounds,
    controller: &Controller,
    opts: &EvalOptions,
    counts: &mut [u64],
) -> Result<ScenarioResult> {
    let mut runs = Vec::new();
    for s in expand_seeds(spec, opts) {
        let out = run_episode(&s, bounds, controller, None)?;
        for (c, n) in counts.iter_mut().zip(&out.gate_counts) {
            *c += n;
        }
        let m = &out.metrics;
        runs.push(RunSummary {
            seed: s.seed,
            total_emissions: m.total_emissions,
            mean_travel_time: m.mean_travel_time,
            throughput: m.throughput,
            stop_count: m.stop_count,
            exited: m.exited,
            vehicles: m.vehicles.len(),
            arrivals_digest: arrivals_digest(&out.arrivals),
        });
    }
    let n = runs.len().max(1) as f64;
    let mut context = spec.context;
    if let Some(p) = opts.penetration_override {
        context.av_penetration = p;
    }
    Ok(ScenarioResult {
        index,
        context,
        horizon: spec.horizon,
        dt: spec.dt,
        total_emissions: runs.iter().map(|r| r.total_emissions).sum(),
        throughput: runs.iter().map(|r| r.throughput).sum::<f64>() / n,
        stop_count: runs.iter().map(|r| r.stop_count).sum(),
        runs,
    })
}

/// Evaluates `method` on every scenario and seed. Scenarios are spread
/// over `opts.workers` threads; the report is ordered by scenario index.
pub fn run_method(
    scenarios: &[ScenarioSpec],
    bounds: &ContextBounds,
    method: Method,
    controller: &Controller,
    checkpoint_sha256: Option<String>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if opts.seeds_per_scenario == 0 {
        return Err(Error::invalid("seeds", "need at least one seed per scenario"));
    }
    if let Some(p) = opts.penetration_override {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("penetration_override", "must be in [0, 1]"));
        }
    }
    let k = match controller {
        Controller::Policy(p) => p.pool_size(),
        _ => 0,
    };
    let workers = opts.workers.max(1).min(scenarios.len().max(1));
    let mut slots: Vec<Option<Result<ScenarioResult>>> = (0..scenarios.len()).map(|_| None).collect();
    let mut counts = vec![0u64; k];
    if workers == 1 {
        for (i, s) in scenarios.iter().enumerate() {
            slots[i] = Some(evaluate_one(i, s, bounds, controller, opts, &mut counts));
        }
    } else {
        let per_worker: Vec<(Vec<(usize, Result<ScenarioResult>)>, Vec<u64>)> = std::thread::scope(|sc| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    sc.spawn(move || {
                        let mut c = vec![0u64; k];
                        let out: Vec<_> = (w..scenarios.len())
                            .step_by(workers)
                            .map(|i| (i, evaluate_one(i, &scenarios[i], bounds, controller, opts, &mut c)))
                            .collect();
                        (out, c)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation worker panicked"))
                .collect()
        });
        for (out, c) in per_worker {
            for (i, r) in out {
                slots[i] = Some(r);
            }
            for (a, b) in counts.iter_mut().zip(c) {
                *a += b;
            }
        }
    }
    let results = slots
        .into_iter()
        .map(|s| s.expect("every scenario evaluated"))
        .collect::<Result<Vec<_>>>()?;

    let gate_usage = match controller {
        Controller::Policy(p) => {
            let total: u64 = counts.iter().sum();
            Some(
                p.config
                    .pool
                    .ids()
                    .iter()
                    .zip(&counts)
                    .map(|(id, &c)| (id.name().to_string(), if total > 0 { c as f64 / total as f64 } else { 0.0 }))
                    .collect(),
            )
        }
        _ => None,
    };
    let sdigest = scenario_digest(scenarios, opts);
    let mut h = Sha256::new();
    h.update(sdigest.as_bytes());
    h.update(method.to_string().as_bytes());
    h.update(checkpoint_sha256.as_deref().unwrap_or("-").as_bytes());
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        method,
        checkpoint_sha256,
        options: opts.clone(),
        scenario_digest: sdigest,
        config_digest: hex::encode(h.finalize()),
        scenarios: results,
        gate_usage,
    })
}

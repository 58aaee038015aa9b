//! Context distributions: a weighted mixture of product distributions.
//!
//! Each component draws every field independently, which is enough to
//! express coupled choices (e.g. a small set of signal plans) by listing
//! one component per coupled value.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::context::{Context, EngineType, VehicleType};
use super::encode::ContextBounds;
use crate::error::{Error, Result};

/// Distribution of one numeric field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum FieldDist {
    Fixed(f64),
    Uniform {
        uniform: [f64; 2],
    },
    Choice {
        choice: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

/// Distribution of one categorical field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CategoryDist<T> {
    Fixed(T),
    Choice {
        choice: Vec<T>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

fn weighted(field: &str, n: usize, weights: &Option<Vec<f64>>) -> Result<Option<WeightedIndex<f64>>> {
    if n == 0 {
        return Err(Error::invalid(field, "choice list is empty"));
    }
    match weights {
        None => Ok(None),
        Some(w) => {
            if w.len() != n {
                return Err(Error::invalid(
                    field,
                    format!("{} weights for {} choices", w.len(), n),
                ));
            }
            WeightedIndex::new(w.iter().copied())
                .map(Some)
                .map_err(|e| Error::invalid(field, format!("bad weights: {e}")))
        }
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, n: usize, w: Option<&WeightedIndex<f64>>) -> usize {
    match w {
        Some(w) => w.sample(rng),
        None => rng.gen_range(0..n),
    }
}

impl FieldDist {
    pub fn validate(&self, field: &str) -> Result<()> {
        match self {
            FieldDist::Fixed(v) if !v.is_finite() => {
                Err(Error::invalid(field, "fixed value must be finite"))
            }
            FieldDist::Fixed(_) => Ok(()),
            FieldDist::Uniform { uniform: [lo, hi] } => {
                if lo.is_finite() && hi.is_finite() && lo <= hi {
                    Ok(())
                } else {
                    Err(Error::invalid(field, format!("bad uniform range [{lo}, {hi}]")))
                }
            }
            FieldDist::Choice { choice, weights } => {
                if choice.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(field, "choices must be finite"));
                }
                weighted(field, choice.len(), weights).map(|_| ())
            }
        }
    }

    /// Closed support hull.
    pub fn support(&self) -> (f64, f64) {
        match self {
            FieldDist::Fixed(v) => (*v, *v),
            FieldDist::Uniform { uniform: [lo, hi] } => (*lo, *hi),
            FieldDist::Choice { choice, .. } => choice
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FieldDist::Fixed(v) => *v,
            FieldDist::Uniform { uniform: [lo, hi] } => {
                if lo == hi {
                    *lo
                } else {
                    rng.gen_range(*lo..=*hi)
                }
            }
            FieldDist::Choice { choice, weights } => {
                let w = weights
                    .as_ref()
                    .map(|w| WeightedIndex::new(w.iter().copied()).expect("validated weights"));
                choice[pick(rng, choice.len(), w.as_ref())]
            }
        }
    }
}

impl<T: Copy> CategoryDist<T> {
    pub fn validate(&self, field: &str) -> Result<()> {
        match self {
            CategoryDist::Fixed(_) => Ok(()),
            CategoryDist::Choice { choice, weights } => {
                weighted(field, choice.len(), weights).map(|_| ())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            CategoryDist::Fixed(v) => *v,
            CategoryDist::Choice { choice, weights } => {
                let w = weights
                    .as_ref()
                    .map(|w| WeightedIndex::new(w.iter().copied()).expect("validated weights"));
                choice[pick(rng, choice.len(), w.as_ref())]
            }
        }
    }
}

/// One product component of the mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextComponent {
    #[serde(default = "one")]
    pub weight: f64,
    pub green_duration: FieldDist,
    pub red_duration: FieldDist,
    pub signal_offset: FieldDist,
    pub speed_limit: FieldDist,
    pub lane_length: FieldDist,
    pub road_grade: FieldDist,
    pub vehicle_type: CategoryDist<VehicleType>,
    pub engine_type: CategoryDist<EngineType>,
    pub vehicle_age: FieldDist,
    pub arrival_rate: FieldDist,
    pub av_penetration: FieldDist,
}

fn one() -> f64 {
    1.0
}

impl ContextComponent {
    /// Component that always yields `c`.
    pub fn point(c: &Context) -> Self {
        ContextComponent {
            weight: 1.0,
            green_duration: FieldDist::Fixed(c.green_duration),
            red_duration: FieldDist::Fixed(c.red_duration),
            signal_offset: FieldDist::Fixed(c.signal_offset),
            speed_limit: FieldDist::Fixed(c.speed_limit),
            lane_length: FieldDist::Fixed(c.lane_length),
            road_grade: FieldDist::Fixed(c.road_grade),
            vehicle_type: CategoryDist::Fixed(c.vehicle_type),
            engine_type: CategoryDist::Fixed(c.engine_type),
            vehicle_age: FieldDist::Fixed(c.vehicle_age),
            arrival_rate: FieldDist::Fixed(c.arrival_rate),
            av_penetration: FieldDist::Fixed(c.av_penetration),
        }
    }

    fn numeric(&self) -> [(&'static str, &FieldDist); 9] {
        [
            ("green_duration", &self.green_duration),
            ("red_duration", &self.red_duration),
            ("signal_offset", &self.signal_offset),
            ("speed_limit", &self.speed_limit),
            ("lane_length", &self.lane_length),
            ("road_grade", &self.road_grade),
            ("vehicle_age", &self.vehicle_age),
            ("arrival_rate", &self.arrival_rate),
            ("av_penetration", &self.av_penetration),
        ]
    }

    fn validate(&self, bounds: &ContextBounds) -> Result<()> {
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(Error::invalid("weight", "component weight must be > 0"));
        }
        for ((name, d), (_, r)) in self.numeric().into_iter().zip(bounds.ranges()) {
            d.validate(name)?;
            let (lo, hi) = d.support();
            if !(r.contains(lo) && r.contains(hi)) {
                return Err(Error::invalid(
                    name,
                    format!("support [{lo}, {hi}] exceeds bounds [{}, {}]", r.min, r.max),
                ));
            }
        }
        self.vehicle_type.validate("vehicle_type")?;
        self.engine_type.validate("engine_type")?;

        // Every context in the support hull must be valid. Most invariants
        // are per-field, so checking the hull corners field by field works;
        // the offset/cycle coupling is checked on the worst case.
        let (g_lo, _) = self.green_duration.support();
        let (r_lo, _) = self.red_duration.support();
        let (_, off_hi) = self.signal_offset.support();
        if off_hi >= g_lo + r_lo {
            return Err(Error::invalid(
                "signal_offset",
                format!("maximum offset {off_hi} is not below the minimum cycle {}", g_lo + r_lo),
            ));
        }
        let corner = |pick_hi: bool| -> Context {
            let s = |d: &FieldDist| {
                let (lo, hi) = d.support();
                if pick_hi {
                    hi
                } else {
                    lo
                }
            };
            Context {
                green_duration: s(&self.green_duration),
                red_duration: s(&self.red_duration),
                signal_offset: 0.0,
                speed_limit: s(&self.speed_limit),
                lane_length: s(&self.lane_length),
                road_grade: s(&self.road_grade),
                vehicle_type: VehicleType::Sedan,
                engine_type: EngineType::Ice,
                vehicle_age: s(&self.vehicle_age),
                arrival_rate: s(&self.arrival_rate),
                av_penetration: s(&self.av_penetration),
            }
        };
        corner(false).validate()?;
        corner(true).validate()?;
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Context {
        Context {
            green_duration: self.green_duration.sample(rng),
            red_duration: self.red_duration.sample(rng),
            signal_offset: self.signal_offset.sample(rng),
            speed_limit: self.speed_limit.sample(rng),
            lane_length: self.lane_length.sample(rng),
            road_grade: self.road_grade.sample(rng),
            vehicle_type: self.vehicle_type.sample(rng),
            engine_type: self.engine_type.sample(rng),
            vehicle_age: self.vehicle_age.sample(rng),
            arrival_rate: self.arrival_rate.sample(rng),
            av_penetration: self.av_penetration.sample(rng),
        }
    }
}

/// Scenario distribution used for training: contexts plus episode framing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextDistribution {
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub bounds: ContextBounds,
    #[serde(rename = "component")]
    pub components: Vec<ContextComponent>,
}

impl ContextDistribution {
    pub fn point(c: &Context, horizon: f64, dt: f64) -> Self {
        ContextDistribution {
            horizon,
            dt,
            bounds: ContextBounds::default(),
            components: vec![ContextComponent::point(c)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("component", "distribution has no components"));
        }
        self.bounds.validate()?;
        for (i, comp) in self.components.iter().enumerate() {
            comp.validate(&self.bounds).map_err(|e| match e {
                Error::Invalid { field, message } => Error::Invalid {
                    field: format!("component[{i}].{field}"),
                    message,
                },
                other => other,
            })?;
        }
        super::ScenarioSpec::new(Context::default(), 0, self.horizon, self.dt).validate()
    }
}

/// Draws one context. Draw order: component, then fields in declaration
/// order, so a fixed seed reproduces the same context bit for bit.
pub fn sample_context<R: Rng + ?Sized>(dist: &ContextDistribution, rng: &mut R) -> Result<Context> {
    if dist.components.is_empty() {
        return Err(Error::invalid("component", "distribution has no components"));
    }
    let idx = if dist.components.len() == 1 {
        0
    } else {
        let w = WeightedIndex::new(dist.components.iter().map(|c| c.weight))
            .map_err(|e| Error::invalid("weight", e.to_string()))?;
        w.sample(rng)
    };
    let c = dist.components[idx].sample(rng);
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass_returns_the_point() {
        let c = Context {
            lane_length: 250.0,
            arrival_rate: 0.3,
            ..Context::default()
        };
        let d = ContextDistribution::point(&c, 100.0, 0.1);
        d.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_context(&d, &mut rng).unwrap(), c);
    }

    #[test]
    fn offset_beyond_cycle_rejected() {
        let mut d = ContextDistribution::point(&Context::default(), 100.0, 0.1);
        d.components[0].signal_offset = FieldDist::Uniform {
            uniform: [0.0, 60.0],
        };
        let err = d.validate().unwrap_err();
        assert!(err.to_string().contains("signal_offset"), "{err}");
    }

    #[test]
    fn support_outside_bounds_rejected() {
        let mut d = ContextDistribution::point(&Context::default(), 100.0, 0.1);
        d.components[0].lane_length = FieldDist::Choice {
            choice: vec![200.0, 4000.0],
            weights: None,
        };
        assert!(d.validate().unwrap_err().to_string().contains("lane_length"));
    }
}

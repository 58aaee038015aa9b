//! The pool of nominal controllers. Each maps an [`Observation`] to a
//! longitudinal acceleration; all are stateless.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Observation, SignalPhase, A_MAX, A_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NominalId {
    Glosa,
    ConstAcc,
    ConstDec,
    Idm,
    Zero,
}

pub const POOL_SIZE: usize = 5;

impl NominalId {
    /// Canonical pool order; the gating head indexes into it.
    pub const ALL: [NominalId; POOL_SIZE] = [
        NominalId::Glosa,
        NominalId::ConstAcc,
        NominalId::ConstDec,
        NominalId::Idm,
        NominalId::Zero,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            NominalId::Glosa => "glosa",
            NominalId::ConstAcc => "const_acc",
            NominalId::ConstDec => "const_dec",
            NominalId::Idm => "idm",
            NominalId::Zero => "zero",
        }
    }
}

impl fmt::Display for NominalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NominalId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NominalId::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| Error::invalid("nominal", format!("unknown nominal controller `{s}`")))
    }
}

/// Intelligent Driver Model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Desired speed, m/s.
    pub desired_speed: f64,
    /// Time headway T, s.
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    /// Jam gap s0, m.
    pub jam_gap: f64,
    pub delta: f64,
}

/// Strongest braking the IDM law is allowed to request.
pub const IDM_MIN_ACCEL: f64 = -9.0;
const MIN_GAP: f64 = 0.1;

impl IdmParams {
    /// Parameters used by the nominal pool.
    pub fn nominal(speed_limit: f64) -> Self {
        IdmParams {
            desired_speed: speed_limit,
            time_headway: 1.0,
            max_accel: 1.5,
            comfortable_decel: 2.0,
            jam_gap: 2.0,
            delta: 4.0,
        }
    }

    /// Parameters of simulated human drivers before per-driver noise.
    pub fn human(speed_limit: f64) -> Self {
        IdmParams {
            time_headway: 1.2,
            ..IdmParams::nominal(speed_limit)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("desired_speed", self.desired_speed),
            ("time_headway", self.time_headway),
            ("max_accel", self.max_accel),
            ("comfortable_decel", self.comfortable_decel),
            ("jam_gap", self.jam_gap),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be > 0"));
            }
        }
        if !(self.delta >= 1.0) {
            return Err(Error::invalid("delta", "must be >= 1"));
        }
        Ok(())
    }

    /// Desired dynamic gap s* at speed `v` closing at `dv` on the leader.
    pub fn desired_gap(&self, v: f64, dv: f64) -> f64 {
        let dynamic =
            v * self.time_headway + v * dv / (2.0 * (self.max_accel * self.comfortable_decel).sqrt());
        self.jam_gap + dynamic.max(0.0)
    }
}

/// IDM law. `leader` is `(gap, leader_speed)`; `None` means free road.
pub fn idm_law(v: f64, leader: Option<(f64, f64)>, p: &IdmParams) -> f64 {
    let free = 1.0 - (v / p.desired_speed).powf(p.delta);
    let interaction = match leader {
        Some((gap, leader_speed)) => {
            let s_star = p.desired_gap(v, v - leader_speed);
            let r = s_star / gap.max(MIN_GAP);
            r * r
        }
        None => 0.0,
    };
    (p.max_accel * (free - interaction)).max(IDM_MIN_ACCEL)
}

/// IDM applied to an observation. Without a leader the stop line acts as
/// a standing virtual leader during red.
pub fn idm_accel(obs: &Observation, p: &IdmParams) -> f64 {
    let leader = if obs.leader.present {
        Some((obs.leader.gap, obs.leader.speed))
    } else if obs.signal_phase == SignalPhase::Red {
        Some((obs.ego_distance_to_signal, 0.0))
    } else {
        None
    };
    idm_law(obs.ego_speed, leader, p)
}

/// GLOSA never plans a crossing slower than this; it glides or holds instead.
pub const GLIDE_MIN_SPEED: f64 = 2.0;
/// Horizon over which GLOSA closes the gap to its target speed.
pub const GLOSA_SMOOTHING: f64 = 5.0;
const AT_LINE: f64 = 0.5;

/// Green-light optimal speed advisory.
///
/// Scans upcoming green windows in order. For the first window that the
/// stop line can be reached in at a constant speed in
/// `[GLIDE_MIN_SPEED, speed_limit]`, the fastest such speed becomes the
/// target and the output moves toward it over `GLOSA_SMOOTHING` seconds.
/// If the first reachable window would need a crawl, it returns the
/// constant deceleration that arrives at the line when that window opens.
/// Surrounding vehicles are ignored.
pub fn glosa_accel(obs: &Observation) -> f64 {
    let c = &obs.context;
    let d = obs.ego_distance_to_signal;
    let v = obs.ego_speed;
    let limit = c.speed_limit;
    let (green, red) = (c.green_duration, c.red_duration);
    let ttc = obs.time_to_change;

    if obs.signal_phase == SignalPhase::Red && d <= AT_LINE {
        return A_MIN;
    }

    let first_start = match obs.signal_phase {
        SignalPhase::Green => -(green - ttc),
        SignalPhase::Red => ttc,
    };
    let first_end = match obs.signal_phase {
        SignalPhase::Green => ttc,
        SignalPhase::Red => ttc + green,
    };
    let cycle = green + red;

    let mut glide_to = None;
    for k in 0..3 {
        let start = (first_start + k as f64 * cycle).max(0.0);
        let end = first_end + k as f64 * cycle;
        let fastest = if start <= 0.0 { limit } else { limit.min(d / start) };
        if fastest < GLIDE_MIN_SPEED {
            glide_to = Some(start);
            break;
        }
        if d / fastest < end {
            return ((fastest - v) / GLOSA_SMOOTHING).clamp(A_MIN, A_MAX);
        }
    }
    match glide_to {
        Some(t) if t > 0.0 => (2.0 * (d - v * t) / (t * t)).clamp(A_MIN, A_MAX),
        _ => A_MIN,
    }
}

pub const CONST_ACCEL: f64 = 0.1;
pub const CONST_DECEL: f64 = -0.1;

pub fn const_acc(_obs: &Observation) -> f64 {
    CONST_ACCEL
}

pub fn const_dec(_obs: &Observation) -> f64 {
    CONST_DECEL
}

pub fn zero_action(_obs: &Observation) -> f64 {
    0.0
}

pub fn nominal_accel(id: NominalId, obs: &Observation) -> f64 {
    match id {
        NominalId::Glosa => glosa_accel(obs),
        NominalId::ConstAcc => const_acc(obs),
        NominalId::ConstDec => const_dec(obs),
        NominalId::Idm => idm_accel(obs, &IdmParams::nominal(obs.context.speed_limit)),
        NominalId::Zero => zero_action(obs),
    }
}

/// All five controllers applied to `obs`, indexed by [`NominalId::ordinal`].
pub fn evaluate_pool(obs: &Observation) -> [f64; POOL_SIZE] {
    NominalId::ALL.map(|id| nominal_accel(id, obs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{encode_context, Context, ContextBounds};
    use crate::sim::NeighborSlot;

    fn obs(v: f64, d: f64, phase: SignalPhase, ttc: f64) -> Observation {
        let c = Context {
            speed_limit: 15.0,
            green_duration: 30.0,
            red_duration: 30.0,
            lane_length: 300.0,
            ..Context::default()
        };
        Observation {
            ego_speed: v,
            ego_distance_to_signal: d,
            leader: NeighborSlot::absent(c.lane_length),
            follower: NeighborSlot::absent(c.lane_length),
            adjacent: [NeighborSlot::absent(c.lane_length); 4],
            signal_phase: phase,
            time_to_change: ttc,
            context: c,
            context_vector: encode_context(&c, &ContextBounds::default()).unwrap(),
        }
    }

    #[test]
    fn idm_free_flow_equilibrium() {
        let o = obs(15.0, 200.0, SignalPhase::Green, 20.0);
        assert_eq!(idm_accel(&o, &IdmParams::nominal(15.0)), 0.0);
    }

    #[test]
    fn idm_standstill_free_road_is_max_accel() {
        let o = obs(0.0, 200.0, SignalPhase::Green, 20.0);
        assert_eq!(idm_accel(&o, &IdmParams::nominal(15.0)), 1.5);
    }

    #[test]
    fn idm_equilibrium_gap() {
        // s_eq = (s0 + vT) / sqrt(1 - (v/v0)^4) with v0 = 15, T = 1, v = 10.
        let p = IdmParams::nominal(15.0);
        let s_eq = 12.0 / (1.0 - (10.0f64 / 15.0).powi(4)).sqrt();
        assert!((s_eq - 13.40).abs() < 0.005, "{s_eq}");
        let a = idm_law(10.0, Some((s_eq, 10.0)), &p);
        assert!(a.abs() < 1e-12, "{a}");
    }

    #[test]
    fn idm_red_signal_is_virtual_leader() {
        let o = obs(10.0, 20.0, SignalPhase::Red, 20.0);
        let a = idm_accel(&o, &IdmParams::nominal(15.0));
        let expected = idm_law(10.0, Some((20.0, 0.0)), &IdmParams::nominal(15.0));
        assert_eq!(a, expected);
        assert!(a < 0.0);
    }

    #[test]
    fn glosa_unobstructed_green_accelerates() {
        let o = obs(10.0, 100.0, SignalPhase::Green, 20.0);
        let a = glosa_accel(&o);
        assert_eq!(a, (15.0 - 10.0) / 5.0);
    }

    #[test]
    fn glosa_red_glide_target() {
        // Red for 10 s more, 100 m away at 15 m/s: target 100 / 10 = 10 m/s.
        let o = obs(15.0, 100.0, SignalPhase::Red, 10.0);
        assert_eq!(glosa_accel(&o), -1.0);
    }

    #[test]
    fn glosa_holds_at_line_on_red() {
        let o = obs(0.0, 0.0, SignalPhase::Red, 10.0);
        assert_eq!(glosa_accel(&o), A_MIN);
    }

    #[test]
    fn glosa_green_too_far_plans_next_window() {
        // 300 m at limit 15 takes 20 s, green ends in 5 s; next green opens
        // in 35 s, so target = 300 / 35.
        let o = obs(15.0, 300.0, SignalPhase::Green, 5.0);
        let expected = (300.0 / 35.0 - 15.0) / 5.0;
        assert!((glosa_accel(&o) - expected).abs() < 1e-12);
    }

    #[test]
    fn glosa_crawl_becomes_glide() {
        // 10 m with 20 s of red: 0.5 m/s would be a crawl, so glide to t = 20.
        let o = obs(5.0, 10.0, SignalPhase::Red, 20.0);
        let expected = 2.0 * (10.0 - 5.0 * 20.0) / 400.0;
        assert!((glosa_accel(&o) - expected).abs() < 1e-12);
    }

    #[test]
    fn pool_layout() {
        let o = obs(15.0, 200.0, SignalPhase::Green, 20.0);
        let p = evaluate_pool(&o);
        assert_eq!(p[NominalId::Zero.ordinal()], 0.0);
        assert_eq!(p[NominalId::Idm.ordinal()], 0.0);
        assert_eq!(p[NominalId::ConstAcc.ordinal()], 0.1);
        assert_eq!(p[NominalId::ConstDec.ordinal()], -0.1);
    }

    #[test]
    fn names_round_trip() {
        for id in NominalId::ALL {
            assert_eq!(id.name().parse::<NominalId>().unwrap(), id);
        }
        assert!("mpc".parse::<NominalId>().is_err());
    }
}

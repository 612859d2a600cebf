//! Per-agent driving reward: a weighted sum of five signal deltas plus two
//! optional shaping hooks.
//!
//! ```text
//! r = 1000 (D[t-1] - D[t]) + 0.05 (V[t] - V[t-1]) - 0.00002 (C[t] - C[t-1])
//!     - 2 (SW[t] - SW[t-1]) - 2 (OL[t] - OL[t-1]) + alpha + beta
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::pomg::{AgentId, EnvState, WorldState};
use crate::world::{lane_infractions, DynamicsParams, MapModel};

pub const DISTANCE_WEIGHT: f64 = 1000.0;
pub const SPEED_WEIGHT: f64 = 0.05;
pub const COLLISION_WEIGHT: f64 = 0.00002;
pub const SIDEWALK_WEIGHT: f64 = 2.0;
pub const OPPOSITE_LANE_WEIGHT: f64 = 2.0;

/// The name accepted by the `reward_function` config key.
pub const CORL2017: &str = "corl2017";

/// Measurements feeding the reward at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardSignals {
    /// Remaining route distance to the goal, km.
    pub distance_km: f64,
    /// Speed, km/h.
    pub speed_kmh: f64,
    /// Cumulative collision damage.
    pub collision_damage: f64,
    /// Footprint fraction over sidewalks.
    pub sidewalk: f64,
    /// Footprint fraction over opposing lanes.
    pub opposite_lane: f64,
}

/// Everything a shaping hook may look at.
pub struct ShapingContext<'a> {
    pub agent: &'a AgentId,
    pub prev: &'a BTreeMap<AgentId, RewardSignals>,
    pub cur: &'a BTreeMap<AgentId, RewardSignals>,
    pub env: &'a EnvState,
}

pub type ShapingFn = Arc<dyn Fn(&ShapingContext<'_>) -> f64 + Send + Sync>;

/// The alpha (inter-agent) and beta (environment) shaping terms.
#[derive(Clone)]
pub struct RewardShaping {
    pub alpha: ShapingFn,
    pub beta: ShapingFn,
}

impl Default for RewardShaping {
    fn default() -> Self {
        Self { alpha: Arc::new(|_| 0.0), beta: Arc::new(|_| 0.0) }
    }
}

impl fmt::Debug for RewardShaping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RewardShaping").finish_non_exhaustive()
    }
}

impl RewardShaping {
    /// Alpha = `weight` times the mean distance-progress term of the other
    /// agents. Zero when the agent is alone.
    pub fn cooperative(weight: f64) -> Self {
        let alpha: ShapingFn = Arc::new(move |ctx: &ShapingContext<'_>| {
            if weight == 0.0 {
                return 0.0;
            }
            let progress: Vec<f64> = ctx
                .cur
                .iter()
                .filter(|(id, _)| *id != ctx.agent)
                .filter_map(|(id, cur)| ctx.prev.get(id).map(|p| DISTANCE_WEIGHT * (p.distance_km - cur.distance_km)))
                .collect();
            if progress.is_empty() {
                0.0
            } else {
                weight * progress.iter().sum::<f64>() / progress.len() as f64
            }
        });
        Self { alpha, ..Self::default() }
    }
}

/// The five weighted deltas, without shaping.
pub fn base_reward(prev: &RewardSignals, cur: &RewardSignals) -> f64 {
    DISTANCE_WEIGHT * (prev.distance_km - cur.distance_km) + SPEED_WEIGHT * (cur.speed_kmh - prev.speed_kmh)
        - COLLISION_WEIGHT * (cur.collision_damage - prev.collision_damage)
        - SIDEWALK_WEIGHT * (cur.sidewalk - prev.sidewalk)
        - OPPOSITE_LANE_WEIGHT * (cur.opposite_lane - prev.opposite_lane)
}

pub fn compute_reward(
    prev: &RewardSignals,
    cur: &RewardSignals,
    shaping: &RewardShaping,
    ctx: &ShapingContext<'_>,
) -> f64 {
    base_reward(prev, cur) + (shaping.alpha)(ctx) + (shaping.beta)(ctx)
}

/// Reads the reward signals of `agent` from the world.
///
/// D is the route's remaining length after re-projecting the current
/// position (straight-line distance when the planner is disabled). Agents
/// with the lane sensor off report zero SW and OL.
pub fn compute_signals(world: &WorldState, agent: &AgentId, map: &MapModel, params: &DynamicsParams) -> RewardSignals {
    let Some(state) = world.actors.get(agent) else {
        return RewardSignals::default();
    };
    let distance_km = match (world.routes.get(agent), world.goals.get(agent)) {
        (Some(route), _) => route.remaining_from(state.position).1,
        (None, Some(goal)) => state.position.distance(*goal) / 1000.0,
        (None, None) => 0.0,
    };
    let (sidewalk, opposite_lane) = if world.lane_sensor.get(agent).copied().unwrap_or(true) {
        lane_infractions(map, state, params)
    } else {
        (0.0, 0.0)
    };
    RewardSignals {
        distance_km,
        speed_kmh: state.speed * 3.6,
        collision_damage: state.accumulated_damage,
        sidewalk,
        opposite_lane,
    }
}

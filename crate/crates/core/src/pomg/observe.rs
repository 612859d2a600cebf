//! Observation encoding, the communication channel, adversarial perturbation
//! and action scheduling.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{AdversarialConfig, SensingConfig};
use super::{AgentId, Message, Observation, WorldState};
use crate::world::{wrap_angle, ActorState, DynamicsParams, MapModel, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationMode {
    /// Every actor is observed exactly.
    FO,
    /// Only actors in sensing range and line of sight, plus whatever arrives
    /// over the communication channel.
    PO,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleMode {
    Synch,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommConfig {
    /// Broadcast range (m).
    pub radius: f64,
}

impl Default for CommConfig {
    fn default() -> Self {
        Self { radius: 100.0 }
    }
}

/// Ego features: x, y, cos h, sin h, speed, route distance, stop-line
/// distance, lateral offset, sin and cos of heading error.
pub const EGO_FEATURES: usize = 10;
/// Per slot: valid, rel x, rel y, cos rel h, sin rel h, speed, staleness.
pub const SLOT_FEATURES: usize = 7;

const POSITION_SCALE: f64 = 100.0;
const STOP_LINE_SCALE: f64 = 50.0;
const LATERAL_SCALE: f64 = 5.0;
const STALENESS_SCALE: f64 = 10.0;

/// Shape of a driving observation vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationLayout {
    pub slots: usize,
    pub radius: f64,
    pub grid_cells: Option<usize>,
    pub grid_resolution: f64,
}

impl From<&SensingConfig> for ObservationLayout {
    fn from(s: &SensingConfig) -> Self {
        Self { slots: s.slots, radius: s.radius, grid_cells: s.grid_cells, grid_resolution: s.grid_resolution }
    }
}

impl ObservationLayout {
    pub fn dim(&self) -> usize {
        EGO_FEATURES + self.slots * SLOT_FEATURES + self.grid_cells.map_or(0, |n| n * n)
    }

    /// True for entries that carry continuous measurements (as opposed to
    /// validity flags and occupancy cells).
    pub fn continuous_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; EGO_FEATURES];
        for _ in 0..self.slots {
            mask.push(false);
            mask.extend([true; SLOT_FEATURES - 1]);
        }
        mask.extend(std::iter::repeat_n(false, self.grid_cells.map_or(0, |n| n * n)));
        mask
    }
}

/// Actors `agent` senses directly: within `radius` and with no third
/// footprint crossing the line of sight. The agent itself is excluded.
pub fn visible_actors(world: &WorldState, agent: &AgentId, radius: f64, params: &DynamicsParams) -> Vec<AgentId> {
    let Some(ego) = world.actors.get(agent) else {
        return Vec::new();
    };
    let boxes: Vec<_> = world.actors.iter().map(|(id, s)| (id, s.footprint(params))).collect();
    world
        .actors
        .iter()
        .filter(|(id, s)| *id != agent && ego.position.distance(s.position) <= radius)
        .filter(|(id, s)| {
            !boxes.iter().any(|(k, b)| *k != agent && k != id && b.intersects_segment(ego.position, s.position))
        })
        .map(|(id, _)| id.clone())
        .collect()
}

/// Builds this tick's messages: every agent broadcasts its own state and its
/// directly visible actors to all agents within the comm radius. Returns an
/// inbox per agent (empty when `comm` is `None`).
pub fn exchange_messages(
    world: &WorldState,
    comm: Option<&CommConfig>,
    mode: ObservationMode,
    radius: f64,
    params: &DynamicsParams,
) -> BTreeMap<AgentId, Vec<Message>> {
    let mut inbox: BTreeMap<AgentId, Vec<Message>> = world.actors.keys().map(|k| (k.clone(), Vec::new())).collect();
    let Some(comm) = comm else {
        return inbox;
    };
    for (sender, state) in &world.actors {
        let seen = match mode {
            ObservationMode::FO => world.actors.keys().filter(|k| *k != sender).cloned().collect(),
            ObservationMode::PO => visible_actors(world, sender, radius, params),
        };
        let visible: Vec<_> = seen.into_iter().map(|id| (id.clone(), world.actors[&id])).collect();
        for (receiver, rstate) in &world.actors {
            if receiver != sender && rstate.position.distance(state.position) <= comm.radius {
                inbox.get_mut(receiver).unwrap().push(Message {
                    sender: sender.clone(),
                    state: *state,
                    visible: visible.clone(),
                    staleness: 0,
                });
            }
        }
    }
    inbox
}

/// Drops each message with probability `p_drop`. One uniform draw per
/// message, agents in id order.
pub fn perturb_messages(adv: &AdversarialConfig, inbox: &mut BTreeMap<AgentId, Vec<Message>>, rng: &mut ChaCha8Rng) {
    for msgs in inbox.values_mut() {
        msgs.retain(|_| rng.random::<f64>() >= adv.p_drop);
    }
}

/// With probability `p_noise` adds N(0, sigma²) noise to each entry flagged
/// in `mask`. One uniform draw per masked entry, plus one normal draw per hit.
pub fn perturb_observations(
    adv: &AdversarialConfig,
    obs: &mut BTreeMap<AgentId, Observation>,
    mask: &[bool],
    rng: &mut ChaCha8Rng,
) {
    for o in obs.values_mut() {
        for (x, &m) in o.iter_mut().zip(mask) {
            if m && rng.random::<f64>() < adv.p_noise {
                let z: f64 = rng.sample(StandardNormal);
                *x += adv.sigma * z;
            }
        }
    }
}

/// Message drops followed by observation noise.
pub fn perturb(
    adv: &AdversarialConfig,
    inbox: &mut BTreeMap<AgentId, Vec<Message>>,
    obs: &mut BTreeMap<AgentId, Observation>,
    mask: &[bool],
    rng: &mut ChaCha8Rng,
) {
    perturb_messages(adv, inbox, rng);
    perturb_observations(adv, obs, mask, rng);
}

/// Agents whose action takes effect at `tick`. `repeat` lists the active
/// agents with their decision period.
pub fn schedule(mode: ScheduleMode, tick: u64, repeat: &BTreeMap<AgentId, u32>) -> BTreeSet<AgentId> {
    repeat
        .iter()
        .filter(|(_, &k)| match mode {
            ScheduleMode::Synch => true,
            ScheduleMode::Async => tick.is_multiple_of(u64::from(k.max(1))),
        })
        .map(|(id, _)| id.clone())
        .collect()
}

fn write_slot(
    slot: &mut [f64],
    ego: &ActorState,
    other: &ActorState,
    staleness: u32,
    layout: &ObservationLayout,
    vmax: f64,
) {
    let rel = (other.position - ego.position).rotate_into(ego.heading);
    let dh = other.heading - ego.heading;
    slot[0] = 1.0;
    slot[1] = rel.x / layout.radius;
    slot[2] = rel.y / layout.radius;
    slot[3] = dh.cos();
    slot[4] = dh.sin();
    slot[5] = other.speed / vmax;
    slot[6] = (f64::from(staleness) / STALENESS_SCALE).min(1.0);
}

/// Encodes `agent`'s view of the world.
///
/// Slot `k` describes the `k`-th actor in id order; the agent's own slot is
/// always valid. In PO mode a slot is filled from direct sensing, else from
/// the freshest message mentioning that actor. Unfilled slots are all zero.
pub fn encode_observation(
    layout: &ObservationLayout,
    mode: ObservationMode,
    world: &WorldState,
    map: &MapModel,
    params: &DynamicsParams,
    agent: &AgentId,
    comm: &[Message],
) -> Observation {
    let mut obs = vec![0.0; layout.dim()];
    let Some(ego) = world.actors.get(agent) else {
        return obs;
    };

    let (distance_km, heading_err, lateral) = match world.routes.get(agent) {
        Some(r) => {
            let err = wrap_angle(r.heading_at(r.progress) - ego.heading);
            (r.remaining_length, err, r.lateral_offset(ego.position))
        }
        None => {
            let d = world.goals.get(agent).map_or(0.0, |g| g.distance(ego.position));
            (d / 1000.0, 0.0, 0.0)
        }
    };
    let stop = map.stop_line_ahead(ego.position, ego.heading).map_or(1.0, |d| (d / STOP_LINE_SCALE).min(1.0));
    obs[..EGO_FEATURES].copy_from_slice(&[
        ego.position.x / POSITION_SCALE,
        ego.position.y / POSITION_SCALE,
        ego.heading.cos(),
        ego.heading.sin(),
        ego.speed / params.max_speed,
        distance_km * 10.0,
        stop,
        (lateral / LATERAL_SCALE).clamp(-2.0, 2.0),
        heading_err.sin(),
        heading_err.cos(),
    ]);

    // best known state per actor, with staleness
    let mut known: BTreeMap<&AgentId, (ActorState, u32)> = BTreeMap::new();
    match mode {
        ObservationMode::FO => {
            for (id, s) in &world.actors {
                known.insert(id, (*s, 0));
            }
        }
        ObservationMode::PO => {
            known.insert(agent, (*ego, 0));
            let direct = visible_actors(world, agent, layout.radius, params);
            for id in &direct {
                let (k, s) = world.actors.get_key_value(id).unwrap();
                known.insert(k, (*s, 0));
            }
            for msg in comm {
                let reports = std::iter::once((&msg.sender, &msg.state)).chain(msg.visible.iter().map(|(i, s)| (i, s)));
                for (id, s) in reports {
                    if id == agent {
                        continue;
                    }
                    let Some((k, _)) = world.actors.get_key_value(id) else {
                        continue;
                    };
                    match known.get(k) {
                        Some((_, st)) if *st <= msg.staleness => {}
                        _ => {
                            known.insert(k, (*s, msg.staleness));
                        }
                    }
                }
            }
        }
    }

    for (k, id) in world.actors.keys().enumerate().take(layout.slots) {
        if let Some((s, st)) = known.get(id) {
            let start = EGO_FEATURES + k * SLOT_FEATURES;
            write_slot(&mut obs[start..start + SLOT_FEATURES], ego, s, *st, layout, params.max_speed);
        }
    }

    if let Some(n) = layout.grid_cells {
        let base = EGO_FEATURES + layout.slots * SLOT_FEATURES;
        let others: Vec<_> =
            known.iter().filter(|(id, _)| **id != agent).map(|(_, (s, _))| s.footprint(params)).collect();
        let half = (n as f64 - 1.0) / 2.0;
        let fwd = Vec2::from_angle(ego.heading);
        let left = fwd.perp();
        for r in 0..n {
            for c in 0..n {
                let ahead = (half - r as f64) * layout.grid_resolution;
                let side = (half - c as f64) * layout.grid_resolution;
                let p = ego.position + fwd * ahead + left * side;
                if others.iter().any(|b| b.contains(p)) {
                    obs[base + r * n + c] = 1.0;
                }
            }
        }
    }
    obs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomg::EnvState;
    use crate::world::{build_map, single_lane};
    use rand::SeedableRng;

    fn world_with(positions: &[(&str, f64, f64)]) -> WorldState {
        let mut w = WorldState::new(EnvState::new(0, 0));
        for (id, x, y) in positions {
            w.actors.insert(AgentId::from(*id), ActorState::at_rest(Vec2::new(*x, *y), 0.0));
        }
        w
    }

    fn layout() -> ObservationLayout {
        ObservationLayout::from(&SensingConfig::default())
    }

    fn slot_valid(obs: &[f64], k: usize) -> bool {
        obs[EGO_FEATURES + k * SLOT_FEATURES] == 1.0
    }

    #[test]
    fn full_observability_marks_all_actors() {
        let map = build_map(&single_lane(500.0)).unwrap();
        let w = world_with(&[("a", 10.0, 0.0), ("b", 200.0, 0.0), ("c", 400.0, 0.0)]);
        let p = DynamicsParams::default();
        let obs = encode_observation(&layout(), ObservationMode::FO, &w, &map, &p, &AgentId::from("a"), &[]);
        assert_eq!(obs.len(), layout().dim());
        assert!((0..3).all(|k| slot_valid(&obs, k)));
        assert!((3..8).all(|k| !slot_valid(&obs, k)));
    }

    #[test]
    fn radius_and_comm_merge() {
        let map = build_map(&single_lane(500.0)).unwrap();
        let p = DynamicsParams::default();
        let r = layout().radius;
        let w = world_with(&[("a", 10.0, 0.0), ("b", 10.0 + r + 1.0, 0.0)]);
        let a = AgentId::from("a");
        let obs = encode_observation(&layout(), ObservationMode::PO, &w, &map, &p, &a, &[]);
        assert!(slot_valid(&obs, 0) && !slot_valid(&obs, 1));

        let msg =
            Message { sender: AgentId::from("b"), state: w.actors[&AgentId::from("b")], visible: vec![], staleness: 0 };
        let obs = encode_observation(&layout(), ObservationMode::PO, &w, &map, &p, &a, &[msg]);
        assert!(slot_valid(&obs, 1));
        let slot = &obs[EGO_FEATURES + SLOT_FEATURES..EGO_FEATURES + 2 * SLOT_FEATURES];
        assert_eq!(slot[6], 0.0);
        assert!((slot[1] - (r + 1.0) / r).abs() < 1e-12);
    }

    #[test]
    fn occluded_actor_is_hidden() {
        let p = DynamicsParams::default();
        let w = world_with(&[("a", 10.0, 0.0), ("b", 30.0, 0.0), ("c", 20.0, 0.0)]);
        let seen = visible_actors(&w, &AgentId::from("a"), 40.0, &p);
        assert_eq!(seen, vec![AgentId::from("c")]);
    }

    #[test]
    fn message_fanout() {
        let p = DynamicsParams::default();
        let w = world_with(&[("a", 0.0, 0.0), ("b", 10.0, 0.0)]);
        let inbox = exchange_messages(&w, Some(&CommConfig { radius: 50.0 }), ObservationMode::PO, 40.0, &p);
        assert!(inbox.values().all(|m| m.len() == 1));
        let inbox = exchange_messages(&w, None, ObservationMode::PO, 40.0, &p);
        assert!(inbox.values().all(|m| m.is_empty()));
        let w = world_with(&[("a", 0.0, 0.0), ("b", 10.0, 0.0), ("c", 20.0, 5.0)]);
        let inbox = exchange_messages(&w, Some(&CommConfig::default()), ObservationMode::PO, 40.0, &p);
        assert!(inbox.values().all(|m| m.len() == 2));
    }

    #[test]
    fn drop_everything_or_nothing() {
        let p = DynamicsParams::default();
        let w = world_with(&[("a", 0.0, 0.0), ("b", 10.0, 0.0), ("c", 20.0, 5.0)]);
        let base = exchange_messages(&w, Some(&CommConfig::default()), ObservationMode::PO, 40.0, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(1);

        let mut inbox = base.clone();
        perturb_messages(&AdversarialConfig { p_drop: 1.0, ..AdversarialConfig::NONE }, &mut inbox, &mut rng);
        assert!(inbox.values().all(|m| m.is_empty()));

        let mut inbox = base.clone();
        let mut obs = BTreeMap::from([(AgentId::from("a"), vec![0.25, -1.5, 3.0])]);
        let before = obs.clone();
        perturb(&AdversarialConfig::NONE, &mut inbox, &mut obs, &[true, true, true], &mut rng);
        assert_eq!(inbox, base);
        assert_eq!(obs, before);
    }

    #[test]
    fn scheduling() {
        let ids = |ks: &[(&str, u32)]| ks.iter().map(|(i, k)| (AgentId::from(*i), *k)).collect::<BTreeMap<_, _>>();
        let three = ids(&[("a", 1), ("b", 3), ("c", 7)]);
        assert_eq!(schedule(ScheduleMode::Synch, 5, &three).len(), 3);
        let two = ids(&[("a", 1), ("b", 2)]);
        assert_eq!(schedule(ScheduleMode::Async, 1, &two), BTreeSet::from([AgentId::from("a")]));
        let one = ids(&[("b", 2)]);
        let acts = (0..10).filter(|&t| !schedule(ScheduleMode::Async, t, &one).is_empty()).count();
        assert_eq!(acts, 5);
    }
}

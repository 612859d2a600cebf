//! Collision and lane-infraction sensing.

use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use super::kinematics::{ActorState, DynamicsParams};
use super::map::MapModel;

/// Damage units added per m/s of relative impact speed.
pub const DAMAGE_PER_MPS: f64 = 1000.0;

/// Footprint sample grid used for area fractions.
const SAMPLES_LONG: usize = 24;
const SAMPLES_LAT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CollisionTarget {
    /// Two actors, `a < b`, indices into the state list.
    Actors { a: usize, b: usize },
    /// An actor leaving the drivable bounds.
    Boundary { actor: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    #[serde(flatten)]
    pub target: CollisionTarget,
    /// m/s.
    pub relative_speed: f64,
}

impl CollisionEvent {
    pub fn involves(&self, actor: usize) -> bool {
        match self.target {
            CollisionTarget::Actors { a, b } => a == actor || b == actor,
            CollisionTarget::Boundary { actor: x } => x == actor,
        }
    }

    /// Damage this event inflicts on each involved actor.
    pub fn damage(&self) -> f64 {
        DAMAGE_PER_MPS * self.relative_speed
    }
}

/// Pairwise oriented-box test plus map-boundary test. Actors with `done` set
/// are ignored. Each unordered pair appears at most once.
pub fn detect_collisions(states: &[ActorState], map: &MapModel, params: &DynamicsParams) -> Vec<CollisionEvent> {
    let boxes: Vec<_> = states.iter().map(|s| s.footprint(params)).collect();
    let mut events = Vec::new();
    for i in 0..states.len() {
        if states[i].done {
            continue;
        }
        for j in i + 1..states.len() {
            if states[j].done {
                continue;
            }
            if boxes[i].overlaps(&boxes[j]) {
                let rel = (states[i].velocity() - states[j].velocity()).norm();
                events.push(CollisionEvent { target: CollisionTarget::Actors { a: i, b: j }, relative_speed: rel });
            }
        }
        if boxes[i].corners().iter().any(|c| !map.bounds.contains(*c)) {
            events.push(CollisionEvent {
                target: CollisionTarget::Boundary { actor: i },
                relative_speed: states[i].speed,
            });
        }
    }
    events
}

/// Fractions of the footprint over sidewalks and over opposing lanes.
///
/// A footprint point counts as opposing-lane only when it lies on some lane
/// whose direction is more than 90 degrees from the heading and on no lane
/// within 90 degrees of it.
pub fn lane_infractions(map: &MapModel, state: &ActorState, params: &DynamicsParams) -> (f64, f64) {
    let fp = state.footprint(params);
    let bb = fp.aabb();
    let fwd = Vec2::from_angle(state.heading);

    let sidewalks: Vec<usize> = (0..map.sidewalks.len()).filter(|&k| map.sidewalk_aabbs[k].intersects(&bb)).collect();
    let pieces: Vec<_> = map.pieces.iter().filter(|p| p.aabb.intersects(&bb)).collect();
    if sidewalks.is_empty() && pieces.is_empty() {
        return (0.0, 0.0);
    }

    let (mut sw, mut ol, mut n) = (0usize, 0usize, 0usize);
    for p in fp.sample_grid(SAMPLES_LONG, SAMPLES_LAT) {
        n += 1;
        if sidewalks.iter().any(|&k| map.sidewalks[k].contains(p)) {
            sw += 1;
        }
        let mut opposing = false;
        let mut aligned = false;
        for piece in &pieces {
            if piece.area.contains(p) {
                if piece.direction.dot(fwd) < 0.0 {
                    opposing = true;
                } else {
                    aligned = true;
                    break;
                }
            }
        }
        if opposing && !aligned {
            ol += 1;
        }
    }
    (sw as f64 / n as f64, ol as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::geometry::Polygon;
    use crate::world::map::{build_map, town3_like_3way, MapSpec};

    fn open_map() -> MapModel {
        let mut spec = crate::world::map::single_lane(200.0);
        spec.bounds =
            Some(crate::world::geometry::Aabb { min: Vec2::new(-500.0, -500.0), max: Vec2::new(500.0, 500.0) });
        build_map(&spec).unwrap()
    }

    #[test]
    fn identical_pose_collides_once() {
        let p = DynamicsParams::default();
        let s = ActorState::at_rest(Vec2::new(10.0, 0.0), 0.0);
        let ev = detect_collisions(&[s, s], &open_map(), &p);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].target, CollisionTarget::Actors { a: 0, b: 1 });
        assert_eq!(ev[0].relative_speed, 0.0);
    }

    #[test]
    fn far_apart_no_events() {
        let p = DynamicsParams::default();
        let a = ActorState::at_rest(Vec2::new(10.0, 0.0), 0.0);
        let b = ActorState::at_rest(Vec2::new(110.0, 0.0), 0.0);
        assert!(detect_collisions(&[a, b], &open_map(), &p).is_empty());
    }

    #[test]
    fn head_on_relative_speed() {
        let p = DynamicsParams::default();
        let mut a = ActorState::at_rest(Vec2::new(10.0, 0.0), 0.0);
        let mut b = ActorState::at_rest(Vec2::new(14.0, 0.0), std::f64::consts::PI);
        a.speed = 5.0;
        b.speed = 5.0;
        let ev = detect_collisions(&[a, b], &open_map(), &p);
        assert_eq!(ev.len(), 1);
        // oracle: |v_a - v_b| with v_a = (5, 0), v_b = (-5, 0)
        assert!((ev[0].relative_speed - 10.0).abs() < 1e-12);
        assert!((ev[0].damage() - 10_000.0).abs() < 1e-9);
    }

    #[test]
    fn done_actors_are_skipped() {
        let p = DynamicsParams::default();
        let a = ActorState::at_rest(Vec2::new(10.0, 0.0), 0.0);
        let mut b = a;
        b.done = true;
        assert!(detect_collisions(&[a, b], &open_map(), &p).is_empty());
    }

    #[test]
    fn leaving_bounds_is_a_static_collision() {
        let p = DynamicsParams::default();
        let map = build_map(&town3_like_3way()).unwrap();
        let mut s = ActorState::at_rest(Vec2::new(101.0, 62.5), std::f64::consts::PI);
        s.speed = 4.0;
        let ev = detect_collisions(&[s], &map, &p);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].target, CollisionTarget::Boundary { actor: 0 });
        assert_eq!(ev[0].relative_speed, 4.0);
    }

    #[test]
    fn centred_in_own_lane_is_clean() {
        let p = DynamicsParams::default();
        let map = build_map(&town3_like_3way()).unwrap();
        for (pos, heading) in [
            (Vec2::new(147.6, 62.6), 0.0),
            (Vec2::new(188.0, 59.0), std::f64::consts::PI),
            (Vec2::new(170.5, 80.0), -std::f64::consts::FRAC_PI_2),
        ] {
            let s = ActorState::at_rest(pos, heading);
            assert_eq!(lane_infractions(&map, &s, &p), (0.0, 0.0), "at {pos:?}");
        }
    }

    #[test]
    fn fully_on_sidewalk() {
        let p = DynamicsParams::default();
        let spec = MapSpec {
            sidewalks: vec![Polygon::rect(Vec2::new(0.0, 10.0), Vec2::new(50.0, 20.0))],
            ..crate::world::map::single_lane(100.0)
        };
        let map = build_map(&spec).unwrap();
        let s = ActorState::at_rest(Vec2::new(25.0, 15.0), 0.3);
        assert_eq!(lane_infractions(&map, &s, &p).0, 1.0);
    }
}

//! Deterministic planar driving world.

pub mod geometry;
pub mod kinematics;
pub mod map;
pub mod route;
pub mod scenario;
pub mod sensing;

use thiserror::Error;

pub use geometry::{closest_on_segment, wrap_angle, Aabb, Obb, Polygon, Vec2};
pub use kinematics::{
    decode_action, step_kinematics, ActorState, ActorType, ControlCommand, DynamicsParams, ACTION_NAMES, ACTION_TABLE,
    NUM_ACTIONS,
};
pub use map::{
    build_map, single_lane, straight_highway, template, template_names, town3_like_3way, LaneSpec, MapModel, MapSpec,
};
pub use route::{plan_route, Route};
pub use scenario::{builtin as builtin_scenario, Coord, Scenario, ScenarioActor};
pub use sensing::{detect_collisions, lane_infractions, CollisionEvent, CollisionTarget};

/// Distance (m) to the goal projection at which an actor is done.
pub const GOAL_RADIUS: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("lane graph is empty or disconnected")]
    DisconnectedGraph,
    #[error("lanes {0} and {1} overlap")]
    OverlappingLanes(usize, usize),
    #[error("lane {0} is degenerate")]
    InvalidLane(usize),
    #[error("stop line {0} does not lie on exactly one incoming lane")]
    InvalidStopLine(usize),
    #[error("no route between the requested points")]
    NoPath,
    #[error("point {0:?} is not within reach of any lane")]
    OffLaneGraph(Vec2),
    #[error("action {0} is outside 0..9")]
    ActionOutOfRange(usize),
    #[error("control command out of bounds")]
    CommandOutOfBounds,
    #[error("bad scenario: {0}")]
    BadScenario(String),
}

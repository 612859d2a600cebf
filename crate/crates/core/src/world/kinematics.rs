//! Actor state, discrete action table and kinematic bicycle dynamics.

use serde::{Deserialize, Serialize};

use super::geometry::{Obb, Vec2};
use super::WorldError;

/// Vehicle constants for the kinematic bicycle backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// Maximum front-wheel angle (radians) at |steer| = 1.
    pub max_steer: f64,
    /// m/s² at full throttle.
    pub max_accel: f64,
    /// m/s² at full brake.
    pub max_brake: f64,
    pub max_speed: f64,
    pub wheelbase: f64,
    /// Linear drag coefficient (1/s).
    pub drag: f64,
    pub length: f64,
    pub width: f64,
    /// Simulation step (s).
    pub dt: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            max_steer: 35f64.to_radians(),
            max_accel: 3.0,
            max_brake: 8.0,
            max_speed: 20.0,
            wheelbase: 2.5,
            drag: 0.05,
            length: 4.5,
            width: 2.0,
            dt: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ActorType {
    #[default]
    #[serde(rename = "vehicle_4W")]
    Vehicle4W,
    #[serde(rename = "vehicle_2W")]
    Vehicle2W,
    #[serde(rename = "pedestrian")]
    Pedestrian,
    #[serde(rename = "traffic_light")]
    TrafficLight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub position: Vec2,
    /// Radians, unwrapped.
    pub heading: f64,
    /// m/s, never negative.
    pub speed: f64,
    pub actor_type: ActorType,
    pub accumulated_damage: f64,
    pub done: bool,
}

impl ActorState {
    pub fn at_rest(position: Vec2, heading: f64) -> Self {
        Self { position, heading, speed: 0.0, actor_type: ActorType::Vehicle4W, accumulated_damage: 0.0, done: false }
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.speed
    }

    pub fn footprint(&self, params: &DynamicsParams) -> Obb {
        Obb::new(self.position, self.heading, params.length, params.width)
    }
}

/// Normalized vehicle control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
}

impl ControlCommand {
    pub const COAST: ControlCommand = ControlCommand { steer: 0.0, throttle: 0.0, brake: 0.0 };

    pub fn new(steer: f64, throttle: f64, brake: f64) -> Result<Self, WorldError> {
        let ok = (-1.0..=1.0).contains(&steer) && (0.0..=1.0).contains(&throttle) && (0.0..=1.0).contains(&brake);
        if !ok {
            return Err(WorldError::CommandOutOfBounds);
        }
        Ok(Self { steer, throttle, brake })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.steer, self.throttle, self.brake]
    }
}

pub const NUM_ACTIONS: usize = 9;

/// `[steer, throttle, brake]` per discrete action.
pub const ACTION_TABLE: [[f64; 3]; NUM_ACTIONS] = [
    [0.0, 1.0, 0.0],   // accelerate
    [0.0, 0.0, 1.0],   // brake
    [0.5, 0.0, 0.0],   // turn right
    [-0.5, 0.0, 0.0],  // turn left
    [0.25, 0.5, 0.0],  // accelerate right
    [-0.25, 0.5, 0.0], // accelerate left
    [0.25, 0.0, 0.5],  // brake right
    [-0.25, 0.0, 0.5], // brake left
    [0.0, 0.0, 0.0],   // coast
];

pub const ACTION_NAMES: [&str; NUM_ACTIONS] = [
    "Accelerate",
    "Brake",
    "Turn Right",
    "Turn Left",
    "Accelerate Right",
    "Accelerate Left",
    "Brake Right",
    "Brake Left",
    "Coast",
];

pub fn decode_action(action: usize) -> Result<ControlCommand, WorldError> {
    let [steer, throttle, brake] = *ACTION_TABLE.get(action).ok_or(WorldError::ActionOutOfRange(action))?;
    Ok(ControlCommand { steer, throttle, brake })
}

/// Advances one actor by `dt` seconds.
///
/// Speed is integrated first and clamped to `[0, max_speed]`; heading then
/// turns at `v / L * tan(delta)` and position moves along the mid-step heading.
pub fn step_kinematics(state: &ActorState, cmd: &ControlCommand, dt: f64, params: &DynamicsParams) -> ActorState {
    let delta = cmd.steer * params.max_steer;
    let accel = cmd.throttle * params.max_accel - cmd.brake * params.max_brake - params.drag * state.speed;
    let speed = (state.speed + accel * dt).clamp(0.0, params.max_speed);
    let heading = state.heading + speed / params.wheelbase * delta.tan() * dt;
    let mid = 0.5 * (state.heading + heading);
    let position = state.position + Vec2::from_angle(mid) * (speed * dt);
    ActorState { position, heading, speed, ..*state }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_rows() {
        assert_eq!(decode_action(0).unwrap(), ControlCommand { steer: 0.0, throttle: 1.0, brake: 0.0 });
        assert_eq!(decode_action(8).unwrap(), ControlCommand::COAST);
        assert_eq!(decode_action(9).unwrap_err(), WorldError::ActionOutOfRange(9));
    }

    #[test]
    fn command_bounds() {
        assert!(ControlCommand::new(1.0, 1.0, 1.0).is_ok());
        assert!(ControlCommand::new(1.1, 0.0, 0.0).is_err());
        assert!(ControlCommand::new(0.0, -0.1, 0.0).is_err());
    }

    #[test]
    fn coasting_at_rest_is_a_fixed_point() {
        let s = ActorState::at_rest(Vec2::new(3.0, 4.0), 0.7);
        for dt in [0.01, 0.1, 1.0] {
            assert_eq!(step_kinematics(&s, &ControlCommand::COAST, dt, &DynamicsParams::default()), s);
        }
    }

    #[test]
    fn straight_line_without_drag() {
        let params = DynamicsParams { drag: 0.0, ..DynamicsParams::default() };
        let mut s = ActorState::at_rest(Vec2::new(1.0, 2.0), std::f64::consts::FRAC_PI_6);
        s.speed = 10.0;
        let n = step_kinematics(&s, &ControlCommand::COAST, 1.0, &params);
        assert!((n.position.distance(s.position) - 10.0).abs() < 1e-12);
        assert!((n.heading - s.heading).abs() == 0.0);
        assert_eq!(n.speed, 10.0);
    }

    #[test]
    fn braking_never_goes_negative() {
        let mut s = ActorState::at_rest(Vec2::ZERO, 0.0);
        s.speed = 0.3;
        let n = step_kinematics(&s, &decode_action(1).unwrap(), 0.1, &DynamicsParams::default());
        assert_eq!(n.speed, 0.0);
    }

    #[test]
    fn speed_saturates() {
        let p = DynamicsParams::default();
        let mut s = ActorState::at_rest(Vec2::ZERO, 0.0);
        for _ in 0..1000 {
            s = step_kinematics(&s, &decode_action(0).unwrap(), p.dt, &p);
        }
        assert!(s.speed <= p.max_speed);
    }
}

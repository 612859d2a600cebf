//! A two-road cell-world crossing, small enough for tabular learning.
//!
//! Agent `car1` drives east along one road and `car2` north along the other;
//! both roads share the crossing cell. Positions and speeds are integers
//! (cells and cells per tick). Rewards use the same five-term function as the
//! driving world, with cells and ticks converted to metres and seconds.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::WorldState;
use super::{validate_actions, AgentId, AgentInfo, EnvError, EnvState, JointStepResult, MultiAgentEnv, Observation};
use crate::rewards::{base_reward, RewardSignals};
use crate::world::sensing::DAMAGE_PER_MPS;
use crate::world::{decode_action, ActorState, Vec2, NUM_ACTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    /// Cells per road; the goal is the last cell.
    pub length: u32,
    /// Index of the shared cell on both roads.
    pub crossing: u32,
    pub max_speed: u32,
    pub max_steps: u32,
    /// Start cells are drawn uniformly from `0..=start_jitter`.
    pub start_jitter: u32,
    pub cell_m: f64,
    pub tick_s: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { length: 10, crossing: 5, max_speed: 2, max_steps: 30, start_jitter: 2, cell_m: 5.0, tick_s: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Car {
    pos: u32,
    speed: u32,
    done: bool,
    damage: f64,
}

pub struct GridIntersectionEnv {
    params: GridParams,
    agents: Vec<AgentId>,
    cars: Vec<Car>,
    world: Option<WorldState>,
    prev: Vec<RewardSignals>,
    over: bool,
}

/// Observation: own cell, own speed, other cell, other speed, other done;
/// all scaled into [0, 1].
const OBS_DIM: usize = 5;

impl GridIntersectionEnv {
    pub fn new(params: GridParams) -> Result<Self, EnvError> {
        if params.length < 3 || params.crossing == 0 || params.crossing + 1 >= params.length {
            return Err(EnvError::BadSpec("grid crossing must lie strictly inside the road".into()));
        }
        if params.max_speed == 0 || params.max_steps == 0 || params.start_jitter >= params.crossing {
            return Err(EnvError::BadSpec("grid speeds, step limit and jitter must be positive and small".into()));
        }
        Ok(Self {
            params,
            agents: vec![AgentId::from("car1"), AgentId::from("car2")],
            cars: Vec::new(),
            world: None,
            prev: Vec::new(),
            over: false,
        })
    }

    fn goal_cell(&self) -> u32 {
        self.params.length - 1
    }

    fn signals(&self, car: &Car) -> RewardSignals {
        let p = &self.params;
        RewardSignals {
            distance_km: f64::from(self.goal_cell() - car.pos) * p.cell_m / 1000.0,
            speed_kmh: f64::from(car.speed) * p.cell_m / p.tick_s * 3.6,
            collision_damage: car.damage,
            sidewalk: 0.0,
            opposite_lane: 0.0,
        }
    }

    fn observe(&self) -> BTreeMap<AgentId, Observation> {
        let g = f64::from(self.goal_cell());
        let v = f64::from(self.params.max_speed);
        (0..2)
            .map(|i| {
                let (me, other) = (&self.cars[i], &self.cars[1 - i]);
                let o = vec![
                    f64::from(me.pos) / g,
                    f64::from(me.speed) / v,
                    f64::from(other.pos) / g,
                    f64::from(other.speed) / v,
                    if other.done { 1.0 } else { 0.0 },
                ];
                (self.agents[i].clone(), o)
            })
            .collect()
    }

    fn sync_world(&mut self) {
        let p = self.params;
        let cars = self.cars.clone();
        let world = self.world.as_mut().expect("reset first");
        for (i, car) in cars.iter().enumerate() {
            let along = (f64::from(car.pos) - f64::from(p.crossing)) * p.cell_m;
            let (position, heading) = if i == 0 {
                (Vec2::new(along, 0.0), 0.0)
            } else {
                (Vec2::new(0.0, along), std::f64::consts::FRAC_PI_2)
            };
            let s = world.actors.get_mut(&self.agents[i]).unwrap();
            s.position = position;
            s.heading = heading;
            s.speed = f64::from(car.speed) * p.cell_m / p.tick_s;
            s.accumulated_damage = car.damage;
            s.done = car.done;
        }
    }
}

impl MultiAgentEnv for GridIntersectionEnv {
    fn agent_ids(&self) -> Vec<AgentId> {
        self.agents.clone()
    }

    fn observation_dim(&self) -> usize {
        OBS_DIM
    }

    fn max_steps(&self) -> u32 {
        self.params.max_steps
    }

    fn reset(&mut self, seed: u64) -> Result<BTreeMap<AgentId, Observation>, EnvError> {
        let mut env = EnvState::seeded(seed);
        self.cars =
            (0..2).map(|_| Car { pos: env.rng.random_range(0..=self.params.start_jitter), ..Car::default() }).collect();
        let mut world = WorldState::new(env);
        for (i, id) in self.agents.iter().enumerate() {
            let goal_along = (f64::from(self.goal_cell()) - f64::from(self.params.crossing)) * self.params.cell_m;
            let goal = if i == 0 { Vec2::new(goal_along, 0.0) } else { Vec2::new(0.0, goal_along) };
            world.actors.insert(id.clone(), ActorState::at_rest(Vec2::ZERO, 0.0));
            world.goals.insert(id.clone(), goal);
            world.lane_sensor.insert(id.clone(), false);
        }
        self.world = Some(world);
        self.sync_world();
        self.prev = self.cars.iter().map(|c| self.signals(c)).collect();
        self.over = false;
        Ok(self.observe())
    }

    fn step(&mut self, actions: &BTreeMap<AgentId, usize>) -> Result<JointStepResult, EnvError> {
        if self.over {
            return Err(EnvError::EpisodeOver);
        }
        if self.world.is_none() {
            return Err(EnvError::NotReset);
        }
        let active: BTreeMap<AgentId, bool> =
            self.agents.iter().zip(&self.cars).map(|(id, c)| (id.clone(), !c.done)).collect();
        validate_actions(&self.agents, &active, actions, NUM_ACTIONS)?;

        let p = self.params;
        let mut swept = [(0u32, 0u32); 2];
        for (i, car) in self.cars.iter_mut().enumerate() {
            if car.done {
                continue;
            }
            let cmd = decode_action(actions[&self.agents[i]])?;
            if cmd.throttle > 0.0 {
                car.speed = (car.speed + 1).min(p.max_speed);
            } else if cmd.brake > 0.0 {
                car.speed = car.speed.saturating_sub(1);
            }
            let from = car.pos;
            car.pos = (car.pos + car.speed).min(p.length - 1);
            swept[i] = (from, car.pos);
        }

        let covers = |i: usize| !self.cars[i].done && swept[i].0 <= p.crossing && p.crossing <= swept[i].1;
        let crash = covers(0) && covers(1);
        let mut info: BTreeMap<AgentId, AgentInfo> = BTreeMap::new();
        if crash {
            let unit = p.cell_m / p.tick_s;
            let rel = (f64::from(self.cars[0].speed).hypot(f64::from(self.cars[1].speed))) * unit;
            for car in self.cars.iter_mut() {
                car.damage += DAMAGE_PER_MPS * rel;
            }
        }

        if let Some(w) = self.world.as_mut() {
            w.env.tick += 1;
        }
        let tick = self.world.as_ref().unwrap().env.tick;
        let timeout = tick >= u64::from(p.max_steps);

        let mut rewards = BTreeMap::new();
        let mut dones = BTreeMap::new();
        for i in 0..2 {
            let was_active = active[&self.agents[i]];
            let reached = was_active && self.cars[i].pos == self.goal_cell();
            let cur = if was_active { self.signals(&self.cars[i]) } else { self.prev[i] };
            let r = if was_active { base_reward(&self.prev[i], &cur) } else { 0.0 };
            if was_active && (reached || crash) {
                self.cars[i].done = true;
            }
            self.prev[i] = cur;
            let id = self.agents[i].clone();
            rewards.insert(id.clone(), r);
            dones.insert(id.clone(), self.cars[i].done || timeout);
            info.insert(
                id,
                AgentInfo {
                    signals: cur,
                    collisions: u32::from(crash && was_active),
                    reached_goal: reached,
                    acted: was_active,
                },
            );
        }
        let all_done = dones.values().all(|d| *d);
        self.over = all_done;
        self.sync_world();
        Ok(JointStepResult { observations: self.observe(), rewards, dones, all_done, info })
    }

    fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }

    fn tabular_grid(&self) -> Option<Vec<(f64, f64, usize)>> {
        let cells = self.params.length as usize;
        let speeds = self.params.max_speed as usize + 1;
        Some(vec![(0.0, 1.0, cells), (0.0, 1.0, speeds), (0.0, 1.0, cells), (0.0, 1.0, speeds), (0.0, 1.0, 2)])
    }
}

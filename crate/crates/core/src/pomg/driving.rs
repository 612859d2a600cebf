//! The driving environment: scenario actors on a lane map, stepped jointly.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::Rng;

use super::config::EnvConfig;
use super::observe::{encode_observation, exchange_messages, perturb_messages, perturb_observations, schedule};
use super::observe::{ObservationLayout, ScheduleMode};
use super::{
    validate_actions, AgentId, AgentInfo, EnvError, EnvState, JointStepResult, Message, MultiAgentEnv, Observation,
    WorldState,
};
use crate::rewards::{compute_reward, compute_signals, RewardShaping, RewardSignals, ShapingContext, CORL2017};
use crate::world::{
    decode_action, detect_collisions, plan_route, step_kinematics, ActorState, CollisionTarget, ControlCommand,
    MapModel, Scenario, WorldError, GOAL_RADIUS, NUM_ACTIONS,
};

pub struct DrivingEnv {
    scenario: Scenario,
    map: Arc<MapModel>,
    config: EnvConfig,
    layout: ObservationLayout,
    mask: Vec<bool>,
    shaping: RewardShaping,
    agents: Vec<AgentId>,
    max_steps: u32,
    world: Option<WorldState>,
    prev: BTreeMap<AgentId, RewardSignals>,
    held: BTreeMap<AgentId, ControlCommand>,
    // delayed message batches with their delivery tick
    in_flight: VecDeque<(u64, BTreeMap<AgentId, Vec<Message>>)>,
    over: bool,
}

impl DrivingEnv {
    pub fn new(scenario: Scenario, config: EnvConfig) -> Result<Self, EnvError> {
        let map = scenario.validate()?;
        let agents: Vec<AgentId> = scenario.actors.keys().map(|k| AgentId::from(k.as_str())).collect();
        if agents.len() > config.sensing.slots {
            return Err(EnvError::BadSpec(format!(
                "{} actors but only {} observation slots",
                agents.len(),
                config.sensing.slots
            )));
        }
        for a in &agents {
            let rf = config.actor(a.as_str()).reward_function;
            if rf != CORL2017 {
                return Err(EnvError::BadSpec(format!("actor {a}: unsupported reward_function {rf:?}")));
            }
        }
        if config.dynamics.dt <= 0.0 {
            return Err(EnvError::BadSpec("dynamics.dt must be positive".into()));
        }
        config.warn_unused();
        let layout = ObservationLayout::from(&config.sensing);
        let shaping = if config.coop_weight != 0.0 {
            RewardShaping::cooperative(config.coop_weight)
        } else {
            RewardShaping::default()
        };
        let max_steps = config.max_steps.unwrap_or(scenario.max_steps);
        Ok(Self {
            mask: layout.continuous_mask(),
            scenario,
            map: Arc::new(map),
            layout,
            shaping,
            agents,
            max_steps,
            config,
            world: None,
            prev: BTreeMap::new(),
            held: BTreeMap::new(),
            in_flight: VecDeque::new(),
            over: false,
        })
    }

    pub fn set_shaping(&mut self, shaping: RewardShaping) {
        self.shaping = shaping;
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn layout(&self) -> &ObservationLayout {
        &self.layout
    }

    /// Current signals per agent (as of the last reset or step).
    pub fn signals(&self) -> &BTreeMap<AgentId, RewardSignals> {
        &self.prev
    }

    fn emit(&mut self) -> BTreeMap<AgentId, Observation> {
        let world = self.world.as_mut().expect("emit after reset");
        let cfg = &self.config;
        let mut inbox = exchange_messages(world, cfg.comm.as_ref(), cfg.observation, cfg.sensing.radius, &cfg.dynamics);
        if let Some(adv) = &cfg.adversarial {
            perturb_messages(adv, &mut inbox, &mut world.env.rng);
            if adv.delay > 0 {
                for msgs in inbox.values_mut() {
                    for m in msgs.iter_mut() {
                        m.staleness = adv.delay;
                    }
                }
                self.in_flight.push_back((world.env.tick + u64::from(adv.delay), inbox));
                inbox = world.actors.keys().map(|k| (k.clone(), Vec::new())).collect();
                while self.in_flight.front().is_some_and(|(t, _)| *t <= world.env.tick) {
                    let (_, due) = self.in_flight.pop_front().unwrap();
                    for (k, msgs) in due {
                        inbox.entry(k).or_default().extend(msgs);
                    }
                }
            }
        }
        let mut obs: BTreeMap<AgentId, Observation> = self
            .agents
            .iter()
            .map(|id| {
                let o =
                    encode_observation(&self.layout, cfg.observation, world, &self.map, &cfg.dynamics, id, &inbox[id]);
                (id.clone(), o)
            })
            .collect();
        if let Some(adv) = &cfg.adversarial {
            perturb_observations(adv, &mut obs, &self.mask, &mut world.env.rng);
        }
        obs
    }
}

impl MultiAgentEnv for DrivingEnv {
    fn agent_ids(&self) -> Vec<AgentId> {
        self.agents.clone()
    }

    fn observation_dim(&self) -> usize {
        self.layout.dim()
    }

    fn max_steps(&self) -> u32 {
        self.max_steps
    }

    fn reset(&mut self, seed: u64) -> Result<BTreeMap<AgentId, Observation>, EnvError> {
        let mut env = EnvState::seeded(seed);
        let weathers = &self.scenario.weather_distribution;
        env.weather = weathers[env.rng.random_range(0..weathers.len())];
        let mut world = WorldState::new(env);

        for (name, actor) in &self.scenario.actors {
            let id = AgentId::from(name.as_str());
            let acfg = self.config.actor(name);
            let start = actor.start.xy;
            let pr = self.map.project(start).ok_or(WorldError::OffLaneGraph(start))?;
            let heading = self.map.lanes[pr.lane].heading_at(pr.s);
            let mut state = ActorState::at_rest(start, heading);
            state.actor_type = acfg.actor_type.or(actor.actor_type).unwrap_or_default();
            if acfg.enable_planner {
                let mut route = plan_route(&self.map, start, actor.end.xy).map_err(|e| match e {
                    WorldError::NoPath => EnvError::NoPath(name.clone()),
                    other => EnvError::World(other),
                })?;
                route.reproject(start);
                world.goals.insert(id.clone(), route.goal());
                world.routes.insert(id.clone(), route);
            } else {
                world.goals.insert(id.clone(), actor.end.xy);
            }
            world.lane_sensor.insert(id.clone(), acfg.lane_sensor_on());
            world.actors.insert(id, state);
        }

        self.prev = self
            .agents
            .iter()
            .map(|id| (id.clone(), compute_signals(&world, id, &self.map, &self.config.dynamics)))
            .collect();
        self.held = self.agents.iter().map(|id| (id.clone(), ControlCommand::COAST)).collect();
        self.in_flight.clear();
        self.over = false;
        self.world = Some(world);
        Ok(self.emit())
    }

    fn step(&mut self, actions: &BTreeMap<AgentId, usize>) -> Result<JointStepResult, EnvError> {
        if self.over {
            return Err(EnvError::EpisodeOver);
        }
        let world = self.world.as_mut().ok_or(EnvError::NotReset)?;
        let active: BTreeMap<AgentId, bool> = world.actors.iter().map(|(k, s)| (k.clone(), !s.done)).collect();
        validate_actions(&self.agents, &active, actions, NUM_ACTIONS)?;

        let cfg = &self.config;
        let params = &cfg.dynamics;
        let periods: BTreeMap<AgentId, u32> = active
            .iter()
            .filter(|(_, a)| **a)
            .map(|(k, _)| (k.clone(), if cfg.schedule == ScheduleMode::Async { cfg.repeat_for(k.as_str()) } else { 1 }))
            .collect();
        let acting = schedule(cfg.schedule, world.env.tick, &periods);
        for id in &acting {
            self.held.insert(id.clone(), decode_action(actions[id])?);
        }

        for (id, state) in world.actors.iter_mut() {
            if !state.done {
                *state = step_kinematics(state, &self.held[id], params.dt, params);
            }
        }

        let states: Vec<ActorState> = world.actors.values().copied().collect();
        let events = detect_collisions(&states, &self.map, params);
        let mut info: BTreeMap<AgentId, AgentInfo> = self
            .agents
            .iter()
            .map(|id| (id.clone(), AgentInfo { acted: acting.contains(id), ..Default::default() }))
            .collect();
        let mut collided: BTreeMap<AgentId, bool> = BTreeMap::new();
        for ev in &events {
            let involved: Vec<usize> = match ev.target {
                CollisionTarget::Actors { a, b } => vec![a, b],
                CollisionTarget::Boundary { actor } => vec![actor],
            };
            for k in involved {
                let id = &self.agents[k];
                info.get_mut(id).unwrap().collisions += 1;
                if cfg.actor(id.as_str()).collision_sensor_on() {
                    world.actors.get_mut(id).unwrap().accumulated_damage += ev.damage();
                    collided.insert(id.clone(), true);
                }
            }
        }
        world.env.tick += 1;

        for (id, route) in world.routes.iter_mut() {
            if !world.actors[id].done {
                route.reproject(world.actors[id].position);
            }
        }

        let mut cur = self.prev.clone();
        for id in &self.agents {
            if active[id] {
                cur.insert(id.clone(), compute_signals(world, id, &self.map, params));
            }
        }

        let mut rewards = BTreeMap::new();
        for id in &self.agents {
            let r = if active[id] {
                let ctx = ShapingContext { agent: id, prev: &self.prev, cur: &cur, env: &world.env };
                compute_reward(&self.prev[id], &cur[id], &self.shaping, &ctx)
            } else {
                0.0
            };
            rewards.insert(id.clone(), r);
        }

        let timeout = world.env.tick >= u64::from(self.max_steps);
        let mut dones = BTreeMap::new();
        for id in &self.agents {
            let state = world.actors.get_mut(id).unwrap();
            let reached = active[id] && state.position.distance(world.goals[id]) <= GOAL_RADIUS;
            let crashed = collided.contains_key(id) && cfg.actor(id.as_str()).early_terminate_on_collision;
            if active[id] && (reached || crashed) {
                state.done = true;
            }
            let entry = info.get_mut(id).unwrap();
            entry.reached_goal = reached;
            entry.signals = cur[id];
            dones.insert(id.clone(), state.done || timeout);
        }
        let all_done = dones.values().all(|d| *d);
        self.over = all_done;
        self.prev = cur;

        let observations = self.emit();
        Ok(JointStepResult { observations, rewards, dones, all_done, info })
    }

    fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }

    fn map(&self) -> Option<&MapModel> {
        Some(&self.map)
    }
}

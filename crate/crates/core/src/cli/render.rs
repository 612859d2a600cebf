//! Top-down episode rendering to portable pixmaps.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CliError, ResolvedEnv};
use crate::learn::Snapshot;
use crate::pomg::{AgentId, WorldState};
use crate::world::{closest_on_segment, Aabb, ActorState, DynamicsParams, MapModel, Vec2};

/// Longer image side in pixels.
const IMAGE_SIZE: usize = 480;
const MARGIN_M: f64 = 6.0;
/// Action used for agents a script leaves out.
const COAST: usize = 8;

const BACKGROUND: [u8; 3] = [34, 40, 34];
const ROAD: [u8; 3] = [88, 88, 92];
const CENTERLINE: [u8; 3] = [210, 190, 60];
const SIDEWALK: [u8; 3] = [130, 118, 100];
const STOP_LINE: [u8; 3] = [240, 240, 240];
const PALETTE: [[u8; 3]; 6] =
    [[230, 60, 60], [60, 140, 230], [70, 200, 90], [230, 160, 40], [170, 90, 220], [40, 200, 200]];

pub enum RenderPolicy {
    /// Greedy actions from trained (or freshly initialized) parameters.
    Greedy(Snapshot),
    /// Fixed actions per tick; the episode ends with the script.
    Script(Vec<BTreeMap<AgentId, usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSummary {
    pub frames: Vec<PathBuf>,
    pub trajectory: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTick {
    pub tick: u64,
    pub actors: BTreeMap<AgentId, ActorState>,
    pub actions: BTreeMap<AgentId, usize>,
    pub rewards: BTreeMap<AgentId, f64>,
    pub dones: BTreeMap<AgentId, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub env: String,
    pub seed: u64,
    pub initial: BTreeMap<AgentId, ActorState>,
    pub goals: BTreeMap<AgentId, Vec2>,
    pub ticks: Vec<TrajectoryTick>,
}

/// RGB raster with a world-to-pixel transform (y up in the world).
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
    origin: Vec2,
    scale: f64,
}

impl Canvas {
    pub fn new(bounds: Aabb) -> Self {
        let w = bounds.width().max(1.0) + 2.0 * MARGIN_M;
        let h = bounds.height().max(1.0) + 2.0 * MARGIN_M;
        let scale = IMAGE_SIZE as f64 / w.max(h);
        let width = ((w * scale).ceil() as usize).max(1);
        let height = ((h * scale).ceil() as usize).max(1);
        Self {
            width,
            height,
            pixels: vec![BACKGROUND; width * height],
            origin: Vec2::new(bounds.min.x - MARGIN_M, bounds.max.y + MARGIN_M),
            scale,
        }
    }

    /// World coordinates of a pixel center.
    fn world(&self, px: usize, py: usize) -> Vec2 {
        Vec2::new(self.origin.x + (px as f64 + 0.5) / self.scale, self.origin.y - (py as f64 + 0.5) / self.scale)
    }

    fn pixel_range(&self, b: Aabb) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let clamp_x = |x: f64| (((x - self.origin.x) * self.scale).floor().max(0.0) as usize).min(self.width);
        let clamp_y = |y: f64| (((self.origin.y - y) * self.scale).floor().max(0.0) as usize).min(self.height);
        (
            clamp_x(b.min.x)..(clamp_x(b.max.x) + 1).min(self.width),
            clamp_y(b.max.y)..(clamp_y(b.min.y) + 1).min(self.height),
        )
    }

    /// Paints every pixel in `bounds` whose center satisfies `inside`.
    pub fn fill(&mut self, bounds: Aabb, color: [u8; 3], inside: impl Fn(Vec2) -> bool) {
        let (xs, ys) = self.pixel_range(bounds);
        for py in ys {
            for px in xs.clone() {
                if inside(self.world(px, py)) {
                    self.pixels[py * self.width + px] = color;
                }
            }
        }
    }

    /// Segment of the given width in meters (at least one pixel).
    pub fn line(&mut self, a: Vec2, b: Vec2, width_m: f64, color: [u8; 3]) {
        let r = (width_m * 0.5).max(0.6 / self.scale);
        let mut bounds = Aabb::from_points([a, b].iter());
        bounds.min = bounds.min - Vec2::new(r, r);
        bounds.max = bounds.max + Vec2::new(r, r);
        self.fill(bounds, color, |p| closest_on_segment(p, a, b).0.distance(p) <= r);
    }

    pub fn polyline(&mut self, points: &[Vec2], width_m: f64, color: [u8; 3]) {
        for w in points.windows(2) {
            self.line(w[0], w[1], width_m, color);
        }
    }

    pub fn disc(&mut self, c: Vec2, radius_m: f64, color: [u8; 3]) {
        let r = radius_m.max(0.6 / self.scale);
        let bounds = Aabb { min: c - Vec2::new(r, r), max: c + Vec2::new(r, r) };
        self.fill(bounds, color, |p| p.distance(c) <= r);
    }
}

/// Binary PPM (P6).
pub fn write_ppm(path: &Path, canvas: &Canvas) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P6\n{} {}\n255\n", canvas.width, canvas.height)?;
    for px in &canvas.pixels {
        f.write_all(px)?;
    }
    f.flush()
}

fn scene_bounds(map: Option<&MapModel>, world: &WorldState) -> Aabb {
    let mut b = map.map_or_else(Aabb::empty, |m| m.bounds);
    for a in world.actors.values() {
        b.include(a.position);
    }
    for g in world.goals.values() {
        b.include(*g);
    }
    if !b.min.x.is_finite() {
        b = Aabb { min: Vec2::ZERO, max: Vec2::ZERO };
    }
    b
}

fn draw_map(canvas: &mut Canvas, map: &MapModel) {
    for sw in &map.sidewalks {
        let poly = sw.clone();
        canvas.fill(sw.aabb(), SIDEWALK, |p| poly.contains(p));
    }
    for lane in &map.lanes {
        canvas.polyline(&lane.points, lane.width, ROAD);
    }
    for lane in &map.lanes {
        canvas.polyline(&lane.points, 0.0, CENTERLINE);
    }
    for s in &map.stop_lines {
        canvas.disc(*s, 0.8, STOP_LINE);
    }
}

fn draw_frame(map: Option<&MapModel>, world: &WorldState, bounds: Aabb, dynamics: &DynamicsParams) -> Canvas {
    let mut canvas = Canvas::new(bounds);
    if let Some(m) = map {
        draw_map(&mut canvas, m);
    }
    for (k, route) in world.routes.values().enumerate() {
        canvas.polyline(&route.path, 0.0, dim(PALETTE[k % PALETTE.len()]));
    }
    let colors: BTreeMap<&AgentId, [u8; 3]> =
        world.actors.keys().enumerate().map(|(k, id)| (id, PALETTE[k % PALETTE.len()])).collect();
    for (id, goal) in &world.goals {
        let c = colors.get(id).copied().unwrap_or(STOP_LINE);
        canvas.disc(*goal, 1.2, c);
        canvas.disc(*goal, 0.5, BACKGROUND);
    }
    for (id, actor) in &world.actors {
        let c = colors[id];
        let c = if actor.done { dim(c) } else { c };
        let fp = actor.footprint(dynamics);
        canvas.fill(fp.aabb(), c, |p| fp.contains(p));
        // heading marker at the front bumper
        let nose = actor.position + Vec2::from_angle(actor.heading) * (fp.length * 0.5);
        canvas.disc(nose, 0.5, STOP_LINE);
    }
    canvas
}

fn dim(c: [u8; 3]) -> [u8; 3] {
    [c[0] / 2, c[1] / 2, c[2] / 2]
}

/// Runs one episode and writes `frame_NNNNN.ppm` per tick (numbered from 1)
/// and `trajectory.json` into `out_dir`.
pub fn render_episode(
    env: &ResolvedEnv,
    policy: &RenderPolicy,
    seed: u64,
    out_dir: &Path,
    max_ticks: Option<u32>,
) -> Result<RenderSummary, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut instance = env.make()?;
    let agents = instance.agent_ids();
    if let RenderPolicy::Greedy(s) = policy {
        if s.agents != agents {
            return Err(CliError::config("ShapeMismatch", "checkpoint agents differ from the environment's"));
        }
    }
    let dynamics = match &env.spec.source {
        crate::pomg::EnvSource::Driving(_) => env.spec.config.dynamics,
        crate::pomg::EnvSource::GridIntersection(_) => DynamicsParams::default(),
    };
    let mut obs = instance.reset(seed)?;
    let world = instance.world().expect("reset builds a world");
    let bounds = scene_bounds(instance.map(), world);
    let mut trajectory = Trajectory {
        env: env.name.clone(),
        seed,
        initial: world.actors.clone(),
        goals: world.goals.clone(),
        ticks: Vec::new(),
    };
    let limit = max_ticks.unwrap_or(u32::MAX).min(instance.max_steps()) as usize;
    let mut done: BTreeMap<AgentId, bool> = agents.iter().map(|a| (a.clone(), false)).collect();
    let mut frames = Vec::new();
    for t in 0..limit {
        let actions: BTreeMap<AgentId, usize> = match policy {
            RenderPolicy::Script(script) => {
                let Some(row) = script.get(t) else { break };
                agents.iter().filter(|a| !done[*a]).map(|a| (a.clone(), row.get(a).copied().unwrap_or(COAST))).collect()
            }
            RenderPolicy::Greedy(s) => agents
                .iter()
                .enumerate()
                .filter(|(_, a)| !done[*a])
                .map(|(i, a)| (a.clone(), s.brain_for(i).greedy(&obs[a])))
                .collect(),
        };
        let res = instance.step(&actions)?;
        let world = instance.world().expect("stepping keeps the world");
        let frame = draw_frame(instance.map(), world, bounds, &dynamics);
        let path = out_dir.join(format!("frame_{:05}.ppm", t + 1));
        write_ppm(&path, &frame).map_err(|e| CliError::io(&path, e))?;
        frames.push(path);
        trajectory.ticks.push(TrajectoryTick {
            tick: world.env.tick,
            actors: world.actors.clone(),
            actions,
            rewards: res.rewards.clone(),
            dones: res.dones.clone(),
        });
        done.clone_from(&res.dones);
        obs = res.observations;
        if res.all_done {
            break;
        }
    }
    let path = out_dir.join("trajectory.json");
    let text = serde_json::to_string_pretty(&trajectory).expect("trajectory serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(RenderSummary { frames, trajectory: path })
}

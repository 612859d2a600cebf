//! Shortest-path routing over the lane graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::geometry::{closest_on_segment, Vec2};
use super::map::MapModel;
use super::WorldError;

/// Start and goal points must lie this close to a lane.
pub const MAX_PROJECTION_DISTANCE: f64 = 5.0;
/// Re-projection only searches this far behind / ahead of the last progress.
const REPROJECT_BEHIND: f64 = 10.0;
const REPROJECT_AHEAD: f64 = 50.0;

/// A planned path from a start projection to a goal projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    /// Lane indices in travel order.
    pub lanes: Vec<usize>,
    /// Centreline polyline from start projection to goal projection.
    pub path: Vec<Vec2>,
    cumulative: Vec<f64>,
    /// Arc length (m) of the last re-projection along `path`.
    pub progress: f64,
    /// Remaining distance to the goal in kilometres.
    pub remaining_length: f64,
}

impl Route {
    fn from_path(lanes: Vec<usize>, mut path: Vec<Vec2>) -> Self {
        path.dedup_by(|a, b| a.distance(*b) < 1e-12);
        if path.len() == 1 {
            path.push(path[0]);
        }
        let mut cumulative = vec![0.0];
        for w in path.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + w[0].distance(w[1]));
        }
        let total = *cumulative.last().unwrap();
        Self { lanes, path, cumulative, progress: 0.0, remaining_length: total / 1000.0 }
    }

    /// Total path length in metres.
    pub fn total_length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn goal(&self) -> Vec2 {
        *self.path.last().unwrap()
    }

    pub fn start(&self) -> Vec2 {
        self.path[0]
    }

    /// Projects `p` onto the path near the last progress without committing.
    /// Returns `(progress_m, remaining_km)`.
    pub fn remaining_from(&self, p: Vec2) -> (f64, f64) {
        let lo = self.progress - REPROJECT_BEHIND;
        let hi = self.progress + REPROJECT_AHEAD;
        let mut best = (f64::INFINITY, self.progress);
        for (i, w) in self.path.windows(2).enumerate() {
            let (c0, c1) = (self.cumulative[i], self.cumulative[i + 1]);
            if c1 < lo || c0 > hi {
                continue;
            }
            let (q, t) = closest_on_segment(p, w[0], w[1]);
            let d = p.distance(q);
            if d < best.0 {
                best = (d, c0 + t * (c1 - c0));
            }
        }
        (best.1, ((self.total_length() - best.1) / 1000.0).max(0.0))
    }

    /// Re-projects `p` and commits the new progress. Returns the remaining
    /// length in km.
    pub fn reproject(&mut self, p: Vec2) -> f64 {
        let (progress, remaining) = self.remaining_from(p);
        self.progress = progress;
        self.remaining_length = remaining;
        remaining
    }

    /// Signed lateral offset of `p` from the path at the current progress
    /// (positive to the left of travel).
    pub fn lateral_offset(&self, p: Vec2) -> f64 {
        let at = self.point_at(self.progress);
        let dir = Vec2::from_angle(self.heading_at(self.progress));
        dir.cross(p - at)
    }

    /// Point at arc length `s` along the path.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.total_length());
        for (i, w) in self.path.windows(2).enumerate() {
            let (c0, c1) = (self.cumulative[i], self.cumulative[i + 1]);
            if s <= c1 {
                if c1 == c0 {
                    return w[0];
                }
                return w[0] + (w[1] - w[0]) * ((s - c0) / (c1 - c0));
            }
        }
        self.goal()
    }

    /// Direction of travel at arc length `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.total_length());
        for (i, w) in self.path.windows(2).enumerate() {
            if s <= self.cumulative[i + 1] && w[0].distance(w[1]) > 0.0 {
                let d = w[1] - w[0];
                return d.y.atan2(d.x);
            }
        }
        0.0
    }
}

#[derive(Debug, PartialEq)]
struct Frontier {
    cost: f64,
    lane: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on (cost, lane)
        o.cost.total_cmp(&self.cost).then_with(|| o.lane.cmp(&self.lane))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Plans the shortest lane-graph path from `start` to `goal`.
///
/// Both points are projected onto their nearest lanes. Ties between equally
/// short paths resolve towards lower lane indices.
pub fn plan_route(map: &MapModel, start: Vec2, goal: Vec2) -> Result<Route, WorldError> {
    let sp =
        map.project(start).filter(|p| p.distance <= MAX_PROJECTION_DISTANCE).ok_or(WorldError::OffLaneGraph(start))?;
    let gp =
        map.project(goal).filter(|p| p.distance <= MAX_PROJECTION_DISTANCE).ok_or(WorldError::OffLaneGraph(goal))?;

    if sp.lane == gp.lane && gp.s >= sp.s {
        let lane = &map.lanes[sp.lane];
        return Ok(Route::from_path(vec![sp.lane], lane.slice(sp.s, gp.s)));
    }

    // cost[j] = distance from the start projection to the start of lane j
    let n = map.lanes.len();
    let mut cost = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    let exit_cost = map.lanes[sp.lane].length() - sp.s;
    for &next in &map.successors[sp.lane] {
        if exit_cost < cost[next] {
            cost[next] = exit_cost;
            prev[next] = None;
            heap.push(Frontier { cost: exit_cost, lane: next });
        }
    }
    let mut done = vec![false; n];
    while let Some(Frontier { cost: c, lane }) = heap.pop() {
        if done[lane] {
            continue;
        }
        done[lane] = true;
        if lane == gp.lane {
            break;
        }
        let through = c + map.lanes[lane].length();
        for &next in &map.successors[lane] {
            if through < cost[next] {
                cost[next] = through;
                prev[next] = Some(lane);
                heap.push(Frontier { cost: through, lane: next });
            }
        }
    }
    if !cost[gp.lane].is_finite() {
        return Err(WorldError::NoPath);
    }

    let mut chain = vec![gp.lane];
    let mut cur = gp.lane;
    while let Some(p) = prev[cur] {
        chain.push(p);
        cur = p;
    }
    chain.push(sp.lane);
    chain.reverse();

    let mut path = map.lanes[sp.lane].slice(sp.s, map.lanes[sp.lane].length());
    for &mid in &chain[1..chain.len() - 1] {
        path.extend(map.lanes[mid].points.iter().copied());
    }
    path.extend(map.lanes[gp.lane].slice(0.0, gp.s));
    Ok(Route::from_path(chain, path))
}

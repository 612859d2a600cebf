//! Lane-graph maps and built-in templates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::geometry::{closest_on_segment, Aabb, Obb, Polygon, Vec2};
use super::WorldError;

/// Endpoints closer than this are the same graph node.
const NODE_EPS: f64 = 1e-3;
/// A stop line must lie within this distance of a lane centreline.
const STOP_LINE_TOL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneSpec {
    pub points: Vec<Vec2>,
    #[serde(default = "default_lane_width")]
    pub width: f64,
}

fn default_lane_width() -> f64 {
    3.5
}

/// Declarative description of a map, as stored in map template files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MapSpec {
    #[serde(default)]
    pub name: String,
    pub lanes: Vec<LaneSpec>,
    #[serde(default)]
    pub sidewalks: Vec<Polygon>,
    #[serde(default)]
    pub stop_lines: Vec<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Aabb>,
    /// Permit lane-graph islands (reachability is then checked per route).
    #[serde(default)]
    pub allow_disconnected: bool,
}

/// A directed lane centreline.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: usize,
    pub points: Vec<Vec2>,
    pub width: f64,
    cumulative: Vec<f64>,
    pub start_node: usize,
    pub end_node: usize,
    /// Arc-length position of this lane's stop line, if any.
    pub stop_line: Option<f64>,
}

/// Nearest point on a lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneProjection {
    pub lane: usize,
    /// Arc length from the lane start.
    pub s: f64,
    pub point: Vec2,
    pub distance: f64,
}

impl Lane {
    fn new(id: usize, spec: &LaneSpec) -> Self {
        let mut cumulative = Vec::with_capacity(spec.points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in spec.points.windows(2) {
            acc += w[0].distance(w[1]);
            cumulative.push(acc);
        }
        Self {
            id,
            points: spec.points.clone(),
            width: spec.width,
            cumulative,
            start_node: 0,
            end_node: 0,
            stop_line: None,
        }
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn start(&self) -> Vec2 {
        self.points[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.points.last().expect("lane has points")
    }

    pub fn project(&self, p: Vec2) -> LaneProjection {
        let mut best = LaneProjection { lane: self.id, s: 0.0, point: self.points[0], distance: f64::INFINITY };
        for (i, w) in self.points.windows(2).enumerate() {
            let (q, t) = closest_on_segment(p, w[0], w[1]);
            let d = p.distance(q);
            if d < best.distance {
                let s = self.cumulative[i] + t * (self.cumulative[i + 1] - self.cumulative[i]);
                best = LaneProjection { lane: self.id, s, point: q, distance: d };
            }
        }
        best
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        let i = self.piece_index(s);
        let (a, b) = (self.points[i], self.points[i + 1]);
        let span = self.cumulative[i + 1] - self.cumulative[i];
        if span == 0.0 {
            return a;
        }
        a + (b - a) * ((s - self.cumulative[i]) / span)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let i = self.piece_index(s.clamp(0.0, self.length()));
        let d = self.points[i + 1] - self.points[i];
        d.y.atan2(d.x)
    }

    fn piece_index(&self, s: f64) -> usize {
        let n = self.points.len() - 1;
        (0..n).find(|&i| s <= self.cumulative[i + 1]).unwrap_or(n - 1)
    }

    /// Sub-polyline between arc positions `s0 <= s1`.
    pub fn slice(&self, s0: f64, s1: f64) -> Vec<Vec2> {
        let mut out = vec![self.point_at(s0)];
        for (i, p) in self.points.iter().enumerate() {
            if self.cumulative[i] > s0 && self.cumulative[i] < s1 {
                out.push(*p);
            }
        }
        out.push(self.point_at(s1));
        out
    }
}

/// One straight piece of a lane, used for area queries.
#[derive(Debug, Clone, PartialEq)]
pub struct LanePiece {
    pub lane: usize,
    pub area: Obb,
    pub direction: Vec2,
    pub aabb: Aabb,
}

/// Validated, immutable map.
#[derive(Debug, Clone, PartialEq)]
pub struct MapModel {
    pub name: String,
    pub lanes: Vec<Lane>,
    pub sidewalks: Vec<Polygon>,
    pub sidewalk_aabbs: Vec<Aabb>,
    pub stop_lines: Vec<Vec2>,
    pub nodes: Vec<Vec2>,
    /// Nodes where three or more lanes meet.
    pub intersection_nodes: Vec<usize>,
    pub successors: Vec<Vec<usize>>,
    pub pieces: Vec<LanePiece>,
    pub bounds: Aabb,
}

impl MapModel {
    /// Nearest lane to `p` (ties go to the lowest lane index).
    pub fn project(&self, p: Vec2) -> Option<LaneProjection> {
        self.lanes.iter().map(|l| l.project(p)).fold(None, |best: Option<LaneProjection>, cand| match best {
            Some(b) if b.distance <= cand.distance => Some(b),
            _ => Some(cand),
        })
    }

    /// Nearest lane whose direction is within 90 degrees of `heading`,
    /// falling back to the nearest lane of any direction.
    pub fn project_directed(&self, p: Vec2, heading: f64) -> Option<LaneProjection> {
        let fwd = Vec2::from_angle(heading);
        let aligned = self
            .lanes
            .iter()
            .map(|l| l.project(p))
            .filter(|pr| Vec2::from_angle(self.lanes[pr.lane].heading_at(pr.s)).dot(fwd) >= 0.0)
            .fold(None, |best: Option<LaneProjection>, cand| match best {
                Some(b) if b.distance <= cand.distance => Some(b),
                _ => Some(cand),
            });
        aligned.or_else(|| self.project(p))
    }

    /// Distance along the current lane to its stop line, if one lies ahead.
    pub fn stop_line_ahead(&self, p: Vec2, heading: f64) -> Option<f64> {
        let pr = self.project_directed(p, heading)?;
        let lane = &self.lanes[pr.lane];
        if pr.distance > lane.width {
            return None;
        }
        lane.stop_line.filter(|s| *s >= pr.s).map(|s| s - pr.s)
    }
}

fn find_or_insert_node(nodes: &mut Vec<Vec2>, p: Vec2) -> usize {
    if let Some(i) = nodes.iter().position(|n| n.distance(p) < NODE_EPS) {
        return i;
    }
    nodes.push(p);
    nodes.len() - 1
}

fn pieces_overlap(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d = a1 - a0;
    let len = d.norm();
    if len == 0.0 {
        return false;
    }
    let u = d * (1.0 / len);
    let off0 = u.cross(b0 - a0).abs();
    let off1 = u.cross(b1 - a0).abs();
    if off0 > 1e-6 || off1 > 1e-6 {
        return false;
    }
    let (t0, t1) = ((b0 - a0).dot(u), (b1 - a0).dot(u));
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    hi.min(len) - lo.max(0.0) > 1e-3
}

/// Validates a [`MapSpec`] and derives its lane graph.
pub fn build_map(spec: &MapSpec) -> Result<MapModel, WorldError> {
    if spec.lanes.is_empty() {
        return Err(WorldError::DisconnectedGraph);
    }
    let mut lanes = Vec::with_capacity(spec.lanes.len());
    for (i, ls) in spec.lanes.iter().enumerate() {
        if ls.points.len() < 2 || ls.width.is_nan() || ls.width <= 0.0 {
            return Err(WorldError::InvalidLane(i));
        }
        let lane = Lane::new(i, ls);
        if lane.length().is_nan()
            || lane.length() <= 0.0
            || ls.points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(WorldError::InvalidLane(i));
        }
        lanes.push(lane);
    }

    for i in 0..lanes.len() {
        for j in i + 1..lanes.len() {
            for a in lanes[i].points.windows(2) {
                for b in lanes[j].points.windows(2) {
                    if pieces_overlap(a[0], a[1], b[0], b[1]) {
                        return Err(WorldError::OverlappingLanes(i, j));
                    }
                }
            }
        }
    }

    let mut nodes = Vec::new();
    for lane in &mut lanes {
        lane.start_node = find_or_insert_node(&mut nodes, lane.start());
        lane.end_node = find_or_insert_node(&mut nodes, lane.end());
    }
    let mut degree = vec![0usize; nodes.len()];
    for lane in &lanes {
        degree[lane.start_node] += 1;
        degree[lane.end_node] += 1;
    }
    let intersection_nodes: Vec<usize> = (0..nodes.len()).filter(|&n| degree[n] >= 3).collect();

    let successors: Vec<Vec<usize>> = lanes
        .iter()
        .map(|a| lanes.iter().filter(|b| b.start_node == a.end_node && b.id != a.id).map(|b| b.id).collect())
        .collect();

    if !spec.allow_disconnected && !weakly_connected(&lanes, nodes.len()) {
        return Err(WorldError::DisconnectedGraph);
    }

    for (k, sl) in spec.stop_lines.iter().enumerate() {
        let hits: Vec<LaneProjection> =
            lanes.iter().map(|l| l.project(*sl)).filter(|p| p.distance <= STOP_LINE_TOL).collect();
        if hits.len() != 1 {
            return Err(WorldError::InvalidStopLine(k));
        }
        let lane = &mut lanes[hits[0].lane];
        if !intersection_nodes.contains(&lane.end_node) || lane.stop_line.is_some() {
            return Err(WorldError::InvalidStopLine(k));
        }
        lane.stop_line = Some(hits[0].s);
    }

    let mut pieces = Vec::new();
    for lane in &lanes {
        for w in lane.points.windows(2) {
            let d = w[1] - w[0];
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            let area = Obb::new((w[0] + w[1]) * 0.5, d.y.atan2(d.x), len, lane.width);
            pieces.push(LanePiece { lane: lane.id, aabb: area.aabb(), area, direction: d * (1.0 / len) });
        }
    }

    let sidewalk_aabbs: Vec<Aabb> = spec.sidewalks.iter().map(Polygon::aabb).collect();
    let bounds = spec.bounds.unwrap_or_else(|| {
        let mut b = pieces.iter().fold(Aabb::empty(), |acc, p| acc.union(&p.aabb));
        for sa in &sidewalk_aabbs {
            b = b.union(sa);
        }
        b
    });

    Ok(MapModel {
        name: spec.name.clone(),
        lanes,
        sidewalks: spec.sidewalks.clone(),
        sidewalk_aabbs,
        stop_lines: spec.stop_lines.clone(),
        nodes,
        intersection_nodes,
        successors,
        pieces,
        bounds,
    })
}

fn weakly_connected(lanes: &[Lane], n_nodes: usize) -> bool {
    let mut parent: Vec<usize> = (0..n_nodes).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for lane in lanes {
        let (a, b) = (find(&mut parent, lane.start_node), find(&mut parent, lane.end_node));
        parent[a] = b;
    }
    let root = find(&mut parent, 0);
    (0..n_nodes).all(|n| find(&mut parent, n) == root)
}

// ---------------------------------------------------------------------------
// Built-in templates

/// y coordinate of the eastbound lane through the Town3-like intersection.
/// The lane passes exactly through (147.6, 62.6) and (191.2, 62.7).
fn eastbound_y(x: f64) -> f64 {
    62.6 + (x - 147.6) * (0.1 / 43.6)
}

/// Quarter-circle polyline from `from` to `to` around `center`.
fn arc(center: Vec2, from: Vec2, to: Vec2, pieces: usize) -> Vec<Vec2> {
    let a0 = (from - center).y.atan2((from - center).x);
    let mut a1 = (to - center).y.atan2((to - center).x);
    // take the short way round
    let mut diff = a1 - a0;
    while diff > std::f64::consts::PI {
        diff -= std::f64::consts::TAU;
    }
    while diff < -std::f64::consts::PI {
        diff += std::f64::consts::TAU;
    }
    a1 = a0 + diff;
    let r0 = from.distance(center);
    let r1 = to.distance(center);
    let mut pts: Vec<Vec2> = (0..=pieces)
        .map(|k| {
            let t = k as f64 / pieces as f64;
            let a = a0 + (a1 - a0) * t;
            let r = r0 + (r1 - r0) * t;
            center + Vec2::from_angle(a) * r
        })
        .collect();
    pts[0] = from;
    *pts.last_mut().unwrap() = to;
    pts
}

/// Stop-sign controlled three-way intersection laid out around the
/// reference Town03 start and goal coordinates.
///
/// Main road runs east-west with the eastbound lane on the line through
/// (147.6, 62.6) and (191.2, 62.7) and the westbound lane at y = 59. The side
/// road joins from +y with its inbound lane at x = 170.5 and outbound lane at
/// x = 167.
pub fn town3_like_3way() -> MapSpec {
    let w = 3.5;
    let (x_w, x_e) = (165.0, 172.5); // intersection box edges on the main road
    let y_side = 64.5; // side-road mouth
    let (x_in, x_out) = (170.5, 167.0);
    let e = |x: f64| Vec2::new(x, eastbound_y(x));
    let lane = |points: Vec<Vec2>| LaneSpec { points, width: w };

    let lanes = vec![
        // 0: eastbound approach, 1: eastbound through, 2: eastbound exit
        lane(vec![e(100.0), e(x_w)]),
        lane(vec![e(x_w), e(x_e)]),
        lane(vec![e(x_e), e(230.0)]),
        // 3: westbound approach, 4: westbound through, 5: westbound exit
        lane(vec![Vec2::new(230.0, 59.0), Vec2::new(x_e, 59.0)]),
        lane(vec![Vec2::new(x_e, 59.0), Vec2::new(x_w, 59.0)]),
        lane(vec![Vec2::new(x_w, 59.0), Vec2::new(100.0, 59.0)]),
        // 6: side road inbound, 7: side road outbound
        lane(vec![Vec2::new(x_in, 130.0), Vec2::new(x_in, y_side)]),
        lane(vec![Vec2::new(x_out, y_side), Vec2::new(x_out, 130.0)]),
        // 8: side road -> westbound (left turn)
        lane(arc(Vec2::new(x_w, y_side), Vec2::new(x_in, y_side), Vec2::new(x_w, 59.0), 8)),
        // 9: westbound -> side road (left turn)
        lane(arc(Vec2::new(x_e, y_side), Vec2::new(x_e, 59.0), Vec2::new(x_out, y_side), 8)),
        // 10: eastbound -> side road (right turn)
        lane(arc(Vec2::new(x_w, y_side), e(x_w), Vec2::new(x_out, y_side), 6)),
        // 11: side road -> eastbound (right turn)
        lane(arc(Vec2::new(x_e, y_side), Vec2::new(x_in, y_side), e(x_e), 6)),
    ];

    let edge_n = 59.0 - w / 2.0; // north kerb of the main road
    let edge_s = eastbound_y(230.0).max(eastbound_y(100.0)) + w / 2.0;
    let side_w = x_out - w / 2.0;
    let side_e = x_in + w / 2.0;
    let sidewalks = vec![
        Polygon::rect(Vec2::new(100.0, edge_n - 4.0), Vec2::new(230.0, edge_n)),
        Polygon::rect(Vec2::new(100.0, edge_s), Vec2::new(side_w, edge_s + 4.0)),
        Polygon::rect(Vec2::new(side_e, edge_s), Vec2::new(230.0, edge_s + 4.0)),
        Polygon::rect(Vec2::new(side_w - 4.0, edge_s + 4.0), Vec2::new(side_w, 130.0)),
        Polygon::rect(Vec2::new(side_e, edge_s + 4.0), Vec2::new(side_e + 4.0, 130.0)),
    ];

    MapSpec {
        name: "town3_like_3way".into(),
        lanes,
        sidewalks,
        stop_lines: vec![e(x_w - 2.0), Vec2::new(x_e + 2.0, 59.0), Vec2::new(x_in, y_side + 2.0)],
        bounds: Some(Aabb { min: Vec2::new(100.0, edge_n - 4.0), max: Vec2::new(230.0, 130.0) }),
        allow_disconnected: false,
    }
}

/// Straight two-lane eastbound highway with one westbound lane.
pub fn straight_highway() -> MapSpec {
    let lane = |y: f64, x0: f64, x1: f64| LaneSpec { points: vec![Vec2::new(x0, y), Vec2::new(x1, y)], width: 3.5 };
    MapSpec {
        name: "straight_highway".into(),
        // The westbound lane shares no node with the eastbound ones, so the
        // graph is two islands by construction.
        lanes: vec![lane(0.0, 0.0, 400.0), lane(3.5, 0.0, 400.0), lane(-3.5, 400.0, 0.0)],
        sidewalks: vec![
            Polygon::rect(Vec2::new(0.0, 5.25), Vec2::new(400.0, 9.25)),
            Polygon::rect(Vec2::new(0.0, -9.25), Vec2::new(400.0, -5.25)),
        ],
        stop_lines: vec![],
        bounds: Some(Aabb { min: Vec2::new(0.0, -9.25), max: Vec2::new(400.0, 9.25) }),
        allow_disconnected: true,
    }
}

/// A single straight lane of the given length along +x.
pub fn single_lane(length: f64) -> MapSpec {
    MapSpec {
        name: "single_lane".into(),
        lanes: vec![LaneSpec { points: vec![Vec2::ZERO, Vec2::new(length, 0.0)], width: 3.5 }],
        ..MapSpec::default()
    }
}

/// Resolves a template name. `Town03` is accepted as an alias of the
/// three-way intersection.
pub fn template(name: &str) -> Option<MapSpec> {
    match name {
        "town3_like_3way" | "Town03" => Some(town3_like_3way()),
        "straight_highway" => Some(straight_highway()),
        "single_lane" => Some(single_lane(100.0)),
        _ => None,
    }
}

pub fn template_names() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("town3_like_3way", "stop-sign controlled three-way intersection (alias Town03)"),
        ("straight_highway", "two eastbound lanes and one westbound lane"),
        ("single_lane", "one straight 100 m lane"),
    ])
}

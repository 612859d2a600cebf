//! Scenario files: map reference, per-actor start/goal, weather, time limit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use super::kinematics::ActorType;
use super::map::{build_map, template, MapModel, MapSpec};
use super::route::MAX_PROJECTION_DISTANCE;
use super::WorldError;

/// Coordinates are `[x, y]` or `[x, y, z]`; `z` is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Coord {
    pub xy: Vec2,
    pub z: Option<f64>,
}

impl TryFrom<Vec<f64>> for Coord {
    type Error = String;
    fn try_from(v: Vec<f64>) -> Result<Self, String> {
        match v.as_slice() {
            [x, y] => Ok(Coord { xy: Vec2::new(*x, *y), z: None }),
            [x, y, z] => Ok(Coord { xy: Vec2::new(*x, *y), z: Some(*z) }),
            _ => Err(format!("coordinate must have 2 or 3 components, got {}", v.len())),
        }
    }
}

impl From<Coord> for Vec<f64> {
    fn from(c: Coord) -> Self {
        match c.z {
            Some(z) => vec![c.xy.x, c.xy.y, z],
            None => vec![c.xy.x, c.xy.y],
        }
    }
}

impl Coord {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { xy: Vec2::new(x, y), z: Some(z) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioActor {
    pub start: Coord,
    pub end: Coord,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub actor_type: Option<ActorType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Template name or path to a map JSON file.
    pub map: String,
    pub actors: BTreeMap<String, ScenarioActor>,
    #[serde(default = "default_weather")]
    pub weather_distribution: Vec<u32>,
    pub max_steps: u32,
}

fn default_weather() -> Vec<u32> {
    vec![0]
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        serde_json::from_str(text).map_err(|e| WorldError::BadScenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| WorldError::BadScenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn map_spec(&self) -> Result<MapSpec, WorldError> {
        if let Some(spec) = template(&self.map) {
            return Ok(spec);
        }
        let text = std::fs::read_to_string(&self.map).map_err(|e| {
            WorldError::BadScenario(format!("map {:?} is neither a template nor a readable file: {e}", self.map))
        })?;
        serde_json::from_str(&text).map_err(|e| WorldError::BadScenario(format!("map {:?}: {e}", self.map)))
    }

    /// Builds the map and checks every start and goal lies near a lane.
    pub fn validate(&self) -> Result<MapModel, WorldError> {
        if self.max_steps == 0 {
            return Err(WorldError::BadScenario("max_steps must be positive".into()));
        }
        if self.actors.is_empty() {
            return Err(WorldError::BadScenario("scenario has no actors".into()));
        }
        if self.weather_distribution.is_empty() {
            return Err(WorldError::BadScenario("weather_distribution is empty".into()));
        }
        let map = build_map(&self.map_spec()?)?;
        for (name, actor) in &self.actors {
            for (what, c) in [("start", &actor.start), ("end", &actor.end)] {
                let near = map.project(c.xy).is_some_and(|p| p.distance <= MAX_PROJECTION_DISTANCE);
                if !near {
                    return Err(WorldError::BadScenario(format!("{name}.{what} {:?} is off the lane graph", c.xy)));
                }
            }
        }
        Ok(map)
    }

    /// Keeps only the named actors.
    pub fn restricted_to(&self, names: &[&str]) -> Scenario {
        let mut s = self.clone();
        s.actors.retain(|k, _| names.contains(&k.as_str()));
        s
    }
}

/// Stop-sign three-car scenario on the Town3-like intersection.
pub fn ssui3c_town3() -> Scenario {
    let actor = |s: [f64; 3], e: [f64; 3]| ScenarioActor {
        start: Coord::new(s[0], s[1], s[2]),
        end: Coord::new(e[0], e[1], e[2]),
        actor_type: None,
    };
    Scenario {
        map: "Town03".into(),
        actors: BTreeMap::from([
            ("car1".to_string(), actor([170.5, 80.0, 0.4], [144.0, 59.0, 0.0])),
            ("car2".to_string(), actor([188.0, 59.0, 0.4], [167.0, 75.7, 0.13])),
            ("car3".to_string(), actor([147.6, 62.6, 0.4], [191.2, 62.7, 0.0])),
        ]),
        weather_distribution: vec![0],
        max_steps: 500,
    }
}

/// Three cars on the straight highway.
pub fn highway_3c() -> Scenario {
    let actor = |s: [f64; 2], e: [f64; 2]| ScenarioActor {
        start: Coord { xy: Vec2::new(s[0], s[1]), z: None },
        end: Coord { xy: Vec2::new(e[0], e[1]), z: None },
        actor_type: Some(ActorType::Vehicle4W),
    };
    Scenario {
        map: "straight_highway".into(),
        actors: BTreeMap::from([
            ("car1".to_string(), actor([20.0, 0.0], [300.0, 0.0])),
            ("car2".to_string(), actor([40.0, 3.5], [320.0, 3.5])),
            ("car3".to_string(), actor([380.0, -3.5], [100.0, -3.5])),
        ]),
        weather_distribution: vec![0, 1, 2],
        max_steps: 500,
    }
}

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "SSUI3C_TOWN3" => Some(ssui3c_town3()),
        "SSUI1C_TOWN3_CAR3" => Some(ssui3c_town3().restricted_to(&["car3"])),
        "HIWAY3C" => Some(highway_3c()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_listing_parses() {
        let text = r#"{
            "map": "Town03",
            "actors": {
                "car1": {"start": [170.5, 80, 0.4], "end": [144, 59, 0]},
                "car2": {"start": [188, 59, 0.4], "end": [167, 75.7, 0.13]},
                "car3": {"start": [147.6, 62.6, 0.4], "end": [191.2, 62.7, 0]}
            },
            "weather_distribution": [0],
            "max_steps": 500
        }"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s, ssui3c_town3());
        s.validate().unwrap();
    }

    #[test]
    fn rejects_bad_scenarios() {
        let mut s = ssui3c_town3();
        s.max_steps = 0;
        assert!(matches!(s.validate(), Err(WorldError::BadScenario(_))));
        let mut s = ssui3c_town3();
        s.actors.get_mut("car1").unwrap().end = Coord::new(0.0, 0.0, 0.0);
        assert!(matches!(s.validate(), Err(WorldError::BadScenario(_))));
        assert!(
            Scenario::from_json(r#"{"map":"Town03","actors":{"a":{"start":[1],"end":[1,2]}},"max_steps":5}"#).is_err()
        );
    }

    #[test]
    fn builtins_validate() {
        for name in ["SSUI3C_TOWN3", "SSUI1C_TOWN3_CAR3", "HIWAY3C"] {
            builtin(name).unwrap().validate().unwrap();
        }
    }
}

//! Built-in environment names and construction from a registry entry.

use std::collections::BTreeMap;

use super::config::{EnvConfig, EnvSource, EnvSpec};
use super::{DrivingEnv, EnvError, GridIntersectionEnv, GridParams, MultiAgentEnv};
use crate::env_id::{EnvId, EnvRegistry};
use crate::world::scenario::{builtin, highway_3c, ssui3c_town3};
use crate::world::ActorType;

fn heterogeneous_town3() -> crate::world::Scenario {
    let mut s = ssui3c_town3();
    s.actors.get_mut("car1").unwrap().actor_type = Some(ActorType::Vehicle4W);
    s.actors.get_mut("car2").unwrap().actor_type = Some(ActorType::Vehicle2W);
    s.actors.get_mut("car3").unwrap().actor_type = Some(ActorType::Vehicle4W);
    s
}

/// The shipped environments: the four reference names plus single-agent,
/// grid, adversarial, asynchronous, fully observable and cooperative
/// variants of the stop-sign intersection.
pub fn default_registry() -> EnvRegistry {
    let town3 = EnvSpec::driving(ssui3c_town3());
    let async_cfg = EnvConfig {
        action_repeat: BTreeMap::from([("car1".into(), 1), ("car2".into(), 2), ("car3".into(), 3)]),
        ..EnvConfig::default()
    };
    let entries: Vec<(&str, EnvSpec)> = vec![
        ("HomoNcomIndePOIntrxMASS3CTwn3-v0", town3.clone()),
        ("HeteCommIndePOIntrxMAEnv-v0", EnvSpec::driving(heterogeneous_town3())),
        ("HeteCommCoopPOUrbanMAEnv-v0", EnvSpec::driving(heterogeneous_town3())),
        ("HomoNcomIndeFOHiwaySynchMAEnv-v0", EnvSpec::driving(highway_3c())),
        ("HomoNcomIndePOIntrxSASS1CTwn3-v0", EnvSpec::driving(builtin("SSUI1C_TOWN3_CAR3").unwrap())),
        ("HomoNcomIndeFOIntrxMASS3CTwn3-v0", town3.clone()),
        ("HomoCommCoopPOIntrxMASS3CTwn3-v0", town3.clone()),
        ("HomoCommIndePOIntrxAdvrsMASS3CTwn3-v0", town3.clone()),
        ("HomoNcomIndePOIntrxAsyncMASS3CTwn3-v0", EnvSpec { config: async_cfg, ..town3 }),
        ("HomoNcomIndeFOIntstMAGrid2C-v0", EnvSpec::grid(GridParams::default())),
    ];
    let mut reg = EnvRegistry::new();
    for (name, spec) in entries {
        let id: EnvId = name.parse().expect("built-in names are well formed");
        reg.register(id, spec).expect("built-in names are distinct");
    }
    reg
}

/// Builds an environment for `spec`, taking observability, comm, scheduling,
/// perturbation and shaping from `id` when given.
pub fn make_env_from_spec(id: Option<&EnvId>, spec: &EnvSpec) -> Result<Box<dyn MultiAgentEnv>, EnvError> {
    let mut config = spec.config.clone();
    if let Some(id) = id {
        config.apply_env_id(id);
    }
    match &spec.source {
        EnvSource::Driving(scenario) => Ok(Box::new(DrivingEnv::new(scenario.clone(), config)?)),
        EnvSource::GridIntersection(params) => Ok(Box::new(GridIntersectionEnv::new(*params)?)),
    }
}

pub fn make_env(registry: &EnvRegistry, name: &str) -> Result<Box<dyn MultiAgentEnv>, EnvError> {
    let (id, spec) = registry.resolve(name)?;
    make_env_from_spec(Some(&id), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_id::{EnvFilter, Multiplicity};

    #[test]
    fn every_builtin_resets() {
        let reg = default_registry();
        for name in reg.list(&EnvFilter::default()) {
            let mut env = make_env(&reg, &name).unwrap();
            let obs = env.reset(0).unwrap();
            assert_eq!(obs.len(), env.agent_ids().len(), "{name}");
            assert!(obs.values().all(|o| o.len() == env.observation_dim() && o.iter().all(|x| x.is_finite())));
        }
    }

    #[test]
    fn single_agent_entries_have_one_agent() {
        let reg = default_registry();
        let filter = EnvFilter { multiplicity: Some(Multiplicity::SA), ..Default::default() };
        let names = reg.list(&filter);
        assert_eq!(names.len(), 1);
        assert_eq!(make_env(&reg, &names[0]).unwrap().agent_ids().len(), 1);
    }
}

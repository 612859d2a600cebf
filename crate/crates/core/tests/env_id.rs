mod common;

use cadsim::env_id::*;
use cadsim::pomg::{default_registry, EnvSpec, GridParams};
use proptest::prelude::*;
use proptest::sample::select;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_env_id() -> impl Strategy<Value = EnvId> {
    (
        select(AgentNature::ALL),
        select(CommNature::ALL),
        select(TaskNature::ALL),
        select(Observability::ALL),
        select(MapType::ALL),
        proptest::sample::subsequence(EnvFlag::ALL, 0..=EnvFlag::ALL.len()),
        select(Multiplicity::ALL),
        "[A-Za-z0-9]{1,12}",
        0u64..100_000,
    )
        .prop_map(|(a, c, t, o, m, f, mult, usid, v)| EnvId::new(a, c, t, o, m, f, mult, usid, v).unwrap())
}

proptest! {
    #[test]
    fn format_then_parse_is_identity(id in arb_env_id()) {
        let s = format_env_id(&id);
        prop_assert_eq!(parse_env_id(&s).unwrap(), id);
    }

    #[test]
    fn distinct_ids_format_distinctly(a in arb_env_id(), b in arb_env_id()) {
        prop_assume!(a != b);
        prop_assert_ne!(format_env_id(&a), format_env_id(&b));
    }

    #[test]
    fn usid_never_contains_dash_v(id in arb_env_id()) {
        let parsed = parse_env_id(&format_env_id(&id)).unwrap();
        prop_assert!(!parsed.usid.contains("-v"));
    }

    #[test]
    fn parser_never_panics(s in "\\PC{0,40}") {
        let _ = parse_env_id(&s);
    }
}

#[test]
fn generated_names_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let s = common::random_env_id(&mut rng);
        assert_eq!(format_env_id(&parse_env_id(&s).unwrap()), s);
    }
}

#[test]
fn reference_names_parse() {
    for name in common::TABLE_NAMES {
        let id = parse_env_id(name).unwrap();
        assert_eq!(format_env_id(&id), name);
    }
    let id = parse_env_id("HomoNcomIndeFOHiwaySynchMAEnv-v0").unwrap();
    assert_eq!(id.flags, vec![EnvFlag::Synch]);
    assert_eq!((id.observability, id.map_type, id.usid.as_str()), (Observability::FO, MapType::Hiway, "Env"));
}

#[test]
fn unknown_first_token_is_at_offset_zero() {
    let err = parse_env_id("XyzNcomIndePOIntrxMAFoo-v0").unwrap_err();
    assert_eq!(err, EnvIdError::UnknownToken { position: 0, expected: TokenClass::AgentNature });
    assert_eq!(err.kind(), "UnknownToken");
}

#[test]
fn registry_rules() {
    let spec = EnvSpec::grid(GridParams::default());
    let mut reg = EnvRegistry::new();
    let v0: EnvId = "HomoNcomIndePOIntrxMASS3CTwn3-v0".parse().unwrap();
    reg.register(v0.clone(), spec.clone()).unwrap();
    assert_eq!(reg.len(), 1);
    assert!(matches!(reg.register(v0.clone(), spec.clone()), Err(EnvIdError::DuplicateId(_))));
    let v1 = EnvId { version: 1, ..v0.clone() };
    reg.register(v1, spec).unwrap();
    assert_eq!(reg.len(), 2);
    assert!(reg.lookup(&format_env_id(&v0)).is_some());
}

#[test]
fn filters_over_reference_entries() {
    let mut reg = EnvRegistry::new();
    for name in &common::TABLE_NAMES[1..] {
        reg.register(name.parse().unwrap(), EnvSpec::grid(GridParams::default())).unwrap();
    }
    let inde = EnvFilter { task_nature: Some(TaskNature::Inde), ..Default::default() };
    assert_eq!(
        list_envs(&reg, &inde),
        vec!["HeteCommIndePOIntrxMAEnv-v0".to_string(), "HomoNcomIndeFOHiwaySynchMAEnv-v0".to_string()]
    );
    assert_eq!(list_envs(&reg, &EnvFilter::default()).len(), 3);
    let tunnel = EnvFilter { map_type: Some(MapType::Tunnl), ..Default::default() };
    assert!(list_envs(&reg, &tunnel).is_empty());
}

#[test]
fn shipped_registry_is_sorted_and_complete() {
    let names = default_registry().list(&EnvFilter::default());
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for t in common::TABLE_NAMES {
        assert!(names.iter().any(|n| n == t), "{t} missing");
    }
}

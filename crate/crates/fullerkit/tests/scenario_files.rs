//! The JSON files under `scenarios/` mirror the built-in scenarios. Run with
//! `FULLERKIT_WRITE_SCENARIOS=1` to regenerate them.

use std::path::PathBuf;

use fullerkit::scenario_io::{parse_scenario, to_json};
use fullerkit_core::scenarios::{builtin, ExpectedValue, BUILTIN_IDS};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn files_match_builtins() {
    let write = std::env::var_os("FULLERKIT_WRITE_SCENARIOS").is_some();
    for id in BUILTIN_IDS {
        let s = builtin(id).unwrap();
        let path = dir().join(format!("{id}.json"));
        if write {
            std::fs::create_dir_all(dir()).unwrap();
            std::fs::write(&path, to_json(&s)).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_scenario(&text, id).unwrap(), s, "{id} is out of sync");
        assert_eq!(text, to_json(&s), "{id} is not in canonical form");
    }
}

#[test]
fn expected_values_round_trip() {
    for v in [
        ExpectedValue::Bool(true),
        ExpectedValue::Integer(-3),
        ExpectedValue::Number(0.25),
        ExpectedValue::Text("plus-infinity".into()),
        ExpectedValue::Numbers(vec![2.0, 3.0]),
    ] {
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<ExpectedValue>(&text).unwrap(), v);
    }
}

#[test]
fn untagged_expectations_are_rejected() {
    let mut s: serde_json::Value = serde_json::from_str(&to_json(&builtin("torus-linear").unwrap())).unwrap();
    s["expected"][0].as_object_mut().unwrap().remove("basis");
    assert!(parse_scenario(&s.to_string(), "edited").is_err());
}

#[test]
fn builtins_self_check_quickly() {
    let cfg = fullerkit_core::Config::default();
    for id in BUILTIN_IDS {
        let start = std::time::Instant::now();
        let s = fullerkit::load_scenario(id).unwrap();
        fullerkit_core::scenarios::self_check(&s, 10_000, &cfg).unwrap();
        assert!(start.elapsed() < std::time::Duration::from_secs(10), "{id} took {:?}", start.elapsed());
    }
}

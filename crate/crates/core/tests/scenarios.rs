//! Every shipped scenario runs and meets its own expectations.

use std::path::PathBuf;

use sbsim_core::scenario::{run_scenario, Scenario};

fn shipped() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
}

#[test]
fn shipped_scenarios_meet_their_expectations() {
    let mut failures = Vec::new();
    for path in shipped() {
        let scenario = Scenario::load(&path).unwrap();
        let out = run_scenario(&scenario).unwrap();
        assert!(!out.report.assertions.is_empty(), "{} asserts nothing", scenario.name);
        for a in out.report.assertions.iter().filter(|a| !a.passed) {
            failures.push(format!("{}: {} ({})", scenario.name, a.name, a.detail));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn shipped_scenarios_roundtrip_through_json() {
    for path in shipped() {
        let text = std::fs::read_to_string(&path).unwrap();
        let s = Scenario::from_json(&text).unwrap();
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }
}

#[test]
fn shipped_ground_schema_matches_builtin() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas/ground.json");
    let db = sbsim_core::ground::GroundDatabase::load(&path).unwrap();
    assert_eq!(db, sbsim_core::ground::GroundDatabase::builtin());
}

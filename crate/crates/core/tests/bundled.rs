use std::path::{Path, PathBuf};

use interval_predictor::io::scenario::{load_model, load_scenario, ScalarScenario, ScenarioFile};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

#[test]
fn scalar_demo_matches_the_worked_example() {
    let ScenarioFile::Scalar(s) = load_scenario(&bundled("scalar_demo.json")).unwrap() else {
        panic!("scalar scenario expected");
    };
    assert_eq!(s.theta, (0.5, 1.5));
    assert_eq!((s.input.lower()[0], s.input.upper()[0]), (-0.1, 0.1));
    assert_eq!((s.initial.lower()[0], s.initial.upper()[0]), (1.0, 1.1));
    assert_eq!(s, ScalarScenario::demo());
}

#[test]
fn highway_scenarios_load() {
    for name in ["highway_two_vehicle.json", "highway_lanes.json"] {
        let ScenarioFile::Highway(s) = load_scenario(&bundled(name)).unwrap() else {
            panic!("{name}: highway scenario expected");
        };
        assert!(s.vehicles().len() >= 2, "{name}");
        assert_eq!(s.rules().speed_limit, 25.0);
        assert_eq!(s.rules().jam_distance, 10.0);
        assert_eq!(s.rules().time_gap, 1.5);
    }
}

#[test]
fn models_load() {
    let scalar = load_model(&bundled("scalar_model.json")).unwrap();
    let built = ScalarScenario::demo().model();
    assert_eq!(scalar.a0(), built.a0());
    assert_eq!(scalar.delta_plus(), built.delta_plus());
    assert_eq!(scalar.delta_minus(), built.delta_minus());
    assert_eq!(scalar.b(), built.b());
    load_model(&bundled("antistable_model.json")).unwrap();
}

use std::path::Path;

use falsify_core::plants::{cruise_control, simulate, PlantRegistry};
use falsify_core::Trace;

fn constant_inputs(dt: f64, seconds: f64, throttle: f64, brake: f64) -> Trace {
    let n = (seconds / dt).round() as usize + 1;
    Trace::from_columns(
        0.0,
        dt,
        vec!["throttle".into(), "brake".into()],
        vec![vec![throttle; n], vec![brake; n]],
    )
    .unwrap()
}

fn final_speed(throttle: f64, brake: f64) -> f64 {
    let out = simulate(
        &cruise_control(),
        &constant_inputs(0.05, 30.0, throttle, brake),
    )
    .unwrap();
    *out.column(0).last().unwrap()
}

#[test]
fn more_throttle_means_more_speed() {
    let speeds: Vec<f64> = (0..=10)
        .map(|k| final_speed(k as f64 / 10.0, 0.0))
        .collect();
    assert!(speeds.windows(2).all(|w| w[0] < w[1]), "{speeds:?}");
    assert!(final_speed(0.8, 0.5) < final_speed(0.8, 0.0));
}

#[test]
fn speed_rises_monotonically_toward_steady_state() {
    let out = simulate(&cruise_control(), &constant_inputs(0.01, 60.0, 1.0, 0.0)).unwrap();
    let speed = out.column(0);
    assert!(speed.windows(2).all(|w| w[0] <= w[1]));
    assert!(speed.iter().all(|&v| v < 125.0));
    // Outputs first, then the echoed inputs.
    assert_eq!(out.names(), ["speed", "throttle", "brake"]);
}

/// The plant table in docs/plants.md matches the registry.
#[test]
fn documented_plants_match_registry() {
    let doc =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/plants.md"))
            .unwrap();
    let rows: Vec<Vec<String>> = doc
        .lines()
        .filter(|l| l.starts_with('|') && !l.contains("---") && !l.contains("name"))
        .map(|l| {
            l.trim_matches('|')
                .split('|')
                .map(|c| c.trim().to_string())
                .collect()
        })
        .collect();
    let registry = PlantRegistry::builtin();
    assert_eq!(rows.len(), registry.plants().len());
    for row in rows {
        let plant = registry.lookup(&row[0]).unwrap();
        assert_eq!(row[1], plant.inputs().join(", "));
        assert_eq!(row[2], plant.outputs().join(", "));
        assert_eq!(row[3].parse::<f64>().unwrap(), plant.default_dt());
        let state: Vec<f64> = row[4]
            .split(',')
            .map(|v| v.trim().parse().unwrap())
            .collect();
        assert_eq!(state, plant.initial_state());
    }
}

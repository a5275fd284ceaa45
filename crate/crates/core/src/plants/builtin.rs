use super::PlantModel;

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn constants(list: &[(&str, f64)]) -> Vec<(String, f64)> {
    list.iter().map(|(n, v)| (n.to_string(), *v)).collect()
}

/// Longitudinal vehicle speed in mph:
/// `v' = a u (vmax - v) / vmax - b v - c brake v`.
///
/// Full throttle settles at `a / (a / vmax + b)` = 125 mph with a 6.25 s time
/// constant, so exceeding 120 mph takes throttle above 0.8 held for most of
/// 20 s.
pub fn cruise_control() -> PlantModel {
    PlantModel::new(
        "cruise_control",
        "vehicle speed under throttle and brake; full-throttle steady state 125 mph",
        names(&["throttle", "brake"]),
        names(&["speed"]),
        0.01,
        constants(&[("a", 20.0), ("vmax", 150.0), ("b", 4.0 / 150.0), ("c", 0.5)]),
        vec![0.0],
        |c, x, u, dx| {
            let (a, vmax, b, cb) = (c[0], c[1], c[2], c[3]);
            let v = x[0];
            dx[0] = a * u[0] * (vmax - v) / vmax - b * v - cb * u[1] * v;
        },
        |_, x, _, y| y[0] = x[0],
    )
    .expect("valid built-in")
}

/// Tank level in metres: `level' = (q_in valve - k_out sqrt(level)) / area`.
/// A fully open valve settles at `(q_in / k_out)^2` = 4 m.
pub fn water_tank() -> PlantModel {
    PlantModel::new(
        "water_tank",
        "tank level under an inflow valve with gravity outflow; full-open steady state 4 m",
        names(&["valve"]),
        names(&["level"]),
        0.01,
        constants(&[("q_in", 1.0), ("k_out", 0.5), ("area", 1.0)]),
        vec![0.0],
        |c, x, u, dx| {
            let (q_in, k_out, area) = (c[0], c[1], c[2]);
            dx[0] = (q_in * u[0] - k_out * x[0].max(0.0).sqrt()) / area;
        },
        |_, x, _, y| y[0] = x[0],
    )
    .expect("valid built-in")
}

/// First-order lag toward the Chebyshev distance of `(u1, u2)` from a hidden
/// centre: `gap' = k (max(|u1 - c1|, |u2 - c2|) - gap)`, starting at 1.
///
/// `G[0,10](gap >= 0.01)` fails only when both inputs stay within 0.01 of the
/// centre, a box 2% wide in each unit dimension.
pub fn ridge() -> PlantModel {
    PlantModel::new(
        "ridge",
        "first-order lag toward the distance from a hidden point; narrow failure region",
        names(&["u1", "u2"]),
        names(&["gap"]),
        0.01,
        constants(&[("c1", 0.37), ("c2", 0.71), ("k", 2.0)]),
        vec![1.0],
        |c, x, u, dx| {
            let target = (u[0] - c[0]).abs().max((u[1] - c[1]).abs());
            dx[0] = c[2] * (target - x[0]);
        },
        |_, x, _, y| y[0] = x[0],
    )
    .expect("valid built-in")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::simulate;
    use crate::trace::Trace;

    fn inputs(plant: &PlantModel, values: &[f64], duration: f64, dt: f64) -> Trace {
        let n = (duration / dt).round() as usize + 1;
        Trace::from_columns(
            0.0,
            dt,
            plant.inputs().to_vec(),
            values.iter().map(|&v| vec![v; n]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_input_equilibria_are_exact() {
        let cc = cruise_control();
        let out = simulate(&cc, &inputs(&cc, &[0.0, 0.0], 30.0, 0.01)).unwrap();
        assert!(out.column(0).iter().all(|&v| v == 0.0));
        let wt = water_tank();
        let out = simulate(&wt, &inputs(&wt, &[0.0], 30.0, 0.01)).unwrap();
        assert!(out.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn steady_states() {
        let cc = cruise_control();
        let speed = simulate(&cc, &inputs(&cc, &[1.0, 0.0], 200.0, 0.1))
            .unwrap()
            .column(0);
        assert!((speed.last().unwrap() - 125.0).abs() < 1e-6);
        let wt = water_tank();
        let level = simulate(&wt, &inputs(&wt, &[1.0], 200.0, 0.1))
            .unwrap()
            .column(0);
        assert!((level.last().unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn ridge_settles_to_distance() {
        let r = ridge();
        let far = simulate(&r, &inputs(&r, &[0.0, 0.0], 10.0, 0.01))
            .unwrap()
            .column(0);
        assert!((far.last().unwrap() - 0.71).abs() < 1e-6);
        let near = simulate(&r, &inputs(&r, &[0.375, 0.705], 10.0, 0.01))
            .unwrap()
            .column(0);
        assert!((near.last().unwrap() - 0.005).abs() < 1e-6);
    }
}

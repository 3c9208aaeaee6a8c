use vpcharge_wasm::{c0_curve, constants_table, Demo};

// JsError only builds on wasm32, so these stick to the success paths.

#[test]
fn curve_is_nan_below_the_admissible_range() {
    let c = c0_curve(5.0, 6.0, 3);
    assert!(c[0].is_nan());
    assert!(c[2] > 100.0 && c[2] < 1000.0);
}

#[test]
fn table_json_carries_the_inputs() {
    let v: serde_json::Value = serde_json::from_str(&constants_table(6.0, 7.0, 2.0, 100.0, 1.0).ok().unwrap()).unwrap();
    assert_eq!(v["T"], 2.0);
    assert!(v["c0_m"].as_f64().unwrap() > 100.0);
}

#[test]
fn demo_steps_draws_and_probes() {
    let mut d = Demo::new(200, 1, 0.5, 0.2, 0.5).ok().unwrap();
    let s: serde_json::Value = serde_json::from_str(&d.advance(20, 1e-3).ok().unwrap()).unwrap();
    assert!(s["energy_rel_drift"].as_f64().unwrap() < 1e-3);
    assert_eq!(s["steps"], 20);
    assert_eq!(d.positions_xy().len(), 400);
    assert_eq!(d.charge_xy().len(), 2);
    let r: serde_json::Value = serde_json::from_str(&d.probe_bounds(3, 1.0, 1).ok().unwrap()).unwrap();
    assert_eq!(r["pass"], true);
}

use sqg_web::{amplified_square, enhancement_curve, enhancement_rows, spectator_curve, spectator_rows, square_path};

#[test]
fn enhancement_rows_are_ordered() {
    let v = enhancement_rows(40.0, 3);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["gT"], 1.0);
    let last = &rows[2];
    assert_eq!(last["gT"], 40.0);
    assert!(last["G_triangle"].as_f64().unwrap() > last["G_square"].as_f64().unwrap());
    assert!((last["t1_square"].as_f64().unwrap() - 2.0).abs() < 1e-4);
}

#[test]
fn square_path_closes_with_amplified_phase() {
    let v = square_path(1.0, 8);
    assert!(v["residual"].as_f64().unwrap() < 1e-12);
    let re = v["re"].as_array().unwrap();
    assert_eq!(re.len(), v["segment"].as_array().unwrap().len());
    assert_eq!((re.len() - 1) % 8, 0);
    assert!(re[0].as_f64().unwrap().abs() < 1e-15 && re[re.len() - 1].as_f64().unwrap().abs() < 1e-12);
    let base = reference_phase();
    let phase = v["phase"].as_f64().unwrap().abs();
    assert!((phase / base - 2f64.exp()).abs() < 1e-9 * 2f64.exp());
}

fn reference_phase() -> f64 {
    square_path(0.0, 1)["phase"].as_f64().unwrap().abs()
}

#[test]
fn spectator_rows_start_at_unity() {
    let v = spectator_rows(1.0, 10.0, 5);
    let rows = v.as_array().unwrap();
    assert!((rows[0]["R"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(rows[4]["R"].as_f64().unwrap() < 1.0);
}

#[test]
fn exports_are_json() {
    for text in [enhancement_curve(10.0, 2), amplified_square(0.5, 2), spectator_curve(2.0, 6.0, 3)] {
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("error").is_none());
    }
}

#[test]
fn overflow_reports_error() {
    let v = square_path(800.0, 1);
    assert!(v["error"].is_string());
}

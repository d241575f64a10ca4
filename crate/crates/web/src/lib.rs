//! wasm-bindgen exports for the browser demo. Every export returns a JSON
//! string so the page can stay plain JavaScript.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use sqg_core::engine::{evolve_vacuum, phase_coefficient, residual_worst, spectator_ratio, trajectory, EvolveOptions};
use sqg_core::modes::build_com_table;
use sqg_core::noise::reference_square;
use sqg_core::optimize::optimal_split;

fn error(e: impl std::fmt::Display) -> Value {
    json!({ "error": e.to_string() })
}

/// Optimal-split enhancement of the square and triangle for `gT` in `[1, gt_max]`.
pub fn enhancement_rows(gt_max: f64, points: usize) -> Value {
    let points = points.clamp(2, 2000);
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        let gt = 1.0 + (gt_max - 1.0) * k as f64 / (points - 1) as f64;
        let square = optimal_split(1.0, 1.0, gt, 4);
        let triangle = optimal_split(1.0, 1.0, gt, 3);
        match (square, triangle) {
            (Ok(s), Ok(t)) => rows.push(json!({
                "gT": gt,
                "G_square": s.enhancement,
                "G_triangle": t.enhancement,
                "t1_square": s.t1,
            })),
            (Err(e), _) | (_, Err(e)) => return error(e),
        }
    }
    Value::Array(rows)
}

/// Phase-space path of the amplified square at squeeze `r`, unit side before
/// amplification and `g = 1`.
pub fn square_path(r: f64, samples: usize) -> Value {
    let s = reference_square(1.0, r, 1.0);
    let modes = match build_com_table(1, 1.0) {
        Ok(m) => m,
        Err(e) => return error(e),
    };
    let opts = EvolveOptions::rwa();
    let path = match trajectory(&s, &modes, &[0.0], &opts, samples.clamp(1, 500)) {
        Ok(p) => p,
        Err(e) => return error(e),
    };
    let st = match evolve_vacuum(&s, &modes, &opts) {
        Ok(st) => st,
        Err(e) => return error(e),
    };
    json!({
        "t": path.iter().map(|p| p.t).collect::<Vec<_>>(),
        "segment": path.iter().map(|p| p.segment).collect::<Vec<_>>(),
        "re": path.iter().map(|p| p.alpha.re).collect::<Vec<_>>(),
        "im": path.iter().map(|p| p.alpha.im).collect::<Vec<_>>(),
        "r": path.iter().map(|p| p.r).collect::<Vec<_>>(),
        "phase": phase_coefficient(&st, &modes.mode_vector(0)),
        "residual": residual_worst(&st),
    })
}

/// Spectator residual ratio at detuning `delta_over_g` for `gT/4` in `[2, max]`.
pub fn spectator_rows(delta_over_g: f64, gt4_max: f64, points: usize) -> Value {
    let points = points.clamp(2, 4000);
    let rows = (0..points)
        .map(|k| {
            let x = 2.0 + (gt4_max - 2.0) * k as f64 / (points - 1) as f64;
            let t2 = ((x - 2.0) / 2.0).max(0.0);
            json!({ "gT_over_4": x, "R": spectator_ratio(1.0, 1.0, delta_over_g, 2.0, t2) })
        })
        .collect();
    Value::Array(rows)
}

#[wasm_bindgen]
pub fn enhancement_curve(gt_max: f64, points: usize) -> String {
    enhancement_rows(gt_max, points).to_string()
}

#[wasm_bindgen]
pub fn amplified_square(r: f64, samples: usize) -> String {
    square_path(r, samples).to_string()
}

#[wasm_bindgen]
pub fn spectator_curve(delta_over_g: f64, gt4_max: f64, points: usize) -> String {
    spectator_rows(delta_over_g, gt4_max, points).to_string()
}

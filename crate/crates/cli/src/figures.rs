use anyhow::{bail, Result};
use rayon::prelude::*;

use sqg_core::engine::{spectator_ratio, EvolveOptions};
use sqg_core::noise::{
    analytic_continuous_mf_error, analytic_strobo_mf_error, gate_square, monte_carlo, r_for_enhancement,
    NoiseModel, ENTANGLING_PHASE,
};
use sqg_core::optimize::{gate_time_for_phase, optimal_split};

use crate::grid::{fmt, Grid};

pub const NO_PA_GATE_TIME: f64 = 4e-4;
pub const SPECTATOR_DETUNINGS: [f64; 3] = [1.0, 2.0, 5.0];

#[derive(Clone, Debug)]
pub struct FigureParams {
    pub grid: Option<Grid>,
    pub seed: u64,
    pub trials: usize,
    pub c: f64,
    pub enhancement: f64,
    pub delta_over_g: f64,
    pub force: f64,
}

fn axis(params: &FigureParams, key: &[&str], default: &str) -> Result<Grid> {
    let g = match &params.grid {
        Some(g) => g.clone(),
        None => Grid::parse(default)?,
    };
    if !key.contains(&g.key.as_str()) {
        bail!("grid key `{}` not valid here; expected one of {:?}", g.key, key);
    }
    Ok(g)
}

fn table(header: &str, rows: Vec<Result<String>>) -> Result<String> {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r?);
        out.push('\n');
    }
    Ok(out)
}

/// Enhancement of the optimal square and triangle against the no-PA square, `g = 1`.
pub fn enhancement(p: &FigureParams) -> Result<String> {
    let g = axis(p, &["gT"], "gT=1:60:60")?;
    let rows = g
        .values
        .par_iter()
        .map(|&gt| {
            let sq = optimal_split(1.0, 1.0, gt, 4)?.enhancement;
            let tri = optimal_split(1.0, 1.0, gt, 3)?.enhancement;
            Ok(format!("{},{},{},{}", fmt(gt), fmt(sq), fmt(tri), fmt(1.0)))
        })
        .collect();
    table("gT,G_square,G_triangle,G_noPA", rows)
}

/// Square gate time reaching the phase of the 0.4 ms no-PA square.
pub fn gate_time(p: &FigureParams) -> Result<String> {
    let g = axis(p, &["g"], "g=0:2e5:21")?;
    let f = p.force;
    let target = 2.0 * (f * NO_PA_GATE_TIME / 4.0).powi(2);
    let rows = g
        .values
        .par_iter()
        .map(|&gv| {
            let t = gate_time_for_phase(f, gv, target, 1)?;
            Ok(format!("{},{},{}", fmt(gv), fmt(t), fmt(NO_PA_GATE_TIME)))
        })
        .collect();
    table("g,T_square,T_noPA", rows)
}

/// Spectator residual ratio on the optimal split `t1 = 2/g`, `g = 1`.
pub fn spectator(p: &FigureParams) -> Result<String> {
    let g = axis(p, &["gT_over_4"], "gT_over_4=2:12:201")?;
    let rows = g
        .values
        .par_iter()
        .map(|&x| {
            let t1 = 2.0;
            let t2 = ((x - 2.0) / 2.0).max(0.0);
            let cols: Vec<String> = SPECTATOR_DETUNINGS
                .iter()
                .map(|&d| fmt(spectator_ratio(1.0, 1.0, d, t1, t2)))
                .collect();
            Ok(format!("{},{}", fmt(x), cols.join(",")))
        })
        .collect();
    let header = format!(
        "gT_over_4,{}",
        SPECTATOR_DETUNINGS
            .iter()
            .map(|d| format!("R_delta_{d}g"))
            .collect::<Vec<_>>()
            .join(",")
    );
    table(&header, rows)
}

/// Stroboscopic and continuous mode-frequency errors, swept over `Δ/g` at
/// fixed `G` or over `G` at fixed `Δ/g`. The Monte Carlo column runs the
/// two-ion entangling square with Gaussian `Δ` of rms `Δ/g`, `g = 1`.
pub fn mode_noise(p: &FigureParams) -> Result<String> {
    let g = axis(p, &["delta_over_g", "G"], "delta_over_g=1e-6:1e-4:9:log")?;
    let mut out = String::from("delta_over_g,G,eps_strobo_analytic,eps_continuous_analytic,eps_strobo_mc\n");
    for &v in &g.values {
        let (d, big_g) = if g.key == "G" { (p.delta_over_g, v) } else { (v, p.enhancement) };
        let r = r_for_enhancement(big_g)?;
        let (_, strobo) = analytic_strobo_mf_error(d, 1.0, r, p.c)?;
        let cont = analytic_continuous_mf_error(d, 1.0, big_g)?;
        let (s, modes) = gate_square(1.0, r, 2, ENTANGLING_PHASE)?;
        let noise = NoiseModel {
            sigma_delta: d,
            seed: p.seed,
            trials: p.trials,
            options: EvolveOptions::rwa(),
            ..Default::default()
        };
        let mc = monte_carlo(&s, &modes, &noise)?.mean_epsilon_mf;
        out.push_str(&format!("{},{},{},{},{}\n", fmt(d), fmt(big_g), fmt(strobo), fmt(cont), fmt(mc)));
    }
    Ok(out)
}

pub fn render(name: &str, p: &FigureParams) -> Result<String> {
    match name {
        "enhancement" => enhancement(p),
        "gate-time" => gate_time(p),
        "spectator" => spectator(p),
        "mode-noise" => mode_noise(p),
        other => bail!("unknown figure `{other}`; expected enhancement, gate-time, spectator or mode-noise"),
    }
}

//! Quasi-static noise: analytic error laws and seeded Monte Carlo.
//!
//! Each trial draws one static perturbation (mode-frequency offset, PA phase
//! offset and per-segment fractional timing errors), evolves the perturbed
//! schedule exactly and records the gate report. Trials use independent
//! counter-derived RNG streams and are aggregated in trial order, so results
//! do not depend on the number of worker threads.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{evolve, evolve_vacuum, phase_coefficient, residual_worst, EvolveOptions, SpinMotionState};
use crate::error::{Error, Result};
use crate::modes::ModeTable;
use crate::schedule::{Schedule, SegmentKind};

pub const DEFAULT_C: f64 = 6.0;

/// `G = e^{2r} / (2r + 2)²`, the enhancement at squeeze `r` on the optimal split.
pub fn enhancement_at_r(r: f64) -> f64 {
    (2.0 * r).exp() / (2.0 * r + 2.0).powi(2)
}

/// Stroboscopic mode-frequency error `Δα = C (Δ/g) e^{2r}` and `ε = Δα²`.
pub fn analytic_strobo_mf_error(delta: f64, g: f64, r: f64, c: f64) -> Result<(f64, f64)> {
    if !(g > 0.0) {
        return Err(Error::invalid("PA rate must be positive"));
    }
    let da = c * (delta / g).abs() * (2.0 * r).exp();
    Ok((da, da * da))
}

/// Same law written through `G`: `Δα = C (Δ/g) G (2r+2)²`.
pub fn analytic_strobo_mf_error_g(delta: f64, g: f64, r: f64, c: f64) -> Result<(f64, f64)> {
    if !(g > 0.0) {
        return Err(Error::invalid("PA rate must be positive"));
    }
    let da = c * (delta / g).abs() * enhancement_at_r(r) * (2.0 * r + 2.0).powi(2);
    Ok((da, da * da))
}

/// Continuous-protocol error `ε = (π/4)(Δ/g)² G³ (1 + G)`.
pub fn analytic_continuous_mf_error(delta: f64, g: f64, big_g: f64) -> Result<f64> {
    if !(g > 0.0) {
        return Err(Error::invalid("PA rate must be positive"));
    }
    let x = delta / g;
    Ok(PI / 4.0 * x * x * big_g.powi(3) * (1.0 + big_g))
}

/// Enhancement above which the stroboscopic protocol beats the continuous
/// one for a given `C`, from `C²(2r+2)⁴ = (π/4) G (1+G)` with `G = G(r)`.
pub fn crossover_g(c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::invalid("C must be positive"));
    }
    let h = |r: f64| {
        let g = enhancement_at_r(r);
        PI / 4.0 * g * (1.0 + g) - c * c * (2.0 * r + 2.0).powi(4)
    };
    let (mut lo, mut hi) = (0.0, 50.0);
    if h(lo) >= 0.0 || h(hi) <= 0.0 {
        return Err(Error::numerical(format!(
            "no sign change of the crossover condition on r in [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(enhancement_at_r(0.5 * (lo + hi)))
}

/// Inverse of [`enhancement_at_r`] on `r ≥ 0`.
pub fn r_for_enhancement(big_g: f64) -> Result<f64> {
    if !big_g.is_finite() {
        return Err(Error::invalid("enhancement must be finite"));
    }
    if !(big_g >= enhancement_at_r(0.0)) {
        return Err(Error::invalid("enhancement below the r = 0 value 1/4"));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while enhancement_at_r(hi) < big_g {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::numerical("enhancement out of range"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if enhancement_at_r(mid) < big_g {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    Gaussian,
    Uniform,
}

/// Which segments receive timing errors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimingScope {
    All,
    Sdf,
    Pa,
    Segments(Vec<usize>),
}

/// Whether PA pulses share one phase draw or get one each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseScope {
    Common,
    PerPulse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_delta: f64,
    pub sigma_theta: f64,
    pub sigma_timing: f64,
    pub distribution: NoiseDistribution,
    pub seed: u64,
    pub trials: usize,
    pub timing_scope: TimingScope,
    pub phase_scope: PhaseScope,
    pub options: EvolveOptions,
    pub keep_records: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_delta: 0.0,
            sigma_theta: 0.0,
            sigma_timing: 0.0,
            distribution: NoiseDistribution::Gaussian,
            seed: 0,
            trials: 1000,
            timing_scope: TimingScope::All,
            phase_scope: PhaseScope::Common,
            options: EvolveOptions::default(),
            keep_records: false,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("sigma_delta", self.sigma_delta),
            ("sigma_theta", self.sigma_theta),
            ("sigma_timing", self.sigma_timing),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::invalid(format!("{name} must be non-negative")));
            }
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        match self.distribution {
            NoiseDistribution::Gaussian => Normal::new(0.0, sigma).expect("finite sigma").sample(rng),
            NoiseDistribution::Uniform => {
                let w = sigma * 3f64.sqrt();
                Uniform::new_inclusive(-w, w).sample(rng)
            }
        }
    }

    fn times_segment(&self, k: usize, kind: SegmentKind) -> bool {
        match &self.timing_scope {
            TimingScope::All => true,
            TimingScope::Sdf => kind == SegmentKind::Sdf,
            TimingScope::Pa => kind == SegmentKind::Pa,
            TimingScope::Segments(list) => list.contains(&k),
        }
    }
}

/// One trial's perturbation and outcome.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub delta: f64,
    pub dtheta: f64,
    /// Mean of the timing draws applied in this trial.
    pub eps_timing: f64,
    /// Mean of `|ε|` over the perturbed segments.
    pub abs_eps_timing: f64,
    pub residual: f64,
    pub phase_error: f64,
    pub epsilon_mf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: usize,
    pub nominal_phase: f64,
    pub mean_epsilon_mf: f64,
    pub p50_epsilon_mf: f64,
    pub p90_epsilon_mf: f64,
    pub p99_epsilon_mf: f64,
    pub mean_residual: f64,
    pub p50_residual: f64,
    pub p90_residual: f64,
    pub p99_residual: f64,
    pub mean_phase_error: f64,
    pub std_phase_error: f64,
    pub mean_abs_phase_error: f64,
    /// `mean |ΔΦ| / |Φ|`, absent when the nominal phase vanishes.
    pub mean_abs_relative_phase_error: Option<f64>,
    pub mean_abs_eps_timing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<TrialRecord>>,
}

impl TrialStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

/// Per-trial CSV with header
/// `trial,delta,dtheta,eps_timing,residual,phase_error,epsilon_mf`.
pub fn records_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("trial,delta,dtheta,eps_timing,residual,phase_error,epsilon_mf\n");
    for r in records {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.trial, r.delta, r.dtheta, r.eps_timing, r.residual, r.phase_error, r.epsilon_mf
        ));
    }
    out
}

/// Pairwise summation (fixed association order).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Nearest-rank percentile of `xs` (`q ∈ [0, 1]`).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Applies one trial's draws to the template; returns the perturbed
/// schedule, the mode offset and the record fields.
fn perturb(schedule: &Schedule, noise: &NoiseModel, trial: usize) -> (Schedule, f64, f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(trial as u64);
    let delta = noise.draw(&mut rng, noise.sigma_delta);
    let common_theta = noise.draw(&mut rng, noise.sigma_theta);
    let mut out = schedule.clone();
    let mut first_theta = None;
    let mut timing = Vec::new();
    for (k, seg) in out.segments.iter_mut().enumerate() {
        if seg.kind == SegmentKind::Pa {
            let dth = match noise.phase_scope {
                PhaseScope::Common => common_theta,
                PhaseScope::PerPulse => noise.draw(&mut rng, noise.sigma_theta),
            };
            first_theta.get_or_insert(dth);
            seg.drive_phase += dth;
        }
        if noise.sigma_timing > 0.0 && noise.times_segment(k, seg.kind) {
            let eps = noise.draw(&mut rng, noise.sigma_timing);
            seg.duration = (seg.duration * (1.0 + eps)).max(0.0);
            timing.push(eps);
        }
    }
    let (eps_mean, abs_mean) = if timing.is_empty() {
        (0.0, 0.0)
    } else {
        let abs: Vec<f64> = timing.iter().map(|e| e.abs()).collect();
        (mean(&timing), mean(&abs))
    };
    (out, delta, first_theta.unwrap_or(common_theta), eps_mean, abs_mean)
}

/// Monte Carlo over `noise.trials` static draws.
pub fn monte_carlo(schedule: &Schedule, modes: &ModeTable, noise: &NoiseModel) -> Result<TrialStats> {
    noise.validate()?;
    let m = modes.mode_count();
    let init = SpinMotionState::vacuum(modes.n_ions, m);
    let b = modes.mode_vector(schedule.target_mode.min(m.saturating_sub(1)));
    let nominal = evolve(&init, schedule, modes, &vec![0.0; m], &noise.options)?;
    let nominal_phase = phase_coefficient(&nominal, &b);

    let records: Vec<TrialRecord> = (0..noise.trials)
        .into_par_iter()
        .map(|trial| {
            let (perturbed, delta, dtheta, eps_timing, abs_eps_timing) = perturb(schedule, noise, trial);
            let st = evolve(&init, &perturbed, modes, &vec![delta; m], &noise.options)?;
            let residual = residual_worst(&st);
            Ok(TrialRecord {
                trial,
                delta,
                dtheta,
                eps_timing,
                abs_eps_timing,
                residual,
                phase_error: phase_coefficient(&st, &b) - nominal_phase,
                epsilon_mf: residual * residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let eps: Vec<f64> = records.iter().map(|r| r.epsilon_mf).collect();
    let res: Vec<f64> = records.iter().map(|r| r.residual).collect();
    let dphi: Vec<f64> = records.iter().map(|r| r.phase_error).collect();
    let abs_dphi: Vec<f64> = dphi.iter().map(|x| x.abs()).collect();
    let abs_eps: Vec<f64> = records.iter().map(|r| r.abs_eps_timing).collect();
    let mean_dphi = mean(&dphi);
    let var: Vec<f64> = dphi.iter().map(|x| (x - mean_dphi).powi(2)).collect();
    let eps_sorted = sorted(&eps);
    let res_sorted = sorted(&res);
    let mean_abs_dphi = mean(&abs_dphi);
    Ok(TrialStats {
        trials: noise.trials,
        nominal_phase,
        mean_epsilon_mf: mean(&eps),
        p50_epsilon_mf: percentile(&eps_sorted, 0.5),
        p90_epsilon_mf: percentile(&eps_sorted, 0.9),
        p99_epsilon_mf: percentile(&eps_sorted, 0.99),
        mean_residual: mean(&res),
        p50_residual: percentile(&res_sorted, 0.5),
        p90_residual: percentile(&res_sorted, 0.9),
        p99_residual: percentile(&res_sorted, 0.99),
        mean_phase_error: mean_dphi,
        std_phase_error: mean(&var).sqrt(),
        mean_abs_phase_error: mean_abs_dphi,
        mean_abs_relative_phase_error: (nominal_phase != 0.0).then(|| mean_abs_dphi / nominal_phase.abs()),
        mean_abs_eps_timing: mean(&abs_eps),
        records: noise.keep_records.then_some(records),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_slope(&lx, &ly)
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Single-ion amplified square at squeeze `r` on the optimal split
/// `t₁ = 2/g`, with unit leg displacement `f t₁ = α`.
pub fn reference_square(g: f64, r: f64, alpha: f64) -> Schedule {
    let t1 = 2.0 / g;
    crate::schedule::build_square(alpha / t1, g, t1, r / g, 0.0)
}

/// Phase coefficient of a maximally entangling gate on `n_ions` ions, where
/// the pairwise term `Φ Σ_ij σᵢσⱼ` gives `2Φ = π/4` per pair.
pub const ENTANGLING_PHASE: f64 = PI / 8.0;

/// Amplified square on the COM mode of `n_ions` ions at squeeze `r` and
/// split `t₁ = 2/g`, with the leg displacement scaled so that the resonant
/// phase coefficient equals `phi`.
pub fn gate_square(g: f64, r: f64, n_ions: usize, phi: f64) -> Result<(Schedule, ModeTable)> {
    if !(phi > 0.0) {
        return Err(Error::invalid("phi must be positive"));
    }
    let modes = crate::modes::build_com_table(n_ions, 1.0)?;
    let unit = reference_square(g, r, 1.0).with_ions(n_ions);
    let st = evolve_vacuum(&unit, &modes, &EvolveOptions::rwa())?;
    let p1 = phase_coefficient(&st, &modes.mode_vector(0));
    let s = reference_square(g, r, (phi / p1).sqrt()).with_ions(n_ions);
    Ok((s, modes))
}

/// Fits `C` in `Δα = C (Δ/g) e^{2r}` from exact worst-branch residuals of
/// the entangling [`gate_square`] over the offsets `deltas` (RWA).
pub fn fit_strobo_constant(g: f64, r: f64, n_ions: usize, deltas: &[f64]) -> Result<f64> {
    let (s, modes) = gate_square(g, r, n_ions, ENTANGLING_PHASE)?;
    let init = SpinMotionState::vacuum(n_ions, 1);
    let mut ratios = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let st = evolve(&init, &s, &modes, &[d], &EvolveOptions::rwa())?;
        ratios.push(residual_worst(&st) / ((d / g).abs() * (2.0 * r).exp()));
    }
    Ok(pairwise_sum(&ratios) / ratios.len() as f64)
}

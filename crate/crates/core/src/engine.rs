//! Exact evolution of the spin-dependent Gaussian state through a schedule.
//!
//! For spins coupled through `σ_z` only, every spin branch `s ∈ {±1}^N` sees
//! a unitary of the form `e^{iΣ sᵢsⱼΦᵢⱼ} D(Σ sᵢ Aᵢ) F` on each mode, where
//! `F` is a spin-independent squeeze/rotation frame. The state therefore
//! needs only the amplitude matrix `A`, the frames and `Φ`.
//!
//! Every mode is described in its own interaction picture (rotating at its
//! actual frequency, including any offset). An SDF acts there as a
//! time-dependent displacement and a PA pulse as a Gaussian propagator.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{from_generator, NormalForm};
use crate::modes::ModeTable;
use crate::schedule::{Schedule, Segment, SegmentKind};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Drop the counter-rotating SDF term.
    pub rwa: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { rwa: false }
    }
}

impl EvolveOptions {
    pub fn rwa() -> Self {
        EvolveOptions { rwa: true }
    }
}

// ---------------------------------------------------------------------------
// closed-form oscillatory integrals

/// `∫₀^τ e^{iλu} uⁿ du`.
fn moment(n: usize, lambda: f64, tau: f64) -> C64 {
    let x = lambda * tau;
    if x.abs() <= (n as f64).max(4.0) {
        // τ^{n+1} Σ_k (ix)^k / (k! (n+k+1))
        let mut term = C64::new(1.0, 0.0);
        let mut sum = C64::new(1.0 / (n as f64 + 1.0), 0.0);
        for k in 1..200 {
            term *= I * x / k as f64;
            let add = term / (n + k + 1) as f64;
            sum += add;
            if add.norm() < 1e-18 * sum.norm() && k as f64 > x.abs() {
                break;
            }
        }
        sum * tau.powi(n as i32 + 1)
    } else {
        let e = C64::from_polar(1.0, x);
        let il = I * lambda;
        let mut m = (e - 1.0) / il;
        let mut tk = 1.0;
        for k in 1..=n {
            tk *= tau;
            m = (e * tk - m * k as f64) / il;
        }
        m
    }
}

/// `∫₀^τ du e^{iau} ∫₀^u dv e^{−ibv}`.
fn double_integral(a: f64, b: f64, tau: f64) -> C64 {
    if (b * tau).abs() > 1e-2 {
        (moment(0, a, tau) - moment(0, a - b, tau)) / (I * b)
    } else {
        // inner integral Σ_k (−ib)^k u^{k+1} / (k+1)!
        let mut coeff = C64::new(1.0, 0.0);
        let mut sum = C64::new(0.0, 0.0);
        for k in 0..30 {
            coeff /= (k + 1) as f64;
            let add = coeff * moment(k + 1, a, tau);
            sum += add;
            if add.norm() <= 1e-18 * sum.norm() {
                break;
            }
            coeff *= -I * b;
        }
        sum
    }
}

/// One SDF drive as seen by one mode: the displacement rate per unit
/// participation is `f [e^{iφ} e^{−iδt} − e^{−iφ} e^{iσt}]`, `σ = μ + ω_m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdfTone {
    pub f: f64,
    pub delta: f64,
    pub sum_freq: f64,
    pub phase: f64,
    pub rwa: bool,
}

impl SdfTone {
    pub fn resonant(f: f64, phase: f64) -> Self {
        SdfTone {
            f,
            delta: 0.0,
            sum_freq: 0.0,
            phase,
            rwa: true,
        }
    }

    fn terms(&self) -> ([(C64, f64); 2], usize) {
        let co = (C64::from_polar(self.f, self.phase), -self.delta);
        let counter = (-C64::from_polar(self.f, -self.phase), self.sum_freq);
        ([co, counter], if self.rwa { 1 } else { 2 })
    }

    /// `∫_{t0}^{t} rate dt'`.
    pub fn increment(&self, t0: f64, t: f64) -> C64 {
        let tau = t - t0;
        let (terms, n) = self.terms();
        terms[..n]
            .iter()
            .map(|&(c, l)| c * C64::from_polar(1.0, l * t0) * moment(0, l, tau))
            .sum()
    }

    /// `Im ∫_{t0}^{t} dt' rate(t') ∫_{t0}^{t'} rate(t'')* dt''`: the phase a
    /// unit-participation branch picks up from its own path in this interval.
    pub fn self_area(&self, t0: f64, t: f64) -> f64 {
        let tau = t - t0;
        let (terms, n) = self.terms();
        let mut acc = C64::new(0.0, 0.0);
        for &(cp, lp) in &terms[..n] {
            for &(cq, lq) in &terms[..n] {
                acc += cp * cq.conj()
                    * C64::from_polar(1.0, (lp - lq) * t0)
                    * double_integral(lp, lq, tau);
            }
        }
        acc.im
    }
}

/// Amplitude increment `b ∫_{t0}^{t} rate dt'` of one ion on one mode.
pub fn sdf_increment(tone: &SdfTone, b: f64, t0: f64, t: f64) -> C64 {
    tone.increment(t0, t) * b
}

/// Interaction-picture propagator of a PA drive `G` detuned by `Δ` over
/// `[t0, t0 + τ]`.
pub fn pa_propagator(g: C64, delta: f64, t0: f64, tau: f64) -> NormalForm {
    NormalForm::rotation(-delta * (t0 + tau)) * from_generator(g, delta, tau) * NormalForm::rotation(delta * t0)
}

// ---------------------------------------------------------------------------
// state

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinMotionState {
    /// `a[i][m]`: amplitude of ion `i` on mode `m`.
    pub a: Vec<Vec<C64>>,
    pub frames: Vec<NormalForm>,
    pub phi: Vec<Vec<f64>>,
    pub time: f64,
    pub excursion_max: f64,
    pub r_max: f64,
}

impl SpinMotionState {
    pub fn vacuum(n_ions: usize, mode_count: usize) -> Self {
        SpinMotionState {
            a: vec![vec![C64::new(0.0, 0.0); mode_count]; n_ions],
            frames: vec![NormalForm::IDENTITY; mode_count],
            phi: vec![vec![0.0; n_ions]; n_ions],
            time: 0.0,
            excursion_max: 0.0,
            r_max: 0.0,
        }
    }

    pub fn n_ions(&self) -> usize {
        self.a.len()
    }

    pub fn mode_count(&self) -> usize {
        self.frames.len()
    }

    /// `Σᵢ sᵢ A_{im}`.
    pub fn branch_displacement(&self, spins: &[i8], mode: usize) -> C64 {
        self.a
            .iter()
            .zip(spins)
            .map(|(row, &s)| row[mode] * s as f64)
            .sum()
    }

    /// `Σᵢⱼ sᵢsⱼ Φᵢⱼ`.
    pub fn branch_phase(&self, spins: &[i8]) -> f64 {
        let mut acc = 0.0;
        for (i, row) in self.phi.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                acc += (spins[i] * spins[j]) as f64 * p;
            }
        }
        acc
    }

    /// Full single-mode branch unitary `e^{iΘ} D(β) F` for spin pattern `s`.
    pub fn branch_unitary(&self, spins: &[i8], mode: usize) -> NormalForm {
        NormalForm::phase(self.branch_phase(spins))
            * NormalForm::displacement(self.branch_displacement(spins, mode))
            * self.frames[mode]
    }

    fn aligned_excursion(&self) -> f64 {
        (0..self.mode_count())
            .map(|m| {
                let beta: C64 = self.a.iter().map(|row| row[m]).sum();
                beta.norm() * (2.0 * self.frames[m].r()).cosh()
            })
            .sum()
    }

    fn is_finite(&self) -> bool {
        self.a.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.phi.iter().flatten().all(|x| x.is_finite())
            && self.frames.iter().all(|f| f.is_finite())
    }

    fn record_monitors(&mut self) {
        self.excursion_max = self.excursion_max.max(self.aligned_excursion());
        for f in &self.frames {
            self.r_max = self.r_max.max(f.r());
        }
    }

    fn apply_sdf(&mut self, tones: &[SdfTone], modes: &ModeTable, t0: f64, t1: f64) {
        let n = self.n_ions();
        for (m, tone) in tones.iter().enumerate() {
            let k = tone.increment(t0, t1);
            let area = tone.self_area(t0, t1);
            let delta: Vec<C64> = (0..n).map(|i| k * modes.b[i][m]).collect();
            for i in 0..n {
                for j in i..n {
                    let cross = 0.5
                        * ((delta[i] * self.a[j][m].conj()).im + (delta[j] * self.a[i][m].conj()).im);
                    let dphi = cross + modes.b[i][m] * modes.b[j][m] * area;
                    self.phi[i][j] += dphi;
                    if j != i {
                        self.phi[j][i] += dphi;
                    }
                }
            }
            for i in 0..n {
                self.a[i][m] += delta[i];
            }
        }
    }

    fn apply_pa(&mut self, props: &[NormalForm]) {
        for (m, p) in props.iter().enumerate() {
            let bog = p.bogoliubov();
            for row in self.a.iter_mut() {
                row[m] = bog.push(row[m]);
            }
            self.frames[m] = *p * self.frames[m];
        }
    }
}

/// Per-mode drive parameters of one segment.
struct SegmentDrive<'a> {
    seg: &'a Segment,
    tones: Vec<SdfTone>,
    pa: Vec<(C64, f64)>,
}

impl<'a> SegmentDrive<'a> {
    fn new(seg: &'a Segment, modes: &ModeTable, target: usize, offsets: &[f64], opts: &EvolveOptions) -> Self {
        let wt = modes.omega[target];
        let mut tones = Vec::new();
        let mut pa = Vec::new();
        for (m, &w) in modes.omega.iter().enumerate() {
            let actual = w + offsets[m];
            match seg.kind {
                SegmentKind::Sdf => {
                    let mu = wt + seg.detuning;
                    tones.push(SdfTone {
                        f: seg.strength * (wt / w).sqrt(),
                        delta: mu - actual,
                        sum_freq: mu + actual,
                        phase: seg.drive_phase,
                        rwa: opts.rwa,
                    });
                }
                SegmentKind::Pa => {
                    let g = C64::from_polar(seg.strength * wt / w, seg.effective_phase());
                    pa.push((g, wt + seg.detuning - actual));
                }
                SegmentKind::Idle => {}
            }
        }
        SegmentDrive { seg, tones, pa }
    }

    fn apply(&self, state: &mut SpinMotionState, modes: &ModeTable, t0: f64, t1: f64) {
        match self.seg.kind {
            SegmentKind::Sdf => state.apply_sdf(&self.tones, modes, t0, t1),
            SegmentKind::Pa => {
                let props: Vec<NormalForm> = self
                    .pa
                    .iter()
                    .map(|&(g, d)| pa_propagator(g, d, t0, t1 - t0))
                    .collect();
                state.apply_pa(&props);
            }
            SegmentKind::Idle => {}
        }
        state.time = t1;
    }
}

fn check_dimensions(state: &SpinMotionState, schedule: &Schedule, modes: &ModeTable, offsets: &[f64]) -> Result<()> {
    if schedule.n_ions != modes.n_ions {
        return Err(Error::invalid(format!(
            "schedule addresses {} ions but mode table has {}",
            schedule.n_ions, modes.n_ions
        )));
    }
    if state.n_ions() != modes.n_ions || state.mode_count() != modes.mode_count() {
        return Err(Error::invalid("state dimensions do not match mode table"));
    }
    if offsets.len() != modes.mode_count() {
        return Err(Error::invalid(format!(
            "expected {} mode offsets, got {}",
            modes.mode_count(),
            offsets.len()
        )));
    }
    if schedule.target_mode >= modes.mode_count() {
        return Err(Error::invalid(format!(
            "target mode {} out of range",
            schedule.target_mode
        )));
    }
    schedule.validate()
}

/// Evolves `initial` through `schedule`; `offsets[m]` shifts mode `m`'s
/// actual frequency away from its nominal value.
pub fn evolve(
    initial: &SpinMotionState,
    schedule: &Schedule,
    modes: &ModeTable,
    offsets: &[f64],
    opts: &EvolveOptions,
) -> Result<SpinMotionState> {
    check_dimensions(initial, schedule, modes, offsets)?;
    let mut state = initial.clone();
    for (k, seg) in schedule.segments.iter().enumerate() {
        let drive = SegmentDrive::new(seg, modes, schedule.target_mode, offsets, opts);
        let t0 = state.time;
        drive.apply(&mut state, modes, t0, t0 + seg.duration);
        state.record_monitors();
        if !state.is_finite() {
            return Err(Error::numerical(format!("state overflowed in segment {k}")));
        }
    }
    Ok(state)
}

/// Evolution from vacuum with no frequency offsets.
pub fn evolve_vacuum(schedule: &Schedule, modes: &ModeTable, opts: &EvolveOptions) -> Result<SpinMotionState> {
    let init = SpinMotionState::vacuum(modes.n_ions, modes.mode_count());
    evolve(&init, schedule, modes, &vec![0.0; modes.mode_count()], opts)
}

/// One sample of the all-spins-up trajectory on the target mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub segment: usize,
    pub alpha: C64,
    pub r: f64,
    pub theta: f64,
}

/// Samples the aligned-branch displacement of the target mode
/// `samples_per_segment` times inside every segment.
pub fn trajectory(
    schedule: &Schedule,
    modes: &ModeTable,
    offsets: &[f64],
    opts: &EvolveOptions,
    samples_per_segment: usize,
) -> Result<Vec<TrajectoryPoint>> {
    let mut state = SpinMotionState::vacuum(modes.n_ions, modes.mode_count());
    check_dimensions(&state, schedule, modes, offsets)?;
    let target = schedule.target_mode;
    let spins = vec![1i8; modes.n_ions];
    let steps = samples_per_segment.max(1);
    let point = |s: &SpinMotionState, k: usize| TrajectoryPoint {
        t: s.time,
        segment: k,
        alpha: s.branch_displacement(&spins, target),
        r: s.frames[target].r(),
        theta: s.frames[target].theta(),
    };
    let mut out = vec![point(&state, 0)];
    for (k, seg) in schedule.segments.iter().enumerate() {
        let drive = SegmentDrive::new(seg, modes, target, offsets, opts);
        let start = state.time;
        for step in 1..=steps {
            let a = start + seg.duration * (step - 1) as f64 / steps as f64;
            let b = start + seg.duration * step as f64 / steps as f64;
            drive.apply(&mut state, modes, a, b);
            out.push(point(&state, k));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// diagnostics

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub residual_worst: f64,
    pub phase_matrix: Vec<Vec<f64>>,
    /// `bᵀΦb / N` over the target-mode participation vector.
    pub phase_coefficient: f64,
    #[serde(rename = "G")]
    pub g: Option<f64>,
    pub epsilon_mf: f64,
    pub lamb_dicke_bound_ok: bool,
    pub lamb_dicke_bound: f64,
    pub r_max: f64,
    pub excursion_max: f64,
    pub final_squeeze: f64,
    pub gate_time: f64,
}

impl GateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Largest summed-over-modes residual `Σ_m |Σᵢ sᵢ A_{im}|` over all spin
/// patterns (global spin flip is a symmetry, so `s₀ = +1`).
pub fn residual_worst(state: &SpinMotionState) -> f64 {
    let n = state.n_ions();
    if n == 0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    let mut spins = vec![1i8; n];
    for pattern in 0u64..(1u64 << (n - 1)) {
        for (i, s) in spins.iter_mut().enumerate().skip(1) {
            *s = if pattern >> (i - 1) & 1 == 1 { -1 } else { 1 };
        }
        let total: f64 = (0..state.mode_count())
            .map(|m| state.branch_displacement(&spins, m).norm())
            .sum();
        worst = worst.max(total);
    }
    worst
}

/// `bᵀΦb / N` for participation vector `b`.
pub fn phase_coefficient(state: &SpinMotionState, b: &[f64]) -> f64 {
    let n = state.n_ions();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += b[i] * b[j] * state.phi[i][j];
        }
    }
    acc / n as f64
}

/// SDF-only square phase `2(fT/4)²/N` for the same `f` and `T`.
pub fn reference_phase(f: f64, t: f64, n_ions: usize) -> f64 {
    2.0 * (f * t / 4.0).powi(2) / n_ions as f64
}

pub fn diagnostics(
    state: &SpinMotionState,
    schedule: &Schedule,
    modes: &ModeTable,
    eta: f64,
    sz2: f64,
) -> Result<GateReport> {
    if state.n_ions() != modes.n_ions || schedule.target_mode >= modes.mode_count() {
        return Err(Error::invalid("state does not match schedule and mode table"));
    }
    let n = modes.n_ions;
    let b = modes.mode_vector(schedule.target_mode);
    let phase = phase_coefficient(state, &b);
    let gate_time = schedule.total_duration();
    let g = schedule
        .sdf_strength()
        .filter(|f| *f > 0.0 && gate_time > 0.0)
        .map(|f| phase / reference_phase(f, gate_time, n));
    let residual = residual_worst(state);
    let bound = if phase.abs() > 0.0 && sz2 > 0.0 {
        (n as f64 / (2.0 * phase.abs() * sz2)).sqrt() / eta
    } else {
        f64::INFINITY
    };
    Ok(GateReport {
        residual_worst: residual,
        phase_matrix: state.phi.clone(),
        phase_coefficient: phase,
        g,
        epsilon_mf: residual * residual,
        lamb_dicke_bound_ok: state.r_max.exp() < bound,
        lamb_dicke_bound: bound,
        r_max: state.r_max,
        excursion_max: state.excursion_max,
        final_squeeze: state.frames.iter().map(|f| f.r()).fold(0.0, f64::max),
        gate_time,
    })
}

/// Evolves from vacuum and reports in one call.
pub fn run_report(
    schedule: &Schedule,
    modes: &ModeTable,
    offsets: &[f64],
    opts: &EvolveOptions,
    eta: f64,
    sz2: f64,
) -> Result<GateReport> {
    let init = SpinMotionState::vacuum(modes.n_ions, modes.mode_count());
    let state = evolve(&init, schedule, modes, offsets, opts)?;
    diagnostics(&state, schedule, modes, eta, sz2)
}

// ---------------------------------------------------------------------------
// spectator modes

/// Unit-strength SDF displacement of a mode detuned by `Δ` over `[0, t]`.
fn detuned_leg(delta: f64, t: f64) -> C64 {
    moment(0, -delta, t)
}

/// Ratio of spectator residual displacement with and without PA after one
/// amplified leg `U_P† U_S U_P`, with the SDF strength of the no-PA case
/// scaled by `e^{g t₂}` so that both deliver the same target displacement.
///
/// The PA pulse on the spectator is taken in the closed form
/// `S(r e^{iφ}) R(φ)` with `sinh r = g sin(wτ)/w` (hyperbolic for `Δ < g`) and
/// `φ = atan(tan φ)` on the principal branch, and `U_P†` is its literal
/// adjoint. The principal-branch angle jumps by `π` whenever `tan φ` passes
/// through infinity, which makes the curve discontinuous for `Δ > g`.
pub fn spectator_ratio(f: f64, g: f64, delta_m: f64, t1: f64, t2: f64) -> f64 {
    let _ = f;
    let leg = detuned_leg(delta_m, t1);
    let k2 = g * g - delta_m * delta_m;
    let (c, s) = if k2 > 0.0 {
        let k = k2.sqrt();
        ((k * t2).cosh(), if k * t2 < 1e-8 { t2 } else { (k * t2).sinh() / k })
    } else if k2 < 0.0 {
        let w = (-k2).sqrt();
        ((w * t2).cos(), if w * t2 < 1e-8 { t2 } else { (w * t2).sin() / w })
    } else {
        (1.0, t2)
    };
    let sinh_r = g * s;
    let cosh_r = (1.0 + sinh_r * sinh_r).sqrt();
    let phi = (delta_m * s / c).atan();
    let with_pa = leg * cosh_r + leg.conj() * C64::from_polar(sinh_r, phi);
    with_pa.norm() / (leg.norm() * (g * t2).exp())
}

/// Same ratio for the physical pulse sequence: a PA pulse of sign `+1`,
/// the detuned SDF leg and a PA pulse of sign `−1`, all with continuous
/// interaction-picture time.
pub fn spectator_ratio_exact(f: f64, g: f64, delta_m: f64, t1: f64, t2: f64) -> f64 {
    let _ = f;
    // the first pulse acts on vacuum and leaves no displacement
    let post = pa_propagator(C64::new(-g, 0.0), delta_m, t1 + t2, t2);
    let tone = SdfTone {
        f: 1.0,
        delta: delta_m,
        sum_freq: 0.0,
        phase: 0.0,
        rwa: true,
    };
    let k = tone.increment(t2, t1 + t2);
    let with_pa = post.bogoliubov().push(k);
    with_pa.norm() / (detuned_leg(delta_m, t1).norm() * (g * t2).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{build_com_table, solve_linear_chain};
    use crate::schedule::{build_polygon, build_sdf_square, build_square};
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};

    const W: f64 = TAU * 1e6;

    fn quad(f: impl Fn(f64) -> C64, a: f64, b: f64, n: usize) -> C64 {
        // composite Simpson
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += f(a + k as f64 * h) * w;
        }
        s * (h / 3.0)
    }

    #[test]
    fn moments_match_quadrature() {
        for &(n, l, tau) in &[(0, 0.0, 1.3), (0, 3.0, 1.0), (2, 7.5, 1.0), (5, -40.0, 0.7), (11, 2.0, 1.5), (3, 1e-9, 2.0)] {
            let q = quad(|u| C64::from_polar(u.powi(n as i32), l * u), 0.0, tau, 20_000);
            assert!((moment(n, l, tau) - q).norm() < 1e-10 * (1.0 + q.norm()), "n={n} l={l}");
        }
    }

    #[test]
    fn double_integral_matches_quadrature() {
        for &(a, b, tau) in &[(0.0, 0.0, 1.0), (1.0, 1e-4, 1.0), (-2.0, 3.0, 0.8), (50.0, -0.003, 1.0), (5.0, 5.0, 2.0)] {
            let inner = |u: f64| (1.0 - C64::from_polar(1.0, -b * u)) / (I * b);
            let inner_safe = |u: f64| if b == 0.0 { C64::new(u, 0.0) } else { inner(u) };
            let q = quad(|u| C64::from_polar(1.0, a * u) * inner_safe(u), 0.0, tau, 20_000);
            assert!((double_integral(a, b, tau) - q).norm() < 1e-9, "a={a} b={b}");
        }
    }

    #[test]
    fn sdf_increment_examples() {
        let tone = SdfTone::resonant(1.0, 0.0);
        assert_relative_eq!(sdf_increment(&tone, 1.0, 0.0, 0.5).norm(), 0.5, max_relative = 1e-15);
        let d = 3.0;
        let det = SdfTone { delta: d, ..tone };
        let tau = 0.8;
        let expected = 2.0 * (d * tau / 2.0).sin().abs() / d;
        assert_relative_eq!(sdf_increment(&det, 1.0, 0.1, 0.1 + tau).norm(), expected, max_relative = 1e-13);
        let full = SdfTone { delta: TAU, ..tone };
        assert!(sdf_increment(&full, 1.0, 0.0, 1.0).norm() < 1e-15);
        let zero = SdfTone::resonant(0.0, 0.3);
        assert_eq!(sdf_increment(&zero, 1.0, 0.0, 1.0).norm(), 0.0);
    }

    #[test]
    fn counter_rotating_increment_matches_quadrature() {
        let tone = SdfTone {
            f: 2.0,
            delta: 0.7,
            sum_freq: 40.0,
            phase: 0.4,
            rwa: false,
        };
        let rate = |t: f64| {
            C64::from_polar(tone.f, tone.phase) * C64::from_polar(1.0, -tone.delta * t)
                - C64::from_polar(tone.f, -tone.phase) * C64::from_polar(1.0, tone.sum_freq * t)
        };
        let q = quad(rate, 0.3, 1.4, 40_000);
        assert!((tone.increment(0.3, 1.4) - q).norm() < 1e-10);
        // self area by nested quadrature of the running displacement
        let running = |t: f64| quad(rate, 0.3, t, 2_000);
        let area = quad(|t| rate(t) * running(t).conj(), 0.3, 1.4, 2_000).im;
        assert!((tone.self_area(0.3, 1.4) - area).abs() < 1e-7);
    }

    #[test]
    fn sdf_square_phase() {
        for &n in &[1usize, 2, 4] {
            let modes = build_com_table(n, W).unwrap();
            let (f, t) = (1.7e4, 3.3e-4);
            let s = build_sdf_square(f, t).with_ions(n);
            let st = evolve_vacuum(&s, &modes, &EvolveOptions::rwa()).unwrap();
            let rep = diagnostics(&st, &s, &modes, 0.1, 1.0).unwrap();
            assert_relative_eq!(rep.phase_coefficient, reference_phase(f, t, n), max_relative = 1e-10);
            assert!(rep.residual_worst < 1e-10);
            assert_relative_eq!(rep.g.unwrap(), 1.0, max_relative = 1e-12);
            for row in &st.phi {
                for p in row {
                    assert_relative_eq!(*p, reference_phase(f, t, n), max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn amplified_square_phase() {
        let modes = build_com_table(2, W).unwrap();
        for &r in &[0.0, 0.5, 1.0, 2.0] {
            let (f, g, t1) = (1.0e4, 2.0e3, 1.0e-4);
            let t2 = r / g;
            let s = build_square(f, g, t1, t2, 0.0).with_ions(2);
            let st = evolve_vacuum(&s, &modes, &EvolveOptions::rwa()).unwrap();
            let rep = diagnostics(&st, &s, &modes, 0.1, 1.0).unwrap();
            let alpha = f * t1 / 2f64.sqrt();
            let expected = 2.0 * alpha * alpha * (2.0 * r).exp();
            assert_relative_eq!(rep.phase_coefficient, expected, max_relative = 1e-9);
            assert!(rep.residual_worst < 1e-10);
            assert!(rep.final_squeeze < 1e-12);
        }
    }

    #[test]
    fn empty_schedule_keeps_state() {
        let modes = build_com_table(3, W).unwrap();
        let s = Schedule::new(3, 0, "", vec![]);
        let init = SpinMotionState::vacuum(3, 1);
        let st = evolve(&init, &s, &modes, &[0.0], &EvolveOptions::default()).unwrap();
        assert_eq!(st, init);
        let rep = diagnostics(&st, &s, &modes, 0.1, 1.0).unwrap();
        assert!(rep.g.is_none());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let modes = build_com_table(3, W).unwrap();
        let s = build_sdf_square(1.0, 1.0).with_ions(2);
        assert!(matches!(
            evolve_vacuum(&s, &modes, &EvolveOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
        let s3 = build_sdf_square(1.0, 1.0).with_ions(3);
        let init = SpinMotionState::vacuum(3, 1);
        assert!(evolve(&init, &s3, &modes, &[0.0, 0.0], &EvolveOptions::default()).is_err());
    }

    #[test]
    fn pa_on_vacuum_keeps_phase_zero() {
        let modes = solve_linear_chain(3, W).unwrap();
        let s = Schedule::new(
            3,
            0,
            "",
            vec![Segment::pa(3e3, 0.2, 1, 4e-4), Segment::pa(1e3, 1.0, -1, 1e-4).with_detuning(500.0)],
        );
        let st = evolve_vacuum(&s, &modes, &EvolveOptions::default()).unwrap();
        assert!(st.phi.iter().flatten().all(|p| *p == 0.0));
        assert!(st.frames[0].r() > 1.0);
        assert!(st.frames[2].r() < 1e-3);
    }

    #[test]
    fn pa_updates_modes_independently() {
        let modes = solve_linear_chain(3, W).unwrap();
        let pulse = Schedule::new(3, 0, "", vec![Segment::sdf(2e4, 0.3, 5e-5), Segment::pa(3e3, 0.2, 1, 4e-4)]);
        let st = evolve_vacuum(&pulse, &modes, &EvolveOptions::default()).unwrap();
        for m in 0..3 {
            let single = modes.single_mode(m);
            let one = SpinMotionState::vacuum(3, 1);
            // a single-mode table needs the original target frequency as its reference
            let mut sch = pulse.clone();
            let scale = modes.omega[0] / modes.omega[m];
            for seg in &mut sch.segments {
                match seg.kind {
                    SegmentKind::Sdf => {
                        seg.strength *= scale.sqrt();
                        seg.detuning = modes.omega[0] - modes.omega[m];
                    }
                    SegmentKind::Pa => {
                        seg.strength *= scale;
                        seg.detuning = modes.omega[0] - modes.omega[m];
                    }
                    SegmentKind::Idle => {}
                }
            }
            let out = evolve(&one, &sch, &single, &[0.0], &EvolveOptions::default()).unwrap();
            for i in 0..3 {
                assert!((out.a[i][0] - st.a[i][m]).norm() < 1e-9 * (1.0 + st.a[i][m].norm()));
            }
            assert!((out.frames[0].xi - st.frames[m].xi).norm() < 1e-12);
        }
    }

    #[test]
    fn reversibility() {
        let modes = build_com_table(2, W).unwrap();
        let s = build_polygon(5, 1.3e4, 2.1e3, 7e-5, 2.2e-4, 0.4).unwrap().with_ions(2);
        let mut word = s.clone();
        word.segments.extend(s.inverse_word().segments);
        let st = evolve_vacuum(&word, &modes, &EvolveOptions::rwa()).unwrap();
        assert!(residual_worst(&st) < 1e-9);
        assert!(st.phi.iter().flatten().all(|p| p.abs() < 1e-9));
        assert!(st.frames[0].r() < 1e-9);
    }

    #[test]
    fn residual_linear_in_offset() {
        let modes = build_com_table(2, W).unwrap();
        let g = 5e3;
        let s = build_square(2e4, g, 2.0 / g, 1.0 / g, 0.0).with_ions(2);
        let init = SpinMotionState::vacuum(2, 1);
        let ratios: Vec<(f64, f64)> = [1e-7, 1e-6, 1e-5, 1e-4]
            .iter()
            .map(|&x| {
                let st = evolve(&init, &s, &modes, &[x * g], &EvolveOptions::rwa()).unwrap();
                (x.ln(), residual_worst(&st).ln())
            })
            .collect();
        let n = ratios.len() as f64;
        let mx = ratios.iter().map(|p| p.0).sum::<f64>() / n;
        let my = ratios.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = ratios.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / ratios.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn counter_rotating_term_is_small_for_fast_modes() {
        let modes = build_com_table(1, W).unwrap();
        let s = build_sdf_square(2e4, 4e-4);
        let a = evolve_vacuum(&s, &modes, &EvolveOptions::rwa()).unwrap();
        let b = evolve_vacuum(&s, &modes, &EvolveOptions::default()).unwrap();
        let rel = (a.phi[0][0] - b.phi[0][0]).abs() / a.phi[0][0];
        assert!(rel > 0.0 && rel < 1e-2);
    }

    #[test]
    fn spectator_ratio_examples() {
        assert_relative_eq!(spectator_ratio(1.0, 0.0, 3.0, 0.5, 0.5), 1.0, max_relative = 1e-14);
        assert_relative_eq!(spectator_ratio_exact(1.0, 0.0, 3.0, 0.5, 0.5), 1.0, max_relative = 1e-12);
        let g = 1.0;
        // gT/4 = t1 + 2 t2 with t1 = 2/g
        for &q in &[4.0, 6.0, 10.0] {
            let t2 = (q - 2.0) / 2.0;
            assert!(spectator_ratio(1.0, g, g, 2.0, t2) < 1.0, "q={q}");
        }
        let r5 = spectator_ratio(1.0, g, 5.0 * g, 2.0, 1.0);
        assert!(r5 < 1.0);
        // below threshold the principal branch is the true angle, so the model
        // equals the literal adjoint sandwich of the interaction-picture pulse
        let (d, t1, t2) = (0.5 * g, 2.0, 1.0);
        let pre = pa_propagator(C64::new(g, 0.0), d, 0.0, t2);
        let k = SdfTone { delta: d, ..SdfTone::resonant(1.0, 0.0) }.increment(t2, t1 + t2);
        let sandwich = pre.inverse().bogoliubov().push(k).norm() / (detuned_leg(d, t1).norm() * (g * t2).exp());
        assert_relative_eq!(spectator_ratio(1.0, g, d, t1, t2), sandwich, max_relative = 1e-9);
    }

    #[test]
    fn spectator_ratio_jumps_past_threshold() {
        let g = 1.0;
        let d = 2.0 * g;
        // cos(√3 g t2) = 0 at g t2 = π/(2√3)
        let t2c = PI / (2.0 * 3f64.sqrt());
        let lo = spectator_ratio(1.0, g, d, 2.0, t2c - 1e-7);
        let hi = spectator_ratio(1.0, g, d, 2.0, t2c + 1e-7);
        assert!((lo - hi).abs() > 1e-2, "lo={lo} hi={hi}");
        let elo = spectator_ratio_exact(1.0, g, d, 2.0, t2c - 1e-7);
        let ehi = spectator_ratio_exact(1.0, g, d, 2.0, t2c + 1e-7);
        assert!((elo - ehi).abs() < 1e-5);
    }

    #[test]
    fn report_json_shape() {
        let modes = build_com_table(2, W).unwrap();
        let s = build_sdf_square(1e4, 1e-4).with_ions(2);
        let rep = run_report(&s, &modes, &[0.0], &EvolveOptions::rwa(), 0.1, 0.5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        for key in ["residual_worst", "phase_matrix", "G", "epsilon_mf", "lamb_dicke_bound_ok"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn lamb_dicke_flag() {
        let modes = build_com_table(2, W).unwrap();
        let g = 1e4;
        let s = build_square(3e4, g, 2.0 / g, 3.0 / g, 0.0).with_ions(2);
        let loose = run_report(&s, &modes, &[0.0], &EvolveOptions::rwa(), 1e-5, 0.5).unwrap();
        let tight = run_report(&s, &modes, &[0.0], &EvolveOptions::rwa(), 1.0, 0.5).unwrap();
        assert!(loose.lamb_dicke_bound_ok);
        assert!(!tight.lamb_dicke_bound_ok);
    }

    #[test]
    fn overflow_is_a_numerical_failure() {
        let s = build_square(1.0, 1.0, 1.0, 800.0, 0.0);
        let modes = build_com_table(1, 1.0).unwrap();
        let err = evolve_vacuum(&s, &modes, &EvolveOptions::rwa()).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure(_)));
    }

    #[test]
    fn trajectory_ends_at_evolved_state() {
        let modes = build_com_table(1, W).unwrap();
        let g = 1e4;
        let s = build_square(3e4, g, 2.0 / g, 1.0 / g, 0.0);
        let tr = trajectory(&s, &modes, &[0.0], &EvolveOptions::rwa(), 7).unwrap();
        assert_eq!(tr.len(), 1 + 12 * 7);
        assert!(tr.last().unwrap().alpha.norm() < 1e-9);
        let peak = tr.iter().map(|p| p.alpha.norm()).fold(0.0, f64::max);
        assert!(peak > 0.99 * 6.0 * 1f64.exp());
    }
}

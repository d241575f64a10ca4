//! Brute-force reference: one motional mode in a truncated Fock space.
//!
//! Each segment is applied as the exponential of its constant rotating-frame
//! generator, computed by a scaled Taylor series on the occupied part of the
//! number basis. The cutoff doubles whenever probability reaches the guard
//! band at the top of the space.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{evolve_vacuum, EvolveOptions};
use crate::error::{Error, Result};
use crate::gaussian::{angle_diff, NormalForm};
use crate::modes::ModeTable;
use crate::schedule::{Schedule, Segment, SegmentKind};

pub const INITIAL_CUTOFF: usize = 32;
pub const MAX_CUTOFF: usize = 4096;
pub const LEAK_LIMIT: f64 = 1e-10;
const STEP_LEAK: f64 = 1e-13;
const SUBSTEP_NORM: f64 = 4.0;

/// Generator `i·rot·n + (lin a† − lin* a) + ½(quad* a² − quad a†²)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Generator {
    pub rot: f64,
    pub lin: C64,
    pub quad: C64,
}

impl Generator {
    fn scaled(&self, s: f64) -> Generator {
        Generator {
            rot: self.rot * s,
            lin: self.lin * s,
            quad: self.quad * s,
        }
    }

    fn norm_bound(&self, top: usize) -> f64 {
        let n = top as f64;
        self.rot.abs() * n + 2.0 * self.lin.norm() * (n + 1.0).sqrt() + self.quad.norm() * (n + 2.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    pub cutoff: usize,
    /// Amplitudes for `|0⟩ … |cutoff⟩`.
    pub amplitudes: Vec<C64>,
    pub leaked_norm: f64,
}

impl FockState {
    pub fn vacuum(cutoff: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); cutoff + 1];
        amplitudes[0] = C64::new(1.0, 0.0);
        FockState {
            cutoff,
            amplitudes,
            leaked_norm: 0.0,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn mean_photon(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum()
    }

    /// `⟨a⟩`.
    pub fn mean_a(&self) -> C64 {
        (1..self.amplitudes.len())
            .map(|n| self.amplitudes[n - 1].conj() * self.amplitudes[n] * (n as f64).sqrt())
            .sum()
    }

    /// `⟨self|other⟩`, zero-padding the shorter vector.
    pub fn overlap(&self, other: &FockState) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn top(&self) -> usize {
        self.amplitudes
            .iter()
            .rposition(|a| a.norm_sqr() > 1e-60)
            .unwrap_or(0)
    }

    fn grown(&self, cutoff: usize) -> FockState {
        let mut amplitudes = self.amplitudes.clone();
        amplitudes.resize(cutoff + 1, C64::new(0.0, 0.0));
        FockState {
            cutoff,
            amplitudes,
            leaked_norm: self.leaked_norm,
        }
    }

    fn guard_start(&self) -> usize {
        self.cutoff - self.cutoff / 8
    }

    /// Applies `exp(K)` once at the current cutoff; returns the state and the
    /// probability that reached the guard band.
    fn exp_at_cutoff(&self, k: &Generator) -> (FockState, f64) {
        let mut out = self.clone();
        let mut leak = 0.0;
        let guard = self.guard_start();
        let mut done = 0.0;
        while done < 1.0 {
            let top = (out.top() + 2 * 40).min(self.cutoff);
            let bound = k.norm_bound(top);
            let frac = if bound * (1.0 - done) <= SUBSTEP_NORM {
                1.0 - done
            } else {
                SUBSTEP_NORM / bound
            };
            taylor_step(&mut out.amplitudes, &k.scaled(frac));
            done += frac;
            for a in out.amplitudes[guard..].iter_mut() {
                leak += a.norm_sqr();
                *a = C64::new(0.0, 0.0);
            }
        }
        (out, leak)
    }

    /// Applies `exp(K)`, doubling the cutoff until the step leaks less than
    /// `1e-13`.
    pub fn apply_generator(&self, k: &Generator) -> Result<FockState> {
        let mut base = self.clone();
        loop {
            let (mut out, leak) = base.exp_at_cutoff(k);
            if leak < STEP_LEAK || base.cutoff >= MAX_CUTOFF {
                out.leaked_norm += leak;
                if out.leaked_norm >= LEAK_LIMIT {
                    return Err(Error::TruncationFailure {
                        cutoff: out.cutoff,
                        leaked: out.leaked_norm,
                    });
                }
                return Ok(out);
            }
            base = base.grown((base.cutoff * 2).min(MAX_CUTOFF));
        }
    }

    pub fn apply_displace(&self, alpha: C64) -> Result<FockState> {
        if alpha.norm() == 0.0 {
            return Ok(self.clone());
        }
        self.apply_generator(&Generator {
            lin: alpha,
            ..Default::default()
        })
    }

    pub fn apply_squeeze(&self, xi: C64) -> Result<FockState> {
        if xi.norm() == 0.0 {
            return Ok(self.clone());
        }
        self.apply_generator(&Generator {
            quad: xi,
            ..Default::default()
        })
    }

    pub fn apply_rotation(&self, phi: f64) -> FockState {
        let mut out = self.clone();
        for (n, a) in out.amplitudes.iter_mut().enumerate() {
            *a *= C64::from_polar(1.0, phi * n as f64);
        }
        out
    }

    pub fn apply_phase(&self, gamma: f64) -> FockState {
        let mut out = self.clone();
        let p = C64::from_polar(1.0, gamma);
        for a in out.amplitudes.iter_mut() {
            *a *= p;
        }
        out
    }

    /// `e^{iγ} D(α) S(ξ) R(φ)` applied to this state.
    pub fn apply_normal_form(&self, nf: &NormalForm) -> Result<FockState> {
        Ok(self
            .apply_rotation(nf.phi)
            .apply_squeeze(nf.xi)?
            .apply_displace(nf.alpha)?
            .apply_phase(nf.gamma))
    }
}

fn apply_k(out: &mut [C64], v: &[C64], k: &Generator, top: usize) {
    let len = v.len();
    for n in 0..=top.min(len - 1) {
        let nn = n as f64;
        let mut acc = C64::new(0.0, k.rot * nn) * v[n];
        if n >= 1 {
            acc += k.lin * nn.sqrt() * v[n - 1];
        }
        if n + 1 < len {
            acc -= k.lin.conj() * (nn + 1.0).sqrt() * v[n + 1];
        }
        if n + 2 < len {
            acc += 0.5 * k.quad.conj() * ((nn + 1.0) * (nn + 2.0)).sqrt() * v[n + 2];
        }
        if n >= 2 {
            acc -= 0.5 * k.quad * (nn * (nn - 1.0)).sqrt() * v[n - 2];
        }
        out[n] = acc;
    }
}

fn taylor_step(v: &mut [C64], k: &Generator) {
    let len = v.len();
    let mut top = v.iter().rposition(|a| a.norm_sqr() > 1e-60).unwrap_or(0);
    let mut term = v.to_vec();
    let mut next = vec![C64::new(0.0, 0.0); len];
    for j in 1..80 {
        top = (top + 2).min(len - 1);
        apply_k(&mut next, &term, k, top);
        let inv = 1.0 / j as f64;
        let mut size = 0.0;
        for n in 0..=top {
            term[n] = next[n] * inv;
            v[n] += term[n];
            size += term[n].norm_sqr();
        }
        if size < 1e-34 {
            break;
        }
    }
}

/// Rotating-frame generator of one segment for a branch with total
/// participation `coupling = Σᵢ sᵢ bᵢ`.
fn segment_generator(seg: &Segment, coupling: f64) -> Generator {
    let tau = seg.duration;
    match seg.kind {
        SegmentKind::Sdf => Generator {
            rot: seg.detuning * tau,
            lin: C64::from_polar(coupling * seg.strength * tau, seg.drive_phase),
            quad: C64::new(0.0, 0.0),
        },
        SegmentKind::Pa => Generator {
            rot: seg.detuning * tau,
            lin: C64::new(0.0, 0.0),
            quad: C64::from_polar(seg.strength * tau, seg.effective_phase()),
        },
        SegmentKind::Idle => Generator::default(),
    }
}

fn check_single_mode(schedule: &Schedule, modes: &ModeTable) -> Result<()> {
    if modes.mode_count() != 1 {
        return Err(Error::invalid("Fock reference handles exactly one mode"));
    }
    if schedule.n_ions != modes.n_ions || schedule.target_mode != 0 {
        return Err(Error::invalid("schedule does not match the single-mode table"));
    }
    schedule.validate()
}

/// Evolves the motional vacuum through `schedule` for spin pattern `spins`
/// (RWA, interaction picture of the mode). Returns the final state.
pub fn simulate_branch(schedule: &Schedule, spins: &[i8], modes: &ModeTable) -> Result<FockState> {
    check_single_mode(schedule, modes)?;
    if spins.len() != modes.n_ions {
        return Err(Error::invalid("spin pattern length does not match ion count"));
    }
    let coupling: f64 = spins
        .iter()
        .zip(&modes.b)
        .map(|(&s, row)| s as f64 * row[0])
        .sum();
    let mut psi = FockState::vacuum(INITIAL_CUTOFF);
    let mut t = 0.0;
    for seg in &schedule.segments {
        let k = segment_generator(seg, coupling);
        // U = R(−d·t_end) exp(K) R(d·t0)
        let d = if seg.kind == SegmentKind::Idle { 0.0 } else { seg.detuning };
        psi = psi.apply_rotation(d * t);
        if k != Generator::default() {
            psi = psi.apply_generator(&k)?;
        }
        t += seg.duration;
        psi = psi.apply_rotation(-d * t);
    }
    Ok(psi)
}

/// Branch phase `arg⟨D(⟨a⟩) ψ₀ | ψ⟩`, with `ψ₀` the spin-free evolution.
pub fn branch_phase(psi: &FockState, spin_free: &FockState) -> Result<f64> {
    let reference = spin_free.apply_displace(psi.mean_a())?;
    Ok(reference.overlap(psi).arg())
}

/// Simulates one branch and extracts its geometric phase.
pub fn simulate_branch_phase(schedule: &Schedule, spins: &[i8], modes: &ModeTable) -> Result<(FockState, f64)> {
    let psi = simulate_branch(schedule, spins, modes)?;
    let zero = vec![0i8; spins.len()];
    let free = simulate_branch(schedule, &zero, modes)?;
    let phase = branch_phase(&psi, &free)?;
    Ok((psi, phase))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub phase: f64,
    pub fidelity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            phase: 1e-6,
            fidelity: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub branches: usize,
    pub max_phase_deviation: f64,
    pub max_fidelity_deficit: f64,
    /// Deviation of the spin-free frame's scalar phase.
    pub frame_phase_deviation: f64,
    pub max_cutoff: usize,
    pub max_leaked_norm: f64,
    pub pass: bool,
}

impl DeviationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn merge(&mut self, other: &DeviationReport) {
        self.branches += other.branches;
        self.max_phase_deviation = self.max_phase_deviation.max(other.max_phase_deviation);
        self.max_fidelity_deficit = self.max_fidelity_deficit.max(other.max_fidelity_deficit);
        self.frame_phase_deviation = self.frame_phase_deviation.max(other.frame_phase_deviation);
        self.max_cutoff = self.max_cutoff.max(other.max_cutoff);
        self.max_leaked_norm = self.max_leaked_norm.max(other.max_leaked_norm);
        self.pass &= other.pass;
    }

    pub fn empty() -> Self {
        DeviationReport {
            branches: 0,
            max_phase_deviation: 0.0,
            max_fidelity_deficit: 0.0,
            frame_phase_deviation: 0.0,
            max_cutoff: 0,
            max_leaked_norm: 0.0,
            pass: true,
        }
    }
}

/// Compares the engine (RWA) against the Fock reference on every spin
/// branch with `s₀ = +1`.
pub fn cross_check(schedule: &Schedule, modes: &ModeTable, tol: &Tolerances) -> Result<DeviationReport> {
    let state = evolve_vacuum(schedule, modes, &EvolveOptions::rwa())?;
    cross_check_state(schedule, modes, &state, tol)
}

/// Same as [`cross_check`] against a caller-supplied engine state.
pub fn cross_check_state(
    schedule: &Schedule,
    modes: &ModeTable,
    state: &crate::engine::SpinMotionState,
    tol: &Tolerances,
) -> Result<DeviationReport> {
    check_single_mode(schedule, modes)?;
    let n = modes.n_ions;
    let free = simulate_branch(schedule, &vec![0i8; n], modes)?;
    let frame = state.frames[0];
    let frame_state = FockState::vacuum(free.cutoff).apply_normal_form(&frame)?;
    let frame_dev = angle_diff(frame_state.overlap(&free).arg(), 0.0).abs();
    let mut report = DeviationReport {
        frame_phase_deviation: frame_dev,
        max_cutoff: free.cutoff,
        max_leaked_norm: free.leaked_norm,
        ..DeviationReport::empty()
    };
    let mut spins = vec![1i8; n];
    for pattern in 0u64..(1u64 << (n - 1)) {
        for (i, s) in spins.iter_mut().enumerate().skip(1) {
            *s = if pattern >> (i - 1) & 1 == 1 { -1 } else { 1 };
        }
        let psi = simulate_branch(schedule, &spins, modes)?;
        let phase_oracle = branch_phase(&psi, &free)?;
        let phase_engine = state.branch_phase(&spins);
        let predicted = FockState::vacuum(psi.cutoff).apply_normal_form(&state.branch_unitary(&spins, 0))?;
        let fidelity = predicted.overlap(&psi).norm_sqr();
        report.branches += 1;
        report.max_phase_deviation = report
            .max_phase_deviation
            .max(angle_diff(phase_engine, phase_oracle).abs());
        report.max_fidelity_deficit = report.max_fidelity_deficit.max((1.0 - fidelity).abs());
        report.max_cutoff = report.max_cutoff.max(psi.cutoff);
        report.max_leaked_norm = report.max_leaked_norm.max(psi.leaked_norm);
    }
    report.pass = report.max_phase_deviation < tol.phase
        && report.max_fidelity_deficit < tol.fidelity
        && report.frame_phase_deviation < tol.phase;
    Ok(report)
}

/// Bounds for random single-mode test schedules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomScheduleSpec {
    pub max_ions: usize,
    pub min_segments: usize,
    pub max_segments: usize,
    /// Bound on `Σ f τ` over SDF segments (unit participation).
    pub max_alpha: f64,
    /// Bound on `Σ g τ` over PA segments.
    pub max_r: f64,
}

impl Default for RandomScheduleSpec {
    fn default() -> Self {
        RandomScheduleSpec {
            max_ions: 3,
            min_segments: 2,
            max_segments: 6,
            max_alpha: 2.0,
            max_r: 1.5,
        }
    }
}

/// Random single-mode schedule and matching participation table.
/// Rates are in units of the inverse segment time; detunings range over
/// both sides of the parametric threshold.
pub fn random_schedule(rng: &mut ChaCha8Rng, spec: &RandomScheduleSpec) -> (Schedule, ModeTable) {
    let n = rng.gen_range(1..=spec.max_ions);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    let b: Vec<Vec<f64>> = raw.iter().map(|x| vec![x / norm]).collect();
    let modes = ModeTable {
        n_ions: n,
        omega: vec![1.0],
        b,
        z0: None,
    };
    let count = rng.gen_range(spec.min_segments..=spec.max_segments);
    let kinds: Vec<SegmentKind> = (0..count)
        .map(|k| match (k, rng.gen_range(0..5)) {
            (0, _) => SegmentKind::Sdf,
            (_, 0) => SegmentKind::Idle,
            (_, 1 | 2) => SegmentKind::Pa,
            _ => SegmentKind::Sdf,
        })
        .collect();
    let n_sdf = kinds.iter().filter(|k| **k == SegmentKind::Sdf).count().max(1) as f64;
    let n_pa = kinds.iter().filter(|k| **k == SegmentKind::Pa).count().max(1) as f64;
    let segments = kinds
        .iter()
        .map(|kind| {
            let tau = rng.gen_range(0.2..1.0);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let detuning = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(-2.0..2.0) };
            match kind {
                SegmentKind::Sdf => {
                    let alpha = rng.gen_range(0.0..spec.max_alpha / n_sdf);
                    Segment::sdf(alpha / tau, phase, tau).with_detuning(detuning)
                }
                SegmentKind::Pa => {
                    let r = rng.gen_range(0.0..spec.max_r / n_pa);
                    let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
                    Segment::pa(r / tau, phase, sign, tau).with_detuning(detuning)
                }
                SegmentKind::Idle => Segment::idle(tau),
            }
        })
        .collect();
    (Schedule::new(n, 0, "random", segments), modes)
}

/// Cross-checks `count` random schedules drawn from `seed`.
pub fn random_suite(seed: u64, count: usize, spec: &RandomScheduleSpec, tol: &Tolerances) -> Result<DeviationReport> {
    let reports: Vec<Result<DeviationReport>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let (schedule, modes) = suite_member(seed, k, spec);
            cross_check(&schedule, &modes, tol)
        })
        .collect();
    let mut total = DeviationReport::empty();
    for r in reports {
        total.merge(&r?);
    }
    Ok(total)
}

/// Schedule `k` of the suite drawn from `seed`.
pub fn suite_member(seed: u64, k: usize, spec: &RandomScheduleSpec) -> (Schedule, ModeTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    random_schedule(&mut rng, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::vacuum_overlap;
    use crate::modes::build_com_table;
    use crate::schedule::{build_sdf_square, build_square};
    use approx::assert_relative_eq;

    #[test]
    fn coherent_state_photon_number() {
        let s = FockState::vacuum(INITIAL_CUTOFF).apply_displace(C64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(s.mean_photon(), 1.0, epsilon = 1e-8);
        let s = FockState::vacuum(INITIAL_CUTOFF).apply_displace(C64::new(3.0, -4.0)).unwrap();
        assert_relative_eq!(s.mean_photon(), 25.0, epsilon = 1e-8);
        assert!(s.cutoff > INITIAL_CUTOFF);
        assert!((s.norm_sqr() + s.leaked_norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn squeezed_vacuum_photon_number() {
        let s = FockState::vacuum(INITIAL_CUTOFF).apply_squeeze(C64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(s.mean_photon(), 1f64.sinh().powi(2), epsilon = 1e-8);
        assert_relative_eq!(1f64.sinh().powi(2), 1.3811, epsilon = 1e-4);
    }

    #[test]
    fn zero_displacement_is_identity() {
        let v = FockState::vacuum(INITIAL_CUTOFF);
        assert_eq!(v.apply_displace(C64::new(0.0, 0.0)).unwrap(), v);
    }

    #[test]
    fn unitarity_per_step() {
        let v = FockState::vacuum(256).apply_displace(C64::new(0.5, 0.2)).unwrap();
        let k = Generator {
            rot: 0.7,
            lin: C64::new(0.3, -0.1),
            quad: C64::new(0.2, 0.4),
        };
        let out = v.apply_generator(&k).unwrap();
        assert!((out.norm_sqr() + out.leaked_norm - v.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_vacuum_overlap() {
        for &(a, xi) in &[
            (C64::new(2.0, 0.0), C64::new(1.5, 0.0)),
            (C64::new(-1.0, 1.2), C64::new(0.3, -0.9)),
            (C64::new(0.0, 0.5), C64::new(-1.0, 1.0)),
        ] {
            let nf = NormalForm {
                gamma: 0.3,
                alpha: a,
                xi,
                phi: 0.8,
            };
            let s = FockState::vacuum(INITIAL_CUTOFF).apply_normal_form(&nf).unwrap();
            let p0 = s.amplitudes[0];
            assert!((p0.norm_sqr() - vacuum_overlap(&nf)).abs() < 1e-8);
            assert!((p0 - nf.vacuum_amplitude()).norm() < 1e-8);
        }
    }

    #[test]
    fn empty_schedule_gives_vacuum() {
        let modes = build_com_table(2, 1.0).unwrap();
        let s = Schedule::new(2, 0, "", vec![]);
        let (psi, phase) = simulate_branch_phase(&s, &[1, -1], &modes).unwrap();
        assert_eq!(psi, FockState::vacuum(INITIAL_CUTOFF));
        assert_eq!(phase, 0.0);
        let rep = cross_check(&s, &modes, &Tolerances::default()).unwrap();
        assert_eq!(rep.max_phase_deviation, 0.0);
        assert_eq!(rep.max_fidelity_deficit, 0.0);
    }

    #[test]
    fn sdf_square_branch_phase() {
        for n in 1..=3usize {
            let modes = build_com_table(n, 1.0).unwrap();
            let (f, t1) = (0.9, 0.5);
            let s = build_sdf_square(f, 4.0 * t1).with_ions(n);
            let (_, phase) = simulate_branch_phase(&s, &vec![1; n], &modes).unwrap();
            // all spins aligned: Σ sᵢ bᵢ = √N
            let expected = 2.0 * (f * t1).powi(2) * n as f64;
            assert!(angle_diff(phase, expected).abs() < 1e-8, "n={n}");
        }
    }

    #[test]
    fn amplified_square_branch_phase() {
        let modes = build_com_table(3, 1.0).unwrap();
        let (f, g, t1, t2) = (0.4, 1.0, 0.8, 0.6);
        let s = build_square(f, g, t1, t2, 0.0).with_ions(3);
        let b = 1.0 / 3f64.sqrt();
        for spins in [[1i8, 1, 1], [1, -1, 1], [1, 1, -1]] {
            let (_, phase) = simulate_branch_phase(&s, &spins, &modes).unwrap();
            let sum: f64 = spins.iter().map(|&x| x as f64 * b).sum();
            let expected = 2.0 * (sum * f * t1).powi(2) * (2.0 * g * t2).exp();
            assert!(angle_diff(phase, expected).abs() < 1e-8, "{spins:?}");
        }
    }

    #[test]
    fn pa_timing_error_fidelity() {
        let (alpha, r) = (1.0, 0.5f64);
        for &eps in &[1e-2, 3e-3, 1e-3] {
            let beta = C64::new(alpha * r.exp() * r * eps, 0.0);
            let s = FockState::vacuum(INITIAL_CUTOFF)
                .apply_squeeze(C64::new(r * eps, 0.0))
                .unwrap()
                .apply_displace(beta)
                .unwrap();
            let overlap = s.amplitudes[0].norm_sqr();
            let formula = 1.0 - beta.norm_sqr() * (1.0 - r * eps);
            assert!((overlap - formula).abs() < 2.0 * (r * eps).powi(2), "eps={eps}");
        }
    }

    #[test]
    fn small_random_suite() {
        let rep = random_suite(11, 12, &RandomScheduleSpec::default(), &Tolerances::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn frame_phase_is_checked() {
        let modes = build_com_table(1, 1.0).unwrap();
        let s = Schedule::new(1, 0, "", vec![Segment::pa(1.0, 0.3, 1, 0.7).with_detuning(1.6)]);
        let mut state = evolve_vacuum(&s, &modes, &EvolveOptions::rwa()).unwrap();
        let ok = cross_check_state(&s, &modes, &state, &Tolerances::default()).unwrap();
        assert!(ok.frame_phase_deviation < 1e-9);
        state.frames[0].gamma += 1e-3;
        let bad = cross_check_state(&s, &modes, &state, &Tolerances::default()).unwrap();
        assert!(!bad.pass);
    }
}

//! Protocol optimization: the SDF/PA time split of regular polygons, gate
//! time at fixed phase, and a constrained local search over general
//! squeeze/displace words.
//!
//! All objectives are evaluated through the engine (or the equivalent exact
//! displacement algebra), never through the closed-form enhancement laws.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{evolve_vacuum, phase_coefficient, reference_phase, EvolveOptions};
use crate::error::{Error, Result};
use crate::gaussian::Bogoliubov;
use crate::modes::{build_com_table, ModeTable};
use crate::schedule::{build_polygon, Schedule, Segment, SegmentKind};
use crate::Complex64 as C64;

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const SPLIT_TOL: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-9;
pub const DEFAULT_RESTARTS: usize = 64;

/// One optimized regular-polygon protocol. `phi` is the single-ion phase
/// coefficient; for `N` ions on the COM mode divide by `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub f: f64,
    pub g: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub t1: f64,
    pub t2: f64,
    #[serde(rename = "Phi")]
    pub phi: f64,
    #[serde(rename = "G")]
    pub enhancement: f64,
}

impl ProtocolParams {
    pub fn schedule(&self) -> Result<Schedule> {
        build_polygon(self.n, self.f, self.g, self.t1, self.t2, 0.0)
    }

    pub fn csv_header() -> &'static str {
        "n,f,g,T,t1,t2,Phi,G"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.n, self.f, self.g, self.t, self.t1, self.t2, self.phi, self.enhancement
        )
    }
}

fn single_ion() -> ModeTable {
    build_com_table(1, 1.0).expect("single-ion table")
}

/// Phase coefficient of the regular `n`-gon with leg time `t1` in total time `t`.
pub fn polygon_phase(n: usize, f: f64, g: f64, t: f64, t1: f64) -> Result<f64> {
    let t2 = ((t - n as f64 * t1) / (2.0 * n as f64)).max(0.0);
    let s = build_polygon(n, f, g, t1, t2, 0.0)?;
    let modes = single_ion();
    let st = evolve_vacuum(&s, &modes, &EvolveOptions::rwa())?;
    Ok(phase_coefficient(&st, &modes.mode_vector(0)))
}

fn check_split_args(f: f64, g: f64, t: f64, n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::invalid("polygon needs at least 3 legs"));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("total time must be positive, got {t}")));
    }
    if !(f.is_finite() && f >= 0.0 && g.is_finite() && g >= 0.0) {
        return Err(Error::invalid("f and g must be non-negative"));
    }
    Ok(())
}

/// Maximizes the polygon phase over `t1 ∈ (0, T/n]` with `t2 = (T − n t1)/(2n)`.
pub fn optimal_split(f: f64, g: f64, t: f64, n: usize) -> Result<ProtocolParams> {
    check_split_args(f, g, t, n)?;
    let hi = t / n as f64;
    let objective = |t1: f64| polygon_phase(n, f, g, t, t1);
    let best_t1 = if g == 0.0 || f == 0.0 {
        hi
    } else {
        let tol = SPLIT_TOL * t;
        let (mut a, mut b) = (0.0, hi);
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let mut fc = objective(c)?;
        let mut fd = objective(d)?;
        while b - a > tol {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - GOLDEN * (b - a);
                fc = objective(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + GOLDEN * (b - a);
                fd = objective(d)?;
            }
        }
        let mid = 0.5 * (a + b);
        if objective(hi)? >= objective(mid)? {
            hi
        } else {
            mid
        }
    };
    let phi = objective(best_t1)?;
    let t2 = ((t - n as f64 * best_t1) / (2.0 * n as f64)).max(0.0);
    let reference = reference_phase(f, t, 1);
    Ok(ProtocolParams {
        n,
        f,
        g,
        t,
        t1: best_t1,
        t2,
        phi,
        enhancement: if reference > 0.0 { phi / reference } else { 1.0 },
    })
}

/// Optimal split for each polygon order in `ns`.
pub fn polygon_compare(ns: &[usize], f: f64, g: f64, t: f64) -> Result<Vec<ProtocolParams>> {
    ns.iter().map(|&n| optimal_split(f, g, t, n)).collect()
}

/// Geometry factor `n cot(π/n)` of the regular polygon law.
pub fn polygon_geometry(n: usize) -> f64 {
    n as f64 / (PI / n as f64).tan()
}

/// Shortest square-protocol time whose optimal phase coefficient on `n_ions`
/// ions reaches `phi_target`, by bisection below the no-PA square time.
pub fn gate_time_for_phase(f: f64, g: f64, phi_target: f64, n_ions: usize) -> Result<f64> {
    if !(f > 0.0 && g >= 0.0 && phi_target > 0.0 && n_ions > 0) {
        return Err(Error::invalid("gate time needs f > 0, g ≥ 0, target > 0"));
    }
    let n = n_ions as f64;
    let t0 = 4.0 * (phi_target * n / 2.0).sqrt() / f;
    let reached = |t: f64| -> Result<f64> { Ok(optimal_split(f, g, t, 4)?.phi / n) };
    let at_t0 = reached(t0)?;
    if at_t0 < phi_target * (1.0 - 1e-9) {
        return Err(Error::numerical(format!(
            "target phase {phi_target} not bracketed: T in (0, {t0}] reaches at most {at_t0}"
        )));
    }
    if g == 0.0 {
        return Ok(t0);
    }
    let (mut lo, mut hi) = (0.0, t0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * t0 {
            break;
        }
        if reached(mid)? >= phi_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// A general word `S(ξ_{2n−1}) D(α_{n−1}) S(ξ_{2n−2}) ⋯ S(ξ_1) D(α_0) S(ξ_0)`:
/// side `k` is wrapped by squeezes `ξ_{2k}` (before) and `ξ_{2k+1}` (after).
/// `sides` are the amplified displacements `α_k d_k` seen in the initial
/// frame, and `gains` are `|d_k|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralProtocol {
    pub alphas: Vec<C64>,
    pub squeezes: Vec<C64>,
    pub sides: Vec<C64>,
    pub gains: Vec<f64>,
    /// SDF time budget `T₁`.
    pub t1_budget: f64,
    /// PA time budget `T₂`.
    pub t2_budget: f64,
    #[serde(rename = "Phi")]
    pub phi: f64,
    pub closure: f64,
    pub net_squeeze: f64,
}

impl GeneralProtocol {
    /// Resonant single-ion schedule realizing the word at rates `f` and `g`.
    pub fn schedule(&self, f: f64, g: f64) -> Result<Schedule> {
        let mut segments = Vec::with_capacity(3 * self.alphas.len());
        let pa = |xi: C64| {
            let tau = if g > 0.0 { xi.norm() / g } else { 0.0 };
            Segment::pa(g, if xi.norm() > 0.0 { xi.arg() } else { 0.0 }, 1, tau)
        };
        for (k, &a) in self.alphas.iter().enumerate() {
            segments.push(pa(self.squeezes[2 * k]));
            let tau = if f > 0.0 { a.norm() / f } else { 0.0 };
            segments.push(Segment::sdf(f, if a.norm() > 0.0 { a.arg() } else { 0.0 }, tau));
            segments.push(pa(self.squeezes[2 * k + 1]));
        }
        segments.retain(|s| s.duration > 0.0 || s.kind == SegmentKind::Idle);
        let s = Schedule::new(1, 0, "general protocol", segments);
        s.validate()?;
        Ok(s)
    }
}

/// Exact evaluation of a word in the interaction frame.
struct WordEval {
    phi: f64,
    sides: Vec<C64>,
    /// Real 2×2 maps from `α_k` to side `k`.
    jacobians: Vec<[[f64; 2]; 2]>,
    frame: Bogoliubov,
}

fn real_map(b: &Bogoliubov) -> [[f64; 2]; 2] {
    [
        [b.mu.re + b.nu.re, -b.mu.im + b.nu.im],
        [b.mu.im + b.nu.im, b.mu.re - b.nu.re],
    ]
}

fn eval_word(alphas: &[C64], squeezes: &[C64]) -> WordEval {
    let mut a = C64::new(0.0, 0.0);
    let mut frame = Bogoliubov::IDENTITY;
    let mut phi = 0.0;
    let mut sides = Vec::with_capacity(alphas.len());
    let mut jacobians = Vec::with_capacity(alphas.len());
    let squeeze = |a: &mut C64, frame: &mut Bogoliubov, xi: C64| {
        let p = Bogoliubov::of_squeeze(xi);
        *a = p.push(*a);
        *frame = frame.then(p);
    };
    for (k, &alpha) in alphas.iter().enumerate() {
        squeeze(&mut a, &mut frame, squeezes[2 * k]);
        let back = frame.inverse();
        sides.push(back.push(alpha));
        jacobians.push(real_map(&back));
        phi += (alpha * a.conj()).im;
        a += alpha;
        squeeze(&mut a, &mut frame, squeezes[2 * k + 1]);
    }
    WordEval {
        phi,
        sides,
        jacobians,
        frame,
    }
}

/// Sets the last squeeze so the word's net transform is a pure rotation.
fn close_squeeze(alphas: &[C64], squeezes: &mut [C64]) {
    let last = squeezes.len() - 1;
    squeezes[last] = C64::new(0.0, 0.0);
    let frame = eval_word(alphas, squeezes).frame;
    squeezes[last] = -frame.factor().0;
}

fn gains(alphas: &[C64], sides: &[C64]) -> Vec<f64> {
    alphas
        .iter()
        .zip(sides)
        .map(|(a, s)| if a.norm() > 0.0 { s.norm() / a.norm() } else { 1.0 })
        .collect()
}

struct Budgets {
    path: f64,
    squeeze_time: f64,
}

impl Budgets {
    fn squeeze_ok(&self, alphas: &[C64], squeezes: &[C64]) -> bool {
        let used: f64 = squeezes.iter().map(|x| x.norm()).sum();
        if used > self.squeeze_time * (1.0 + FEASIBILITY_TOL) + FEASIBILITY_TOL {
            return false;
        }
        let ev = eval_word(alphas, squeezes);
        let log_gain: f64 = gains(alphas, &ev.sides).iter().map(|d| d.ln()).sum();
        log_gain <= self.squeeze_time + FEASIBILITY_TOL
    }
}

/// Shrinks squeezes into budget, closes the loop and scales the path.
fn project(alphas: &mut [C64], squeezes: &mut [C64], budgets: &Budgets) -> bool {
    for _ in 0..4 {
        close_squeeze(alphas, squeezes);
        if !budgets.squeeze_ok(alphas, squeezes) {
            let free: Vec<C64> = squeezes[..squeezes.len() - 1].to_vec();
            let apply = |c: f64, sq: &mut [C64]| {
                for (dst, src) in sq.iter_mut().zip(&free) {
                    *dst = *src * c;
                }
                close_squeeze(alphas, sq);
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                apply(mid, squeezes);
                if budgets.squeeze_ok(alphas, squeezes) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            apply(lo, squeezes);
        }
        let ev = eval_word(alphas, squeezes);
        let total: C64 = ev.sides.iter().sum();
        let mut jjt = [[0.0; 2]; 2];
        for j in &ev.jacobians {
            for r in 0..2 {
                for c in 0..2 {
                    jjt[r][c] += j[r][0] * j[c][0] + j[r][1] * j[c][1];
                }
            }
        }
        let det = jjt[0][0] * jjt[1][1] - jjt[0][1] * jjt[1][0];
        if det.abs() < 1e-300 {
            return false;
        }
        let y = [
            (jjt[1][1] * total.re - jjt[0][1] * total.im) / det,
            (-jjt[1][0] * total.re + jjt[0][0] * total.im) / det,
        ];
        for (a, j) in alphas.iter_mut().zip(&ev.jacobians) {
            a.re -= j[0][0] * y[0] + j[1][0] * y[1];
            a.im -= j[0][1] * y[0] + j[1][1] * y[1];
        }
        let path: f64 = alphas.iter().map(|a| a.norm()).sum();
        if path > budgets.path {
            let c = budgets.path / path;
            alphas.iter_mut().for_each(|a| *a *= c);
        }
        close_squeeze(alphas, squeezes);
        if feasible(alphas, squeezes, budgets) {
            return true;
        }
    }
    false
}

fn feasible(alphas: &[C64], squeezes: &[C64], budgets: &Budgets) -> bool {
    let ev = eval_word(alphas, squeezes);
    let path: f64 = alphas.iter().map(|a| a.norm()).sum();
    let scale = budgets.path.max(1e-300);
    let net = ev.frame.factor().0.norm();
    let closure: f64 = ev.sides.iter().sum::<C64>().norm();
    path <= budgets.path * (1.0 + FEASIBILITY_TOL)
        && closure <= FEASIBILITY_TOL * scale
        && net <= FEASIBILITY_TOL
        && budgets.squeeze_ok(alphas, squeezes)
        && ev.phi.is_finite()
}

fn finish(alphas: Vec<C64>, squeezes: Vec<C64>, t1_budget: f64, t2_budget: f64) -> GeneralProtocol {
    let ev = eval_word(&alphas, &squeezes);
    GeneralProtocol {
        gains: gains(&alphas, &ev.sides),
        closure: ev.sides.iter().sum::<C64>().norm(),
        net_squeeze: ev.frame.factor().0.norm(),
        phi: ev.phi,
        sides: ev.sides,
        alphas,
        squeezes,
        t1_budget,
        t2_budget,
    }
}

/// Regular `n`-gon word with the squeeze budget spread evenly over the
/// `2n` PA pulses (zero squeezing when `gT₂ = 0`).
fn polygon_seed(n: usize, f: f64, g: f64, t1_budget: f64, t2_budget: f64) -> (Vec<C64>, Vec<C64>) {
    let s = build_polygon(n, f, g, t1_budget / n as f64, t2_budget / (2 * n) as f64, 0.0)
        .expect("seed polygon");
    let mut alphas = Vec::with_capacity(n);
    let mut squeezes = Vec::with_capacity(2 * n);
    for seg in &s.segments {
        let z = |phase: f64| C64::from_polar(seg.strength * seg.duration, phase);
        match seg.kind {
            SegmentKind::Sdf => alphas.push(z(seg.drive_phase)),
            SegmentKind::Pa => squeezes.push(z(seg.effective_phase())),
            SegmentKind::Idle => {}
        }
    }
    (alphas, squeezes)
}

fn random_start(rng: &mut ChaCha8Rng, n: usize, budgets: &Budgets) -> (Vec<C64>, Vec<C64>) {
    let alphas = (0..n)
        .map(|_| C64::from_polar(rng.gen_range(0.2..1.0) * budgets.path / n as f64, rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let per = budgets.squeeze_time / (2 * n) as f64;
    let squeezes = (0..2 * n)
        .map(|_| C64::from_polar(rng.gen_range(0.0..1.0) * per, rng.gen_range(0.0..2.0 * PI)))
        .collect();
    (alphas, squeezes)
}

fn local_search(
    mut alphas: Vec<C64>,
    mut squeezes: Vec<C64>,
    budgets: &Budgets,
    iterations: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<C64>, Vec<C64>, f64)> {
    if !project(&mut alphas, &mut squeezes, budgets) {
        return None;
    }
    let mut best = eval_word(&alphas, &squeezes).phi.abs();
    let n = alphas.len();
    let a_scale0 = budgets.path / n as f64 * 0.2;
    let s_scale0 = (budgets.squeeze_time / (2 * n) as f64).max(0.0) * 0.5;
    let decay = if iterations > 1 { (1e-4f64).powf(1.0 / iterations as f64) } else { 1.0 };
    let mut scale = 1.0;
    for _ in 0..iterations {
        let mut ca = alphas.clone();
        let mut cs = squeezes.clone();
        for a in ca.iter_mut() {
            *a += C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * a_scale0 * scale;
        }
        if s_scale0 > 0.0 {
            let last = cs.len() - 1;
            for x in cs[..last].iter_mut() {
                *x += C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * s_scale0 * scale;
            }
        } else {
            cs.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        }
        if project(&mut ca, &mut cs, budgets) {
            let v = eval_word(&ca, &cs).phi.abs();
            if v > best {
                best = v;
                alphas = ca;
                squeezes = cs;
            }
        }
        scale *= decay;
    }
    Some((alphas, squeezes, best))
}

/// Constrained local search over `n`-sided words with SDF budget `T₁` and PA
/// budget `T₂`: path `Σ|α_k| ≤ f T₁`, squeeze time `Σ|ξ_j| ≤ g T₂`, gain
/// `Π|d_k| ≤ e^{g T₂}`, closure `Σ α_k d_k = 0` and zero net squeeze.
/// Restart 0 is the SDF-only regular polygon, restart 1 the evenly amplified
/// regular polygon; the rest are random. Deterministic for a given seed.
pub fn general_search(
    n: usize,
    f: f64,
    g: f64,
    t1_budget: f64,
    t2_budget: f64,
    iterations: usize,
    restarts: usize,
    seed: u64,
) -> Result<GeneralProtocol> {
    if n < 3 {
        return Err(Error::invalid("general protocol needs at least 3 sides"));
    }
    if !(f > 0.0 && g >= 0.0 && t1_budget > 0.0 && t2_budget >= 0.0) {
        return Err(Error::invalid("budgets and rates must be positive"));
    }
    let budgets = Budgets {
        path: f * t1_budget,
        squeeze_time: g * t2_budget,
    };
    let restarts = restarts.max(2);
    let results: Vec<Option<(Vec<C64>, Vec<C64>, f64)>> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let (a, s) = match k {
                0 => polygon_seed(n, f, 0.0, t1_budget, 0.0),
                1 => polygon_seed(n, f, g, t1_budget, t2_budget),
                _ => random_start(&mut rng, n, &budgets),
            };
            local_search(a, s, &budgets, iterations, &mut rng)
        })
        .collect();
    let mut best: Option<(Vec<C64>, Vec<C64>, f64)> = None;
    for r in results.into_iter().flatten() {
        if best.as_ref().map_or(true, |b| r.2 > b.2) {
            best = Some(r);
        }
    }
    let (a, s, _) = best.ok_or_else(|| Error::numerical("no feasible protocol found"))?;
    Ok(finish(a, s, t1_budget, t2_budget))
}

/// Area of the regular `n`-gon with perimeter `p`.
pub fn regular_polygon_area(n: usize, p: f64) -> f64 {
    p * p / (4.0 * n as f64 * (PI / n as f64).tan())
}

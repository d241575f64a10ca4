//! Pulse programs: ordered SDF / PA / IDLE segments and protocol builders.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::gaussian::angle_diff;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    #[serde(rename = "SDF")]
    Sdf,
    #[serde(rename = "PA")]
    Pa,
    #[serde(rename = "IDLE")]
    Idle,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Sdf => "SDF",
            SegmentKind::Pa => "PA",
            SegmentKind::Idle => "IDLE",
        }
    }
}

/// One constant-parameter pulse.
///
/// For SDF, `strength` is `f` and `detuning` is `δ = μ − ω_target`. For PA,
/// `strength` is `g`, `drive_phase` is `θ`, `detuning` is `Δ = ω_p/2 − ω_target`
/// and `sign = −1` applies the drive at `θ + π`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
    pub strength: f64,
    pub drive_phase: f64,
    pub detuning: f64,
    pub sign: i8,
}

impl Segment {
    pub fn sdf(f: f64, phase: f64, duration: f64) -> Self {
        Segment {
            kind: SegmentKind::Sdf,
            duration,
            strength: f,
            drive_phase: phase,
            detuning: 0.0,
            sign: 1,
        }
    }

    pub fn pa(g: f64, theta: f64, sign: i8, duration: f64) -> Self {
        Segment {
            kind: SegmentKind::Pa,
            duration,
            strength: g,
            drive_phase: theta,
            detuning: 0.0,
            sign,
        }
    }

    pub fn idle(duration: f64) -> Self {
        Segment {
            kind: SegmentKind::Idle,
            duration,
            strength: 0.0,
            drive_phase: 0.0,
            detuning: 0.0,
            sign: 1,
        }
    }

    pub fn with_detuning(self, detuning: f64) -> Self {
        Segment { detuning, ..self }
    }

    /// PA drive phase including the sign flip.
    pub fn effective_phase(&self) -> f64 {
        if self.sign < 0 {
            self.drive_phase + PI
        } else {
            self.drive_phase
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::invalid("segment duration must be finite and non-negative"));
        }
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Error::invalid("segment strength must be finite and non-negative"));
        }
        if !self.drive_phase.is_finite() || !self.detuning.is_finite() {
            return Err(Error::invalid("segment phase and detuning must be finite"));
        }
        if self.sign != 1 && self.sign != -1 {
            return Err(Error::invalid("segment sign must be +1 or -1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(rename = "N")]
    pub n_ions: usize,
    pub target_mode: usize,
    pub label: String,
    pub segments: Vec<Segment>,
}

impl Schedule {
    pub fn new(n_ions: usize, target_mode: usize, label: impl Into<String>, segments: Vec<Segment>) -> Self {
        Schedule {
            n_ions,
            target_mode,
            label: label.into(),
            segments,
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn duration_of(&self, kind: SegmentKind) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| s.duration)
            .sum()
    }

    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }

    /// Largest SDF strength with nonzero duration, if any SDF time exists.
    pub fn sdf_strength(&self) -> Option<f64> {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Sdf && s.duration > 0.0)
            .map(|s| s.strength)
            .reduce(f64::max)
    }

    pub fn with_ions(mut self, n_ions: usize) -> Self {
        self.n_ions = n_ions;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::invalid("schedule must address at least one ion"));
        }
        for (k, seg) in self.segments.iter().enumerate() {
            seg.validate()
                .map_err(|e| Error::invalid(format!("segment {k}: {e}")))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        parse(text)
    }

    /// Word with every segment reversed in time and each unitary inverted.
    ///
    /// Exact for resonant segments; detuned segments are inverted only up to
    /// their frame rotation, so reversibility checks use resonant words.
    pub fn inverse_word(&self) -> Schedule {
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| match s.kind {
                SegmentKind::Sdf => Segment {
                    drive_phase: s.drive_phase + PI,
                    ..*s
                },
                SegmentKind::Pa => Segment { sign: -s.sign, ..*s },
                SegmentKind::Idle => *s,
            })
            .collect();
        Schedule {
            label: format!("{} (inverse)", self.label),
            segments,
            ..self.clone()
        }
    }
}

fn parse_err(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        context: context.into(),
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, name: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| parse_err(format!("{path}.{name}"), "missing field"))
}

fn number(obj: &Map<String, Value>, path: &str, name: &str) -> Result<f64> {
    field(obj, path, name)?
        .as_f64()
        .ok_or_else(|| parse_err(format!("{path}.{name}"), "expected a number"))
}

fn index(obj: &Map<String, Value>, path: &str, name: &str) -> Result<usize> {
    field(obj, path, name)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| parse_err(format!("{path}.{name}"), "expected a non-negative integer"))
}

fn parse_segment(value: &Value, path: &str) -> Result<Segment> {
    let obj = value
        .as_object()
        .ok_or_else(|| parse_err(path, "expected an object"))?;
    let kind = match field(obj, path, "kind")?.as_str() {
        Some("SDF") => SegmentKind::Sdf,
        Some("PA") => SegmentKind::Pa,
        Some("IDLE") => SegmentKind::Idle,
        Some(other) => {
            return Err(parse_err(
                format!("{path}.kind"),
                format!("unknown kind \"{other}\" (expected SDF, PA or IDLE)"),
            ))
        }
        None => return Err(parse_err(format!("{path}.kind"), "expected a string")),
    };
    let duration = number(obj, path, "duration")?;
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(parse_err(format!("{path}.duration"), "must be non-negative"));
    }
    let strength = number(obj, path, "strength")?;
    if !(strength.is_finite() && strength >= 0.0) {
        return Err(parse_err(format!("{path}.strength"), "must be non-negative"));
    }
    let drive_phase = number(obj, path, "drive_phase")?;
    let detuning = number(obj, path, "detuning")?;
    let sign = match obj.get("sign") {
        None if kind != SegmentKind::Pa => 1,
        None => return Err(parse_err(format!("{path}.sign"), "missing field")),
        Some(v) => match v.as_i64() {
            Some(1) => 1,
            Some(-1) => -1,
            _ => return Err(parse_err(format!("{path}.sign"), "must be +1 or -1")),
        },
    };
    if let Some(extra) = obj.keys().find(|k| {
        !matches!(
            k.as_str(),
            "kind" | "duration" | "strength" | "drive_phase" | "detuning" | "sign"
        )
    }) {
        return Err(parse_err(format!("{path}.{extra}"), "unknown field"));
    }
    Ok(Segment {
        kind,
        duration,
        strength,
        drive_phase,
        detuning,
        sign,
    })
}

/// Parses and validates a schedule document.
pub fn parse(text: &str) -> Result<Schedule> {
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        parse_err(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let obj = doc
        .as_object()
        .ok_or_else(|| parse_err("schedule", "expected an object"))?;
    let n_ions = index(obj, "schedule", "N")?;
    if n_ions == 0 {
        return Err(parse_err("schedule.N", "must be at least 1"));
    }
    let target_mode = index(obj, "schedule", "target_mode")?;
    let label = match obj.get("label") {
        None => String::new(),
        Some(v) => v
            .as_str()
            .ok_or_else(|| parse_err("schedule.label", "expected a string"))?
            .to_string(),
    };
    let list = field(obj, "schedule", "segments")?
        .as_array()
        .ok_or_else(|| parse_err("schedule.segments", "expected an array"))?;
    let segments = list
        .iter()
        .enumerate()
        .map(|(k, v)| parse_segment(v, &format!("segments[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Schedule {
        n_ions,
        target_mode,
        label,
        segments,
    })
}

pub fn serialize(schedule: &Schedule) -> String {
    schedule.to_json()
}

/// Drive phase of leg `k` of an `n`-gon: the displacement direction of the
/// leg, offset by `θ/2` so it lies along the amplified quadrature.
fn leg_phase(k: usize, n: usize, theta: f64) -> f64 {
    0.5 * theta + TAU * k as f64 / n as f64
}

/// Pre-squeeze drive of leg `k`: the squeeze axis must sit at twice the leg
/// direction. Returns `(phase, sign)` preferring `(θ, −1)` over `θ + π`.
fn leg_squeeze(k: usize, n: usize, theta: f64) -> (f64, i8) {
    let offset = 2.0 * TAU * k as f64 / n as f64;
    if angle_diff(offset, 0.0).abs() < 1e-12 {
        (theta, 1)
    } else if angle_diff(offset, PI).abs() < 1e-12 {
        (theta, -1)
    } else {
        (theta + offset, 1)
    }
}

/// Regular `n`-gon, each leg wrapped in a squeeze / anti-squeeze pair.
pub fn build_polygon(n: usize, f: f64, g: f64, t1: f64, t2: f64, theta: f64) -> Result<Schedule> {
    if n < 3 {
        return Err(Error::invalid("polygon needs at least 3 legs"));
    }
    if f < 0.0 || g < 0.0 || t1 < 0.0 || t2 < 0.0 {
        return Err(Error::invalid("polygon parameters must be non-negative"));
    }
    let mut segments = Vec::with_capacity(3 * n);
    for k in 0..n {
        let (phase, sign) = leg_squeeze(k, n, theta);
        segments.push(Segment::pa(g, phase, sign, t2));
        segments.push(Segment::sdf(f, leg_phase(k, n, theta), t1));
        segments.push(Segment::pa(g, phase, -sign, t2));
    }
    Ok(Schedule::new(1, 0, format!("polygon n={n}"), segments))
}

/// Amplified square: four legs of `t1` wrapped in PA pulses of `t2`.
pub fn build_square(f: f64, g: f64, t1: f64, t2: f64, theta: f64) -> Schedule {
    let mut s = build_polygon(4, f.max(0.0), g.max(0.0), t1.max(0.0), t2.max(0.0), theta)
        .expect("square parameters are valid");
    s.label = "square".to_string();
    s
}

/// SDF-only square of total duration `t`.
pub fn build_sdf_square(f: f64, t: f64) -> Schedule {
    let mut s = build_square(f, 0.0, t / 4.0, 0.0, 0.0);
    s.label = "sdf square".to_string();
    s
}

/// One element of a general protocol word.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WordOp {
    /// Resonant SDF producing unit-participation displacement `α`.
    Displace(C64),
    /// Resonant PA producing squeeze `ξ`.
    Squeeze(C64),
    Idle,
}

/// Builds a resonant schedule from `(op, duration)` pairs in time order.
pub fn from_word(ops: &[(WordOp, f64)]) -> Result<Schedule> {
    let mut segments = Vec::with_capacity(ops.len());
    for (k, &(op, duration)) in ops.iter().enumerate() {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::invalid(format!("word element {k}: bad duration")));
        }
        let param = match op {
            WordOp::Displace(z) | WordOp::Squeeze(z) => z,
            WordOp::Idle => C64::new(0.0, 0.0),
        };
        if duration == 0.0 && param.norm() > 0.0 {
            return Err(Error::invalid(format!(
                "word element {k}: nonzero parameter needs nonzero duration"
            )));
        }
        let rate = if duration > 0.0 { param.norm() / duration } else { 0.0 };
        let phase = if param.norm() > 0.0 { param.arg() } else { 0.0 };
        segments.push(match op {
            WordOp::Displace(_) => Segment::sdf(rate, phase, duration),
            WordOp::Squeeze(_) => Segment::pa(rate, phase, 1, duration),
            WordOp::Idle => Segment::idle(duration),
        });
    }
    Ok(Schedule::new(1, 0, "general word", segments))
}

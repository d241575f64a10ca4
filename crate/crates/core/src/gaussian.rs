//! Single-mode Gaussian unitaries in the normal-ordered form
//! `e^{iγ} D(α) S(ξ) R(φ)`.
//!
//! Conventions:
//! - `D(α) = exp(α a† − α* a)`
//! - `S(ξ) = exp(½ ξ* a² − ½ ξ a†²)`, `ξ = r e^{iθ}`
//! - `R(φ) = exp(iφ a†a)`
//!
//! Every composition is re-normal-ordered immediately. The scalar phase `γ`
//! is exact: it is fixed by the vacuum amplitude of the composed operator,
//! so there is no metaplectic sign ambiguity.

use std::f64::consts::{PI, TAU};
use std::ops::Mul;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Smallest signed difference `a − b` modulo 2π, in `(−π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Linear canonical transform `U† a U = μ a + ν a†`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bogoliubov {
    pub mu: C64,
    pub nu: C64,
}

impl Bogoliubov {
    pub const IDENTITY: Bogoliubov = Bogoliubov {
        mu: C64::new(1.0, 0.0),
        nu: C64::new(0.0, 0.0),
    };

    pub fn of_squeeze(xi: C64) -> Self {
        let r = xi.norm();
        if r == 0.0 {
            return Self::IDENTITY;
        }
        let e = xi / r;
        Bogoliubov {
            mu: C64::new(r.cosh(), 0.0),
            nu: -e * r.sinh(),
        }
    }

    pub fn of_rotation(phi: f64) -> Self {
        Bogoliubov {
            mu: C64::from_polar(1.0, phi),
            nu: C64::new(0.0, 0.0),
        }
    }

    /// Transform of `later · self` (self acts first on states).
    pub fn then(self, later: Bogoliubov) -> Bogoliubov {
        Bogoliubov {
            mu: later.mu * self.mu + later.nu * self.nu.conj(),
            nu: later.mu * self.nu + later.nu * self.mu.conj(),
        }
    }

    pub fn inverse(self) -> Bogoliubov {
        Bogoliubov {
            mu: self.mu.conj(),
            nu: -self.nu,
        }
    }

    /// `|μ|² − |ν|² − 1`; zero for a valid transform.
    pub fn symplectic_defect(&self) -> f64 {
        self.mu.norm_sqr() - self.nu.norm_sqr() - 1.0
    }

    /// Displacement seen after conjugation: `U D(β) U† = D(μβ + νβ*)`.
    pub fn push(&self, beta: C64) -> C64 {
        self.mu * beta + self.nu * beta.conj()
    }

    /// Factor into `S(ξ) R(φ)`; returns `(ξ, φ)` with `φ ∈ (−π, π]`.
    pub fn factor(&self) -> (C64, f64) {
        let r = self.nu.norm().asinh();
        let phi = self.mu.arg();
        if r == 0.0 {
            return (C64::new(0.0, 0.0), phi);
        }
        let theta = (-self.nu).arg() + phi;
        (C64::from_polar(r, wrap_angle(theta)), phi)
    }
}

/// `e^{iγ} D(α) S(ξ) R(φ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalForm {
    pub gamma: f64,
    pub alpha: C64,
    pub xi: C64,
    pub phi: f64,
}

impl Default for NormalForm {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl NormalForm {
    pub const IDENTITY: NormalForm = NormalForm {
        gamma: 0.0,
        alpha: C64::new(0.0, 0.0),
        xi: C64::new(0.0, 0.0),
        phi: 0.0,
    };

    pub fn phase(gamma: f64) -> Self {
        NormalForm { gamma, ..Self::IDENTITY }
    }

    pub fn displacement(alpha: C64) -> Self {
        NormalForm { alpha, ..Self::IDENTITY }
    }

    pub fn squeeze(xi: C64) -> Self {
        NormalForm { xi, ..Self::IDENTITY }
    }

    pub fn rotation(phi: f64) -> Self {
        NormalForm {
            phi: wrap_angle(phi),
            ..Self::IDENTITY
        }
    }

    pub fn r(&self) -> f64 {
        self.xi.norm()
    }

    /// Squeeze axis angle `θ ∈ [0, 2π)`; 0 when unsqueezed.
    pub fn theta(&self) -> f64 {
        if self.xi.norm() == 0.0 {
            0.0
        } else {
            wrap_angle(self.xi.arg())
        }
    }

    /// Transform of the `S(ξ) R(φ)` part (displacement and phase drop out).
    pub fn bogoliubov(&self) -> Bogoliubov {
        Bogoliubov::of_rotation(self.phi).then(Bogoliubov::of_squeeze(self.xi))
    }

    /// `self ∘ inner`: `inner` acts first.
    pub fn compose(&self, inner: &NormalForm) -> NormalForm {
        nf_compose(self, inner)
    }

    pub fn inverse(&self) -> NormalForm {
        let parts = [
            NormalForm::rotation(-self.phi),
            NormalForm::squeeze(-self.xi),
            NormalForm::displacement(-self.alpha),
            NormalForm::phase(-self.gamma),
        ];
        parts
            .iter()
            .fold(NormalForm::IDENTITY, |acc, p| nf_compose(&acc, p))
    }

    /// `⟨0| U |0⟩`.
    pub fn vacuum_amplitude(&self) -> C64 {
        let r = self.r();
        let zeta = squeeze_zeta(self.xi);
        let a = self.alpha;
        let exponent = -0.5 * a.norm_sqr() - 0.5 * zeta * a.conj() * a.conj();
        C64::from_polar(1.0, self.gamma) * exponent.exp() / r.cosh().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.gamma.is_finite()
            && self.alpha.re.is_finite()
            && self.alpha.im.is_finite()
            && self.xi.re.is_finite()
            && self.xi.im.is_finite()
            && self.phi.is_finite()
    }
}

impl Mul for NormalForm {
    type Output = NormalForm;

    fn mul(self, inner: NormalForm) -> NormalForm {
        nf_compose(&self, &inner)
    }
}

/// `ζ = e^{iθ} tanh r`, the coefficient in `S(ξ)|0⟩ ∝ exp(−½ ζ a†²)|0⟩`.
fn squeeze_zeta(xi: C64) -> C64 {
    let r = xi.norm();
    if r < 1e-8 {
        xi * (1.0 - r * r / 3.0)
    } else {
        xi * (r.tanh() / r)
    }
}

/// `S(ξ₁) S(ξ₂) = e^{iγ} S(ξ₃) R(φ₃)`; returns `(ξ₃, φ₃, γ)`.
fn squeeze_product(xi1: C64, xi2: C64) -> (C64, f64, f64) {
    let b = Bogoliubov::of_squeeze(xi2).then(Bogoliubov::of_squeeze(xi1));
    let (xi3, phi3) = b.factor();
    // Vacuum amplitude of S(ξ₁)S(ξ₂) is (cosh r₁ cosh r₂)^{-1/2} (1 + ζ₁* ζ₂)^{-1/2};
    // its modulus equals (cosh r₃)^{-1/2}, so only the argument is new.
    let w = squeeze_zeta(xi1).conj() * squeeze_zeta(xi2);
    let gamma = -0.5 * (C64::new(1.0, 0.0) + w).arg();
    (xi3, phi3, gamma)
}

/// Normal form of `outer ∘ inner` (inner applied first).
pub fn nf_compose(outer: &NormalForm, inner: &NormalForm) -> NormalForm {
    // S₁R₁ D(α₂) = D(α₂') S₁R₁
    let moved = outer.bogoliubov().push(inner.alpha);
    let alpha = outer.alpha + moved;
    let mut gamma = outer.gamma + inner.gamma + (outer.alpha * moved.conj()).im;
    // R₁ S(ξ₂) = S(ξ₂ e^{2iφ₁}) R₁
    let xi2 = inner.xi * C64::from_polar(1.0, 2.0 * outer.phi);
    let (xi, phi3, dg) = if outer.xi.norm() == 0.0 {
        (xi2, 0.0, 0.0)
    } else if xi2.norm() == 0.0 {
        (outer.xi, 0.0, 0.0)
    } else {
        squeeze_product(outer.xi, xi2)
    };
    gamma += dg;
    NormalForm {
        gamma,
        alpha,
        xi: canonical_xi(xi),
        phi: wrap_angle(phi3 + outer.phi + inner.phi),
    }
}

fn canonical_xi(xi: C64) -> C64 {
    let r = xi.norm();
    if r == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        C64::from_polar(r, wrap_angle(xi.arg()))
    }
}

/// `α'` with `S†(ξ) D(α) S(ξ) = D(α')`.
pub fn sandwich_displacement(alpha: C64, xi: C64) -> C64 {
    let r = xi.norm();
    if r == 0.0 {
        return alpha;
    }
    let e = xi / r;
    alpha * r.cosh() + alpha.conj() * e * r.sinh()
}

/// `|⟨0| e^{iγ} D(α) S(ξ) R(φ) |0⟩|²`.
pub fn vacuum_overlap(nf: &NormalForm) -> f64 {
    let r = nf.r();
    let zeta = squeeze_zeta(nf.xi);
    let a = nf.alpha;
    let e = -a.norm_sqr() - (zeta * a.conj() * a.conj()).re;
    e.exp() / r.cosh()
}

/// `cosh(κτ)` and `sinh(κτ)/κ` for `κ² = k2`, valid for either sign of `k2`.
fn hyperbolic_pair(k2: f64, tau: f64) -> (f64, f64) {
    if k2 > 0.0 {
        let k = k2.sqrt();
        let x = k * tau;
        let s = if x < 1e-8 { tau * (1.0 + x * x / 6.0) } else { x.sinh() / k };
        (x.cosh(), s)
    } else if k2 < 0.0 {
        let w = (-k2).sqrt();
        let x = w * tau;
        let s = if x < 1e-8 { tau * (1.0 - x * x / 6.0) } else { x.sin() / w };
        (x.cos(), s)
    } else {
        (1.0, tau)
    }
}

/// Normal form of `exp(−i(H₀ − Δ a†a)τ)` with
/// `H₀ = −(i/2)(g a†² − g* a²)`, i.e. the parametric drive in the frame
/// rotating at half the pump frequency.
///
/// For `Δ < |g|` this reproduces
/// `sinh r = sinh(gτ√(1−Δ²/g²))/√(1−Δ²/g²)` and
/// `tan φ = Δ/√(g²−Δ²) · tanh(gτ√(1−Δ²/g²))`; for `Δ > |g|` the same
/// expressions continue into the trigonometric regime.
pub fn from_generator(g: C64, delta: f64, tau: f64) -> NormalForm {
    let k2 = g.norm_sqr() - delta * delta;
    let (c, s) = hyperbolic_pair(k2, tau);
    let b = Bogoliubov {
        mu: C64::new(c, delta * s),
        nu: -g * s,
    };
    let (xi, _) = b.factor();
    // Unwrapped arg μ(τ), continuous from τ = 0.
    let principal = b.mu.arg();
    let w = (-k2).max(0.0).sqrt();
    let psi = if k2 < 0.0 && w * tau > 1.0 {
        // the elliptic angle stays within π/2 of ±wτ
        let guide = delta.signum() * w * tau;
        principal + TAU * ((guide - principal) / TAU).round()
    } else {
        principal
    };
    NormalForm {
        gamma: -0.5 * delta * tau + 0.5 * psi,
        alpha: C64::new(0.0, 0.0),
        xi,
        phi: wrap_angle(psi),
    }
}

/// Bogoliubov transform of a normal form.
pub fn to_bogoliubov(nf: &NormalForm) -> Bogoliubov {
    nf.bogoliubov()
}

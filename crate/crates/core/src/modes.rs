//! Normal-mode data for a linear ion chain.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-10;

/// Mode frequencies and participation matrix `b[i][m]` (ion `i`, mode `m`).
///
/// Modes are sorted by ascending frequency so that the axial
/// center-of-mass mode of a linear chain is mode 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    #[serde(rename = "N")]
    pub n_ions: usize,
    pub omega: Vec<f64>,
    /// Row-major, `n_ions` rows of `mode_count` entries.
    pub b: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<Vec<f64>>,
}

impl ModeTable {
    pub fn new(omega: Vec<f64>, b: Vec<Vec<f64>>, z0: Option<Vec<f64>>) -> Result<Self> {
        let table = ModeTable {
            n_ions: b.len(),
            omega,
            b,
            z0,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn mode_count(&self) -> usize {
        self.omega.len()
    }

    pub fn participation(&self, ion: usize, mode: usize) -> f64 {
        self.b[ion][mode]
    }

    /// Column `mode` of the participation matrix.
    pub fn mode_vector(&self, mode: usize) -> Vec<f64> {
        self.b.iter().map(|row| row[mode]).collect()
    }

    /// Restriction to a single mode (used by the Fock reference).
    pub fn single_mode(&self, mode: usize) -> ModeTable {
        ModeTable {
            n_ions: self.n_ions,
            omega: vec![self.omega[mode]],
            b: self.b.iter().map(|row| vec![row[mode]]).collect(),
            z0: self.z0.as_ref().map(|z| vec![z[mode]]),
        }
    }

    /// Largest deviation of `bᵀb` from the identity.
    pub fn column_residual(&self) -> f64 {
        let m = self.mode_count();
        let mut worst = 0.0f64;
        for k in 0..m {
            for l in 0..m {
                let dot: f64 = self.b.iter().map(|row| row[k] * row[l]).sum();
                let target = if k == l { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Largest deviation of `b bᵀ` from the identity (meaningful when square).
    pub fn row_residual(&self) -> f64 {
        let n = self.n_ions;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = self.b[i].iter().zip(&self.b[j]).map(|(x, y)| x * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::invalid("mode table has no ions"));
        }
        let m = self.mode_count();
        if m == 0 {
            return Err(Error::invalid("mode table has no modes"));
        }
        if self.b.iter().any(|row| row.len() != m) {
            return Err(Error::invalid(format!(
                "participation rows must have {m} entries"
            )));
        }
        if let Some(z0) = &self.z0 {
            if z0.len() != m {
                return Err(Error::invalid("z0 length does not match mode count"));
            }
        }
        if self.omega.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("mode frequencies must be positive and finite"));
        }
        if self.omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("mode frequencies must be strictly ascending"));
        }
        let col = self.column_residual();
        if col > ORTHO_TOL {
            return Err(Error::invalid(format!(
                "participation columns not orthonormal (residual {col:.3e})"
            )));
        }
        if m == self.n_ions {
            let row = self.row_residual();
            if row > ORTHO_TOL {
                return Err(Error::invalid(format!(
                    "participation rows not complete (residual {row:.3e})"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mode table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: ModeTable = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("modes line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        table.validate()?;
        Ok(table)
    }
}

/// Single center-of-mass mode with uniform participation `1/√N`.
pub fn build_com_table(n_ions: usize, omega1: f64) -> Result<ModeTable> {
    if n_ions == 0 {
        return Err(Error::invalid("ion count must be at least 1"));
    }
    if !(omega1.is_finite() && omega1 > 0.0) {
        return Err(Error::invalid("mode frequency must be positive"));
    }
    let b = 1.0 / (n_ions as f64).sqrt();
    Ok(ModeTable {
        n_ions,
        omega: vec![omega1],
        b: vec![vec![b]; n_ions],
        z0: None,
    })
}

const MAX_NEWTON_ITERATIONS: usize = 10_000;
const GRADIENT_TOL: f64 = 1e-12;

fn potential(u: &[f64]) -> f64 {
    let mut v = 0.5 * u.iter().map(|x| x * x).sum::<f64>();
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            v += 1.0 / (u[i] - u[j]).abs();
        }
    }
    v
}

fn gradient(u: &[f64]) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(n, |i, _| {
        let mut g = u[i];
        for j in 0..n {
            if j != i {
                let d = u[i] - u[j];
                g -= d.signum() / (d * d);
            }
        }
        g
    })
}

/// Hessian of the dimensionless chain potential `Σ u²/2 + Σ 1/|uᵢ−uⱼ|`.
pub fn chain_hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 1.0;
        for j in 0..n {
            if j != i {
                let c = 2.0 / (u[i] - u[j]).abs().powi(3);
                diag += c;
                h[(i, j)] = -c;
            }
        }
        h[(i, i)] = diag;
    }
    h
}

/// Dimensionless equilibrium positions of `n` ions in a harmonic axial well.
pub fn chain_equilibrium(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("ion count must be at least 1"));
    }
    // spacing estimate 2.018 N^{-0.559} in these units
    let spacing = 2.018 * (n as f64).powf(-0.559);
    let mut u: Vec<f64> = (0..n)
        .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing)
        .collect();
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let g = gradient(&u);
        if g.norm() < GRADIENT_TOL {
            return Ok(u);
        }
        let h = chain_hessian(&u);
        let step = h
            .cholesky()
            .map(|c| c.solve(&g))
            .unwrap_or_else(|| g.clone());
        let v0 = potential(&u);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - lambda * s).collect();
            let ordered = trial.windows(2).all(|w| w[0] < w[1]);
            if ordered && potential(&trial) <= v0 + 1e-14 * v0.abs() {
                u = trial;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::numerical("chain equilibrium line search stalled"));
            }
        }
    }
    Err(Error::numerical(format!(
        "chain equilibrium did not converge in {MAX_NEWTON_ITERATIONS} iterations"
    )))
}

/// Axial normal modes of a linear Coulomb chain with trap frequency `omega_z`.
pub fn solve_linear_chain(n_ions: usize, omega_z: f64) -> Result<ModeTable> {
    if !(1..=16).contains(&n_ions) {
        return Err(Error::invalid("linear chain solver supports 1..=16 ions"));
    }
    if !(omega_z.is_finite() && omega_z > 0.0) {
        return Err(Error::invalid("trap frequency must be positive"));
    }
    let u = chain_equilibrium(n_ions)?;
    let eig = SymmetricEigen::new(chain_hessian(&u));
    let mut order: Vec<usize> = (0..n_ions).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut omega = Vec::with_capacity(n_ions);
    let mut b = vec![vec![0.0; n_ions]; n_ions];
    for (m, &k) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= 0.0 {
            return Err(Error::numerical("non-positive Hessian eigenvalue"));
        }
        omega.push(omega_z * lambda.sqrt());
        let col = eig.eigenvectors.column(k);
        // sign convention: first significant component positive
        let lead = col.iter().find(|x| x.abs() > 1e-12).copied().unwrap_or(1.0);
        let sign = lead.signum();
        let norm = col.norm();
        for i in 0..n_ions {
            b[i][m] = sign * col[i] / norm;
        }
    }
    ModeTable::new(omega, b, None)
}

/// PA drive settings; `g` holds one rate per mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaConfig {
    pub g: Vec<f64>,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PaPhysical>,
}

/// Electrode drive parameters, SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaPhysical {
    pub voltage: f64,
    pub trap_scale: f64,
    pub mass: f64,
    pub charge: f64,
}

impl PaPhysical {
    /// `g_m = e|V| / (M ω_m d_T²)`.
    pub fn rate(&self, omega_m: f64) -> f64 {
        self.charge * self.voltage.abs() / (self.mass * omega_m * self.trap_scale * self.trap_scale)
    }
}

impl PaConfig {
    pub fn from_physical(modes: &ModeTable, physical: PaPhysical, theta: f64) -> Self {
        PaConfig {
            g: modes.omega.iter().map(|&w| physical.rate(w)).collect(),
            theta,
            physical: Some(physical),
        }
    }

    pub fn validate(&self, modes: &ModeTable) -> Result<()> {
        if self.g.len() != modes.mode_count() {
            return Err(Error::invalid("PA rate count does not match mode count"));
        }
        if self.g.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::invalid("PA rates must be non-negative"));
        }
        if let Some(p) = &self.physical {
            for (g, &w) in self.g.iter().zip(&modes.omega) {
                let expected = p.rate(w);
                if (g - expected).abs() > 1e-12 * expected.abs() {
                    return Err(Error::invalid(format!(
                        "PA rate {g} inconsistent with physical drive ({expected})"
                    )));
                }
            }
        }
        Ok(())
    }
}

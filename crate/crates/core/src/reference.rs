//! Reference kernels: closed-form free and harmonic propagators, closed-form
//! Gaussian composition, and an exhaustive lattice path sum.
//!
//! Nothing here calls into the amplitude or game modules; the brute-force sum
//! enumerates, evaluates and accumulates on its own.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::action::HamiltonianModel;
use crate::lattice::{SpaceGrid, TimeGrid};
use crate::summation::{ComplexSum, NeumaierSum};

/// Distance from a multiple of π below which `ωT` counts as a caustic.
pub const CAUSTIC_TOL: f64 = 1e-9;

const CHUNK: u64 = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("caustic: omega*T = {omega_t} is a multiple of pi")]
    Caustic { omega_t: f64 },
    #[error("{predicted} paths exceed the cap of {cap}")]
    CapExceeded { predicted: u128, cap: u64 },
    #[error("endpoint {0} is not a grid point")]
    EndpointNotOnGrid(f64),
    #[error("composition integral does not converge (zero quadratic coefficient)")]
    Degenerate,
}

pub type Result<T> = std::result::Result<T, ReferenceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    AnalyticFree,
    AnalyticHarmonic,
    GaussianComposition,
    BruteForceSum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub k: Complex64,
    /// Unnormalized phase sum, brute force only.
    pub raw_sum: Option<Complex64>,
    pub method: OracleMethod,
    pub parameters: serde_json::Value,
}

/// `P exp(i (A x² + B x y + C y²) / ħ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticKernel {
    pub prefactor: Complex64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub hbar: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ReferenceError::InvalidInput(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl QuadraticKernel {
    pub fn free(mass: f64, hbar: f64, duration: f64) -> Result<Self> {
        positive("mass", mass)?;
        positive("hbar", hbar)?;
        positive("duration", duration)?;
        let w = mass / duration;
        Ok(Self {
            prefactor: Complex64::from_polar(
                (mass / (2.0 * PI * hbar * duration)).sqrt(),
                -PI / 4.0,
            ),
            a: 0.5 * w,
            b: -w,
            c: 0.5 * w,
            hbar,
        })
    }

    /// Mehler kernel; past each caustic the prefactor picks up `e^{-iπ/2}`.
    pub fn harmonic(mass: f64, omega: f64, hbar: f64, duration: f64) -> Result<Self> {
        positive("mass", mass)?;
        positive("omega", omega)?;
        positive("hbar", hbar)?;
        positive("duration", duration)?;
        let wt = omega * duration;
        let k = (wt / PI).round();
        if k >= 1.0 && (wt - k * PI).abs() < CAUSTIC_TOL {
            return Err(ReferenceError::Caustic { omega_t: wt });
        }
        let (sin, cos) = wt.sin_cos();
        let crossings = (wt / PI).floor();
        let f = mass * omega / sin;
        Ok(Self {
            prefactor: Complex64::from_polar(
                (mass * omega / (2.0 * PI * hbar * sin.abs())).sqrt(),
                -PI / 4.0 - crossings * PI / 2.0,
            ),
            a: 0.5 * f * cos,
            b: -f,
            c: 0.5 * f * cos,
            hbar,
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        let phase = (self.a * x * x + self.b * x * y + self.c * y * y) / self.hbar;
        self.prefactor * Complex64::from_polar(1.0, phase)
    }

    /// `∫ dz self(x, z) next(z, y)` in closed form.
    pub fn compose(&self, next: &QuadraticKernel) -> Result<Self> {
        if self.hbar != next.hbar {
            return Err(ReferenceError::InvalidInput(
                "kernels use different hbar".into(),
            ));
        }
        let d = self.c + next.a;
        if d == 0.0 || !d.is_finite() {
            return Err(ReferenceError::Degenerate);
        }
        let gauss = (Complex64::new(PI * self.hbar, 0.0) / Complex64::new(0.0, -d)).sqrt();
        Ok(Self {
            prefactor: self.prefactor * next.prefactor * gauss,
            a: self.a - self.b * self.b / (4.0 * d),
            b: -self.b * next.b / (2.0 * d),
            c: next.c - next.b * next.b / (4.0 * d),
            hbar: self.hbar,
        })
    }
}

pub fn analytic_free_propagator(
    mass: f64,
    hbar: f64,
    q_i: f64,
    q_f: f64,
    duration: f64,
) -> Result<OracleResult> {
    let kernel = QuadraticKernel::free(mass, hbar, duration)?;
    Ok(OracleResult {
        k: kernel.eval(q_i, q_f),
        raw_sum: None,
        method: OracleMethod::AnalyticFree,
        parameters: serde_json::json!({
            "mass": mass, "hbar": hbar, "q_i": q_i, "q_f": q_f, "duration": duration,
        }),
    })
}

pub fn analytic_harmonic_propagator(
    mass: f64,
    omega: f64,
    hbar: f64,
    q_i: f64,
    q_f: f64,
    duration: f64,
) -> Result<OracleResult> {
    let kernel = QuadraticKernel::harmonic(mass, omega, hbar, duration)?;
    Ok(OracleResult {
        k: kernel.eval(q_i, q_f),
        raw_sum: None,
        method: OracleMethod::AnalyticHarmonic,
        parameters: serde_json::json!({
            "mass": mass, "omega": omega, "hbar": hbar,
            "q_i": q_i, "q_f": q_f, "duration": duration,
        }),
    })
}

/// Continuum composition of two free kernels of durations `t1` and `t2`.
pub fn free_composition_continuum(
    mass: f64,
    hbar: f64,
    q_i: f64,
    q_f: f64,
    t1: f64,
    t2: f64,
) -> Result<OracleResult> {
    let k =
        QuadraticKernel::free(mass, hbar, t1)?.compose(&QuadraticKernel::free(mass, hbar, t2)?)?;
    Ok(OracleResult {
        k: k.eval(q_i, q_f),
        raw_sum: None,
        method: OracleMethod::GaussianComposition,
        parameters: serde_json::json!({
            "mass": mass, "hbar": hbar, "q_i": q_i, "q_f": q_f, "t1": t1, "t2": t2,
        }),
    })
}

/// Grid of spacing `σ/8` reaching `8σ` past both endpoints, `σ = √(ħT/m)`.
pub fn oracle_grid(mass: f64, hbar: f64, duration: f64, q_i: f64, q_f: f64) -> Result<SpaceGrid> {
    positive("mass", mass)?;
    positive("hbar", hbar)?;
    positive("duration", duration)?;
    let sigma = (hbar * duration / mass).sqrt();
    SpaceGrid::covering(q_i.min(q_f), q_i.max(q_f), 8.0 * sigma, sigma / 8.0)
        .map_err(|e| ReferenceError::InvalidInput(e.to_string()))
}

fn locate(points: &[f64], q: f64) -> Result<usize> {
    let dq = if points.len() > 1 {
        points[1] - points[0]
    } else {
        1.0
    };
    points
        .iter()
        .position(|&x| (x - q).abs() <= 1e-12 * dq.abs().max(1e-300))
        .ok_or(ReferenceError::EndpointNotOnGrid(q))
}

fn path_phase_action(nodes: &[f64], hamiltonian: &HamiltonianModel, dt: f64) -> f64 {
    let m = hamiltonian.mass();
    let mut s = NeumaierSum::new();
    for w in nodes.windows(2) {
        let dq = w[1] - w[0];
        let p = m * (dq / dt);
        let v = hamiltonian.potential(0.5 * (w[0] + w[1]));
        s.add(p * dq - (p * p / (2.0 * m) + v) * dt);
    }
    s.total()
}

/// Exhaustive `Σ exp(i S/ħ)` over every lattice path, times the per-slice
/// measure `√(m/(2πiħ dt))` for each of the `n_steps` slices and `dq` for
/// each interior node.
pub fn brute_force_path_sum(
    grid: &TimeGrid,
    space: &SpaceGrid,
    hamiltonian: &HamiltonianModel,
    q_i: f64,
    q_f: f64,
    hbar: f64,
    cap: u64,
) -> Result<OracleResult> {
    positive("hbar", hbar)?;
    let points = space.points();
    let first = locate(points, q_i)?;
    let last = locate(points, q_f)?;
    let n_steps = grid.n_steps();
    let interior = n_steps - 1;
    let base = points.len() as u64;
    let predicted = (base as u128)
        .checked_pow(interior as u32)
        .unwrap_or(u128::MAX);
    if predicted > cap as u128 {
        return Err(ReferenceError::CapExceeded { predicted, cap });
    }
    let total = predicted as u64;
    let dt = grid.dt();

    let chunks: Vec<ComplexSum> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut nodes = vec![0.0; n_steps + 1];
            nodes[0] = points[first];
            nodes[n_steps] = points[last];
            let mut acc = ComplexSum::new();
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let mut rest = idx;
                for slot in nodes[1..n_steps].iter_mut().rev() {
                    *slot = points[(rest % base) as usize];
                    rest /= base;
                }
                let theta = path_phase_action(&nodes, hamiltonian, dt) / hbar;
                let (s, co) = theta.sin_cos();
                acc.add(Complex64::new(co, s));
            }
            acc
        })
        .collect();
    let raw = if chunks.len() == 1 {
        chunks[0].total()
    } else {
        let mut all = ComplexSum::new();
        for c in &chunks {
            all.merge(c);
        }
        all.total()
    };

    let m = hamiltonian.mass();
    let slice = (m / (2.0 * PI * hbar * dt)).sqrt();
    let dq = space.dq();
    let magnitude = slice * (dq * slice).powi(interior as i32);
    let phase = -(n_steps as f64) * PI / 4.0;
    Ok(OracleResult {
        k: raw * Complex64::from_polar(magnitude, phase),
        raw_sum: Some(raw),
        method: OracleMethod::BruteForceSum,
        parameters: serde_json::json!({
            "n_steps": n_steps, "space_points": points.len(), "dq": dq,
            "q_i": q_i, "q_f": q_f, "hbar": hbar, "paths": total,
        }),
    })
}

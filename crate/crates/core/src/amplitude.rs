//! Complex path amplitudes, quantum angles, the propagator sum and kernel
//! composition.
//!
//! The propagator of a path family is `K = a e^{iγ} Σ_j exp(iθ_j)` with
//! `θ_j = κ S_jj`. The magnitude `a` and the global phase `γ` come from the
//! slice-measure normalization when the result is meant to be compared with
//! continuum kernels; with `γ = 0` and a chosen `a` it is the bare sum.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{classical_pair_action, HamiltonianModel};
use crate::game::OptimalPair;
use crate::lattice::{LatticeError, PositionPathEnumerator, SpaceGrid};
use crate::summation::ComplexSum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmplitudeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("kernel grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Action(#[from] crate::action::ActionError),
}

pub type Result<T> = std::result::Result<T, AmplitudeError>;

/// `φ_j = α_j + iβ_j` in polar and Cartesian form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathAmplitude {
    pub phi: Complex64,
    pub magnitude: f64,
    pub theta: f64,
}

impl PathAmplitude {
    pub fn from_components(alpha: f64, beta: f64) -> Self {
        Self {
            phi: Complex64::new(alpha, beta),
            magnitude: alpha.hypot(beta),
            theta: beta.atan2(alpha),
        }
    }

    pub fn modulus_squared(&self) -> f64 {
        self.phi.norm_sqr()
    }
}

pub fn amplitudes_from_pair(pair: &OptimalPair) -> Vec<PathAmplitude> {
    pair.alpha0
        .components()
        .iter()
        .zip(pair.beta0.components())
        .map(|(&a, &b)| PathAmplitude::from_components(a, b))
        .collect()
}

/// Choice of `κ` in `θ_j = κ S_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PhaseConstant {
    /// `κ = 2π/ħ`, as printed.
    #[default]
    #[serde(rename = "paper-2pi")]
    Paper2Pi,
    /// `κ = 1/ħ`, the usual path-integral phase.
    #[serde(rename = "standard")]
    Standard,
}

impl PhaseConstant {
    pub fn kappa(self, hbar: f64) -> f64 {
        match self {
            Self::Paper2Pi => TAU / hbar,
            Self::Standard => 1.0 / hbar,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Paper2Pi => "paper-2pi",
            Self::Standard => "standard",
        }
    }
}

impl std::str::FromStr for PhaseConstant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper-2pi" => Ok(Self::Paper2Pi),
            "standard" => Ok(Self::Standard),
            other => Err(format!(
                "unknown phase constant {other:?} (paper-2pi | standard)"
            )),
        }
    }
}

/// Angles `θ_j` (unreduced) with complements `θ'_j = π/2 - θ_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleSet {
    thetas: Vec<f64>,
    complements: Vec<f64>,
    magnitude: f64,
    global_phase: f64,
    kappa: f64,
}

impl AngleSet {
    pub fn new(thetas: Vec<f64>, magnitude: f64) -> Result<Self> {
        if !(magnitude >= 0.0 && magnitude.is_finite()) {
            return Err(AmplitudeError::InvalidInput(format!(
                "magnitude must be finite and non-negative, got {magnitude}"
            )));
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(AmplitudeError::InvalidInput("non-finite angle".into()));
        }
        let complements = thetas.iter().map(|t| FRAC_PI_2 - t).collect();
        Ok(Self {
            thetas,
            complements,
            magnitude,
            global_phase: 0.0,
            kappa: f64::NAN,
        })
    }

    /// Constant phase factor `e^{iγ}` carried alongside the real magnitude.
    pub fn with_global_phase(mut self, gamma: f64) -> Self {
        self.global_phase = gamma;
        self
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn complements(&self) -> &[f64] {
        &self.complements
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Angles reduced to `[0, 2π)` for reporting.
    pub fn reduced_thetas(&self) -> Vec<f64> {
        self.thetas.iter().map(|t| t.rem_euclid(TAU)).collect()
    }
}

/// `θ_j = κ S_j`.
pub fn quantum_angles(diagonal_actions: &[f64], kappa: f64, magnitude: f64) -> Result<AngleSet> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(AmplitudeError::InvalidInput(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    let mut set = AngleSet::new(
        diagonal_actions.iter().map(|s| kappa * s).collect(),
        magnitude,
    )?;
    set.kappa = kappa;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub q_i: f64,
    pub t_i: f64,
    pub q_f: f64,
    pub t_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub n_steps: usize,
    pub space_points: usize,
    pub dq: f64,
    pub space_min: f64,
    pub space_max: f64,
}

/// Complex kernel value with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Propagator {
    pub k: Complex64,
    /// `Σ_j exp(iθ_j)` before the normalization factor.
    pub raw_sum: Complex64,
    pub n_paths: u64,
    pub magnitude: f64,
    pub global_phase: f64,
    pub kappa: f64,
    pub normalization: String,
    pub endpoints: Option<Endpoints>,
    pub grid: Option<GridDescriptor>,
}

/// `K = a e^{iγ} Σ_j exp(iθ_j)`, summed in index order with compensation.
pub fn propagator_sum(angles: &AngleSet) -> Result<Propagator> {
    if angles.is_empty() {
        return Err(AmplitudeError::InvalidInput(
            "at least one angle required".into(),
        ));
    }
    let mut acc = ComplexSum::new();
    for &t in angles.thetas() {
        let (s, c) = t.sin_cos();
        acc.add(Complex64::new(c, s));
    }
    let raw_sum = acc.total();
    let k = raw_sum * Complex64::from_polar(angles.magnitude(), angles.global_phase());
    Ok(Propagator {
        k,
        raw_sum,
        n_paths: angles.len() as u64,
        magnitude: angles.magnitude(),
        global_phase: angles.global_phase(),
        kappa: angles.kappa(),
        normalization: "unnormalized".into(),
        endpoints: None,
        grid: None,
    })
}

/// Per-intermediate-point weight `dq / √(2πiħ dt / m)`.
pub fn slice_measure(
    hamiltonian: &HamiltonianModel,
    dt: f64,
    dq: f64,
    hbar: f64,
) -> Result<Complex64> {
    if !(dt > 0.0 && dq > 0.0 && hbar > 0.0) {
        return Err(AmplitudeError::InvalidInput(format!(
            "slice measure needs positive dt, dq, hbar (got {dt}, {dq}, {hbar})"
        )));
    }
    Ok(endpoint_factor(hamiltonian, dt, hbar)? * dq)
}

/// `√(m / (2πiħ dt))`, the one-slice kernel prefactor; `1/√i = e^{-iπ/4}`.
pub fn endpoint_factor(hamiltonian: &HamiltonianModel, dt: f64, hbar: f64) -> Result<Complex64> {
    if !(dt > 0.0 && hbar > 0.0) {
        return Err(AmplitudeError::InvalidInput(format!(
            "endpoint factor needs positive dt, hbar (got {dt}, {hbar})"
        )));
    }
    let m = hamiltonian.mass();
    Ok(Complex64::from_polar(
        (m / (2.0 * PI * hbar * dt)).sqrt(),
        -PI / 4.0,
    ))
}

/// Kernel values `K(source_i → target_f)` on two grids, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    sources: Vec<f64>,
    targets: Vec<f64>,
    values: Vec<Complex64>,
}

impl KernelTable {
    pub fn from_fn(
        sources: &[f64],
        targets: &[f64],
        mut f: impl FnMut(f64, f64) -> Complex64,
    ) -> Self {
        let mut values = Vec::with_capacity(sources.len() * targets.len());
        for &x in sources {
            for &y in targets {
                values.push(f(x, y));
            }
        }
        Self {
            sources: sources.to_vec(),
            targets: targets.to_vec(),
            values,
        }
    }

    /// Kronecker delta divided by the measure, the unit of composition.
    pub fn identity(points: &[f64], measure: Complex64) -> Self {
        let n = points.len();
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            values[i * n + i] = Complex64::new(1.0, 0.0) / measure;
        }
        Self {
            sources: points.to_vec(),
            targets: points.to_vec(),
            values,
        }
    }

    pub fn sources(&self) -> &[f64] {
        &self.sources
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn get(&self, i: usize, f: usize) -> Complex64 {
        self.values[i * self.targets.len() + f]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Rows `(q_i, q_f, K)` in row-major order.
    pub fn rows(&self) -> Vec<PropagatorRow> {
        let mut out = Vec::with_capacity(self.values.len());
        for (i, &qi) in self.sources.iter().enumerate() {
            for (f, &qf) in self.targets.iter().enumerate() {
                out.push(PropagatorRow {
                    q_i: qi,
                    q_f: qf,
                    k: self.get(i, f),
                });
            }
        }
        out
    }
}

fn same_points(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// `K(q_i → q_f) = Σ_m K_left(q_i → q_m) μ K_right(q_m → q_f)`.
pub fn compose_propagators(
    left: &KernelTable,
    right: &KernelTable,
    intermediate: &SpaceGrid,
    measure: Complex64,
) -> Result<KernelTable> {
    if !same_points(left.targets(), intermediate.points()) {
        return Err(AmplitudeError::GridMismatch(
            "left kernel targets differ from the intermediate grid".into(),
        ));
    }
    if !same_points(right.sources(), intermediate.points()) {
        return Err(AmplitudeError::GridMismatch(
            "right kernel sources differ from the intermediate grid".into(),
        ));
    }
    let n_mid = intermediate.len();
    let n_out = right.targets().len();
    let values: Vec<Complex64> = (0..left.sources().len() * n_out)
        .into_par_iter()
        .map(|idx| {
            let (i, f) = (idx / n_out, idx % n_out);
            let mut acc = ComplexSum::new();
            for m in 0..n_mid {
                acc.add(left.get(i, m) * right.get(m, f));
            }
            acc.total() * measure
        })
        .collect();
    Ok(KernelTable {
        sources: left.sources().to_vec(),
        targets: right.targets().to_vec(),
        values,
    })
}

/// One line of a propagator table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorRow {
    pub q_i: f64,
    pub q_f: f64,
    pub k: Complex64,
}

pub const PROPAGATOR_CSV_HEADER: &str = "q_i,q_f,re_k,im_k,abs_k,arg_k";

/// CSV with columns `q_i, q_f, Re K, Im K, |K|, arg K`.
pub fn propagator_table_csv(rows: &[PropagatorRow]) -> String {
    let mut out = String::from(PROPAGATOR_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.q_i,
            r.q_f,
            r.k.re,
            r.k.im,
            r.k.norm(),
            r.k.arg()
        ));
    }
    out
}

/// JSON mirror of the CSV table plus metadata.
pub fn propagator_table_json(
    rows: &[PropagatorRow],
    method: &str,
    grid: Option<&GridDescriptor>,
) -> serde_json::Value {
    let entries: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "q_i": r.q_i,
                "q_f": r.q_f,
                "re_k": r.k.re,
                "im_k": r.k.im,
                "abs_k": r.k.norm(),
                "arg_k": r.k.arg(),
            })
        })
        .collect();
    serde_json::json!({ "method": method, "grid": grid, "rows": entries })
}

/// Full lattice pipeline: diagonal actions of every enumerated path, quantum
/// angles, and the slice-measure-normalized propagator sum.
pub fn lattice_propagator(
    source: &PositionPathEnumerator,
    hamiltonian: &HamiltonianModel,
    hbar: f64,
    phase: PhaseConstant,
    cap: u64,
) -> Result<Propagator> {
    let count = source.ensure_within(cap)?;
    let grid = *source.grid();
    let n_steps = grid.n_steps();
    let action = |q: &crate::lattice::LatticePath| {
        classical_pair_action(q, hamiltonian, &grid).map(|a| a.value)
    };
    let actions: Vec<f64> = if source.hop_limit().is_none() {
        (0..count)
            .into_par_iter()
            .map(|j| action(&source.path_at(j)))
            .collect::<std::result::Result<_, _>>()?
    } else {
        source
            .iter()
            .map(|q| action(&q))
            .collect::<std::result::Result<_, _>>()?
    };

    let endpoint = endpoint_factor(hamiltonian, grid.dt(), hbar)?;
    let interior = (n_steps - 1) as i32;
    let measure = if interior > 0 {
        slice_measure(hamiltonian, grid.dt(), source.space().dq(), hbar)?
    } else {
        Complex64::new(1.0, 0.0)
    };
    let magnitude = endpoint.norm() * measure.norm().powi(interior);
    let gamma = endpoint.arg() + interior as f64 * measure.arg();
    let angles = quantum_angles(&actions, phase.kappa(hbar), magnitude)?.with_global_phase(gamma);
    let mut k = propagator_sum(&angles)?;
    let (q_i, q_f) = source.endpoints();
    let space = source.space();
    k.normalization = "slice-measure".into();
    k.endpoints = Some(Endpoints {
        q_i,
        t_i: grid.t_start(),
        q_f,
        t_f: grid.t_end(),
    });
    k.grid = Some(GridDescriptor {
        n_steps,
        space_points: space.len(),
        dq: space.dq(),
        space_min: space.points()[0],
        space_max: space.points()[space.len() - 1],
    });
    Ok(k)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn complements_sum_to_right_angle(actions in proptest::collection::vec(-50.0f64..50.0, 1..20), kappa in 0.01f64..10.0) {
            let a = quantum_angles(&actions, kappa, 1.0).unwrap();
            for (t, c) in a.thetas().iter().zip(a.complements()) {
                prop_assert!((t + c - FRAC_PI_2).abs() <= 1e-12);
            }
        }

        #[test]
        fn triangle_inequality(actions in proptest::collection::vec(-10.0f64..10.0, 1..20), a in 0.0f64..3.0) {
            let angles = quantum_angles(&actions, 1.0, a).unwrap();
            let k = propagator_sum(&angles).unwrap();
            prop_assert!(k.k.norm() <= a * actions.len() as f64 * (1.0 + 1e-12));
        }

        #[test]
        fn modulus_invariant_under_common_shift(actions in proptest::collection::vec(-10.0f64..10.0, 1..20), shift in -5.0f64..5.0) {
            let base = propagator_sum(&quantum_angles(&actions, 1.0, 1.0).unwrap()).unwrap();
            let shifted: Vec<f64> = actions.iter().map(|s| s + shift).collect();
            let moved = propagator_sum(&quantum_angles(&shifted, 1.0, 1.0).unwrap()).unwrap();
            prop_assert!((base.k.norm() - moved.k.norm()).abs() <= 1e-12 * (1.0 + base.k.norm()));
        }
    }
}

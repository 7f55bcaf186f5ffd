//! Mixed-path distributions and the generalized action `αᵀ S β`.
//!
//! A stationary pair satisfies the first-order conditions of `αᵀ S β`
//! constrained by `(Σα)² + (Σβ)² = 1`:
//!
//! ```text
//! S β  = 2λ (Σα) 𝟙
//! Sᵀ α = 2λ (Σβ) 𝟙
//! ```
//!
//! Three layers are provided: the closed-form uniform pair
//! ([`uniform_stationary_pair`]), a damped Gauss-Newton solver on the
//! Lagrange system ([`solve_stationary_numeric`]) and an exhaustive grid
//! oracle for `n <= 3` ([`brute_force_extremum`]).

mod brute;
mod solver;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{dot, ActionMatrix};
use crate::summation::compensated_sum;

pub use brute::{brute_force_extremum, BruteForceResult, MAX_BRUTE_FORCE_POINTS};
pub use solver::{solve_stationary_numeric, SolverOptions};

/// Normalization tolerance every produced pair must meet.
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mixed-path component {index} = {value} outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("S·β is the zero vector; the parallelism angle is undefined")]
    ZeroImage,
    #[error("action matrix is identically zero")]
    DegenerateMatrix,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Box<OptimalPair>,
    },
    #[error("brute-force oracle supports n <= 3, got n = {0}")]
    DimensionTooLarge(usize),
    #[error("brute-force grid of {points} points exceeds the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },
    #[error("no interior stationary point on the grid (least residual {min_residual:e})")]
    NoInteriorCandidate { min_residual: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, GameError>;

/// Distribution over a path family with components in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MixedPathVector(Vec<f64>);

impl MixedPathVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        for (index, &value) in components.iter().enumerate() {
            if !(-1.0..=1.0).contains(&value) {
                return Err(GameError::OutOfRange { index, value });
            }
        }
        Ok(Self(components))
    }

    pub fn uniform(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        compensated_sum(self.0.iter().copied())
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }
}

impl<'de> Deserialize<'de> for MixedPathVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        MixedPathVector::new(v).map_err(serde::de::Error::custom)
    }
}

/// A component pinned at `±1` by the box constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveBound {
    pub vector: Side,
    pub index: usize,
    pub upper: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Alpha,
    Beta,
}

/// Eigenvalue sign counts of the Lagrangian Hessian on the constraint
/// tangent space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// A candidate extremal pair with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalPair {
    pub alpha0: MixedPathVector,
    pub beta0: MixedPathVector,
    /// `α₀ᵀ S β₀`.
    pub value: f64,
    /// Angle between `α₀` and `S β₀`; `None` when `S β₀ = 0`.
    #[serde(rename = "parallelism_angle_rad")]
    pub parallelism_angle: Option<f64>,
    pub lagrange_residual: f64,
    pub multiplier: f64,
    pub active_bounds: Vec<ActiveBound>,
    pub inertia: Option<Inertia>,
    pub iterations: usize,
}

impl OptimalPair {
    /// Builds a pair and fills every diagnostic from `S`.
    pub fn diagnose(
        alpha0: MixedPathVector,
        beta0: MixedPathVector,
        s: &ActionMatrix,
    ) -> Result<Self> {
        check_dims(&alpha0, s, &beta0)?;
        let value = generalized_action(&alpha0, s, &beta0)?;
        let multiplier = lagrange_multiplier(alpha0.components(), beta0.components(), s, None);
        let lagrange_residual =
            lagrange_residual(alpha0.components(), beta0.components(), s, multiplier, None);
        let parallelism_angle = parallelism_diagnostic(&alpha0, &beta0, s).ok();
        let inertia = Some(hessian_inertia(
            alpha0.components(),
            beta0.components(),
            multiplier,
            s,
            None,
        ));
        Ok(Self {
            alpha0,
            beta0,
            value,
            parallelism_angle,
            lagrange_residual,
            multiplier,
            active_bounds: Vec::new(),
            inertia,
            iterations: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.alpha0.len()
    }

    /// `(Σα)² + (Σβ)²`.
    pub fn normalization(&self) -> f64 {
        let a = self.alpha0.sum();
        let b = self.beta0.sum();
        a * a + b * b
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("optimal pair serializes")
    }

    /// Concatenated `(α, β)` components, used for lexicographic ordering.
    pub fn key(&self) -> Vec<f64> {
        let mut k = self.alpha0.components().to_vec();
        k.extend_from_slice(self.beta0.components());
        k
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

fn check_dims(alpha: &MixedPathVector, s: &ActionMatrix, beta: &MixedPathVector) -> Result<()> {
    if alpha.len() != s.n() || beta.len() != s.n() {
        return Err(GameError::DimensionMismatch(format!(
            "alpha has {}, beta has {}, matrix is {}x{}",
            alpha.len(),
            beta.len(),
            s.n(),
            s.n()
        )));
    }
    Ok(())
}

/// `Σ_jk α_j S_jk β_k`.
pub fn generalized_action(
    alpha: &MixedPathVector,
    s: &ActionMatrix,
    beta: &MixedPathVector,
) -> Result<f64> {
    check_dims(alpha, s, beta)?;
    Ok(dot(alpha.components(), &s.apply(beta.components())))
}

/// Boson per-path probability `α_j² + β_j²`.
pub fn path_probability(alpha_j: f64, beta_j: f64) -> f64 {
    alpha_j * alpha_j + beta_j * beta_j
}

/// `(Σα)² + (Σβ)²`.
pub fn total_probability(alpha: &MixedPathVector, beta: &MixedPathVector) -> Result<f64> {
    if alpha.len() != beta.len() {
        return Err(GameError::DimensionMismatch(format!(
            "alpha has {}, beta has {}",
            alpha.len(),
            beta.len()
        )));
    }
    let a = alpha.sum();
    let b = beta.sum();
    Ok(a * a + b * b)
}

/// All components equal to `c = 1/(n√2)` in both vectors.
pub fn uniform_stationary_pair(s: &ActionMatrix) -> OptimalPair {
    let n = s.n();
    let c = 1.0 / (n as f64 * std::f64::consts::SQRT_2);
    let alpha = MixedPathVector::uniform(n, c).expect("uniform component lies in [-1, 1]");
    let mut pair = OptimalPair::diagnose(alpha.clone(), alpha, s).expect("dimensions agree");
    // Closed form (Σ_jk S_jk)/(2n²) rather than the bilinear product.
    pair.value = s.total() / (2.0 * (n * n) as f64);
    pair
}

/// Angle in `[0, π]` between `α₀` and `S β₀`.
pub fn parallelism_diagnostic(
    alpha0: &MixedPathVector,
    beta0: &MixedPathVector,
    s: &ActionMatrix,
) -> Result<f64> {
    check_dims(alpha0, s, beta0)?;
    let image = s.apply(beta0.components());
    angle_between(alpha0.components(), &image).ok_or(GameError::ZeroImage)
}

/// `2 atan2(|â - b̂|, |â + b̂|)`, accurate near 0 and π.
pub(crate) fn angle_between(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Some(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

/// Which components are free (not pinned by the box).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FreeMask {
    pub alpha: Vec<bool>,
    pub beta: Vec<bool>,
}

impl FreeMask {
    pub fn all(n: usize) -> Self {
        Self {
            alpha: vec![true; n],
            beta: vec![true; n],
        }
    }
}

/// Least-squares multiplier for the gradient rows of the free components.
pub(crate) fn lagrange_multiplier(
    alpha: &[f64],
    beta: &[f64],
    s: &ActionMatrix,
    mask: Option<&FreeMask>,
) -> f64 {
    let a = compensated_sum(alpha.iter().copied());
    let b = compensated_sum(beta.iter().copied());
    let sb = s.apply(beta);
    let sa = s.apply_transpose(alpha);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..s.n() {
        if mask.is_none_or(|m| m.alpha[j]) {
            num += 2.0 * a * sb[j];
            den += 4.0 * a * a;
        }
        if mask.is_none_or(|m| m.beta[j]) {
            num += 2.0 * b * sa[j];
            den += 4.0 * b * b;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Max-norm of the gradient rows `Sβ - 2λaΣ𝟙`, `Sᵀα - 2λb𝟙` over free
/// components.
pub(crate) fn lagrange_residual(
    alpha: &[f64],
    beta: &[f64],
    s: &ActionMatrix,
    lambda: f64,
    mask: Option<&FreeMask>,
) -> f64 {
    let a = compensated_sum(alpha.iter().copied());
    let b = compensated_sum(beta.iter().copied());
    let sb = s.apply(beta);
    let sa = s.apply_transpose(alpha);
    let mut worst: f64 = 0.0;
    for j in 0..s.n() {
        if mask.is_none_or(|m| m.alpha[j]) {
            worst = worst.max((sb[j] - 2.0 * lambda * a).abs());
        }
        if mask.is_none_or(|m| m.beta[j]) {
            worst = worst.max((sa[j] - 2.0 * lambda * b).abs());
        }
    }
    worst
}

/// Inertia of the Lagrangian Hessian projected on the tangent space of the
/// normalization constraint, restricted to free components.
pub(crate) fn hessian_inertia(
    alpha: &[f64],
    beta: &[f64],
    lambda: f64,
    s: &ActionMatrix,
    mask: Option<&FreeMask>,
) -> Inertia {
    let n = s.n();
    let a = compensated_sum(alpha.iter().copied());
    let b = compensated_sum(beta.iter().copied());
    let full = FreeMask::all(n);
    let mask = mask.unwrap_or(&full);
    // (side, index) of each free variable
    let vars: Vec<(Side, usize)> = (0..n)
        .filter(|&j| mask.alpha[j])
        .map(|j| (Side::Alpha, j))
        .chain((0..n).filter(|&k| mask.beta[k]).map(|k| (Side::Beta, k)))
        .collect();
    let m = vars.len();
    if m == 0 {
        return Inertia {
            positive: 0,
            negative: 0,
            zero: 0,
        };
    }
    let hess = DMatrix::from_fn(m, m, |r, c| match (vars[r], vars[c]) {
        ((Side::Alpha, _), (Side::Alpha, _)) | ((Side::Beta, _), (Side::Beta, _)) => -2.0 * lambda,
        ((Side::Alpha, j), (Side::Beta, k)) => s.get(j, k),
        ((Side::Beta, k), (Side::Alpha, j)) => s.get(j, k),
    });
    let grad = nalgebra::DVector::from_fn(m, |r, _| match vars[r].0 {
        Side::Alpha => a,
        Side::Beta => b,
    });
    let gnorm2 = grad.norm_squared();
    let proj = if gnorm2 > 0.0 {
        DMatrix::identity(m, m) - &grad * grad.transpose() / gnorm2
    } else {
        DMatrix::identity(m, m)
    };
    let reduced = &proj * hess * &proj;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let scale = eig.eigenvalues.amax().max(1.0);
    let tol = 1e-9 * scale;
    let mut inertia = Inertia {
        positive: 0,
        negative: 0,
        zero: 0,
    };
    for &ev in eig.eigenvalues.iter() {
        if ev > tol {
            inertia.positive += 1;
        } else if ev < -tol {
            inertia.negative += 1;
        } else {
            inertia.zero += 1;
        }
    }
    // the constraint normal itself is projected to a zero eigenvalue
    if gnorm2 > 0.0 && inertia.zero > 0 {
        inertia.zero -= 1;
    }
    inertia
}

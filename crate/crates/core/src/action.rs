//! Separable Hamiltonians, discretized phase-space actions and the action
//! matrix over a path family.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{self, LatticeError, LatticePath, PathFamily, PathKind, TimeGrid};
use crate::summation::NeumaierSum;

/// Default ceiling on the number of action-matrix entries.
pub const DEFAULT_MATRIX_CAP: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("invalid hamiltonian: {0}")]
    InvalidHamiltonian(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("action matrix of {n}x{n} exceeds the entry cap of {cap}")]
    MatrixCapExceeded { n: usize, cap: u64 },
    #[error("path family is empty")]
    EmptyFamily,
    #[error("invalid action matrix: {0}")]
    InvalidMatrix(String),
    #[error("non-finite action")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, ActionError>;

/// Piecewise-linear potential, clamped to the end values outside its range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PotentialTable {
    q: Vec<f64>,
    v: Vec<f64>,
}

impl PotentialTable {
    pub fn new(pairs: Vec<[f64; 2]>) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(ActionError::InvalidHamiltonian(
                "potential table needs at least two points".into(),
            ));
        }
        if pairs.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ActionError::InvalidHamiltonian(
                "non-finite potential table".into(),
            ));
        }
        if pairs.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(ActionError::InvalidHamiltonian(
                "potential table positions must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            q: pairs.iter().map(|p| p[0]).collect(),
            v: pairs.iter().map(|p| p[1]).collect(),
        })
    }

    /// Interpolated value and whether `q` fell outside the table.
    pub fn eval(&self, q: f64) -> (f64, bool) {
        let n = self.q.len();
        if q <= self.q[0] {
            return (self.v[0], q < self.q[0]);
        }
        if q >= self.q[n - 1] {
            return (self.v[n - 1], q > self.q[n - 1]);
        }
        let i = self.q.partition_point(|&x| x <= q) - 1;
        let s = (q - self.q[i]) / (self.q[i + 1] - self.q[i]);
        (self.v[i] + s * (self.v[i + 1] - self.v[i]), false)
    }

    fn min_spacing(&self) -> f64 {
        self.q
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<[f64; 2]>> for PotentialTable {
    type Error = ActionError;

    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(pairs)
    }
}

impl From<PotentialTable> for Vec<[f64; 2]> {
    fn from(t: PotentialTable) -> Self {
        t.q.into_iter().zip(t.v).map(|(q, v)| [q, v]).collect()
    }
}

/// `H(p, q) = p²/2m + V(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HamiltonianModel {
    Free { mass: f64 },
    Harmonic { mass: f64, omega: f64 },
    Tabulated { mass: f64, table: PotentialTable },
}

impl HamiltonianModel {
    pub fn free(mass: f64) -> Result<Self> {
        let h = Self::Free { mass };
        h.validate()?;
        Ok(h)
    }

    pub fn harmonic(mass: f64, omega: f64) -> Result<Self> {
        let h = Self::Harmonic { mass, omega };
        h.validate()?;
        Ok(h)
    }

    pub fn tabulated(mass: f64, pairs: Vec<[f64; 2]>) -> Result<Self> {
        let h = Self::Tabulated {
            mass,
            table: PotentialTable::new(pairs)?,
        };
        h.validate()?;
        Ok(h)
    }

    /// Re-checks parameter ranges; needed after deserializing.
    pub fn validate(&self) -> Result<()> {
        let mass = self.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(ActionError::InvalidHamiltonian(format!(
                "mass must be positive, got {mass}"
            )));
        }
        if let Self::Harmonic { omega, .. } = self {
            if !(*omega > 0.0 && omega.is_finite()) {
                return Err(ActionError::InvalidHamiltonian(format!(
                    "omega must be positive, got {omega}"
                )));
            }
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        match self {
            Self::Free { mass } | Self::Harmonic { mass, .. } | Self::Tabulated { mass, .. } => {
                *mass
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Free { .. } => "free",
            Self::Harmonic { .. } => "harmonic",
            Self::Tabulated { .. } => "tabulated",
        }
    }

    /// `V(q)` and whether a tabulated potential was evaluated outside its table.
    pub fn potential_flagged(&self, q: f64) -> (f64, bool) {
        match self {
            Self::Free { .. } => (0.0, false),
            Self::Harmonic { mass, omega } => (0.5 * mass * omega * omega * q * q, false),
            Self::Tabulated { table, .. } => table.eval(q),
        }
    }

    pub fn potential(&self, q: f64) -> f64 {
        self.potential_flagged(q).0
    }

    pub fn kinetic(&self, p: f64) -> f64 {
        p * p / (2.0 * self.mass())
    }

    pub fn energy(&self, p: f64, q: f64) -> f64 {
        self.kinetic(p) + self.potential(q)
    }

    /// `H_p = T'(p)`.
    pub fn velocity(&self, p: f64) -> f64 {
        p / self.mass()
    }

    /// `T'^{-1}(v)`; `None` if the inverse is not finite.
    pub fn momentum_for_velocity(&self, v: f64) -> Option<f64> {
        let p = self.mass() * v;
        p.is_finite().then_some(p)
    }

    /// `H_q = V'(q)`; central difference for tabulated potentials.
    pub fn force_gradient(&self, q: f64) -> f64 {
        match self {
            Self::Free { .. } => 0.0,
            Self::Harmonic { mass, omega } => mass * omega * omega * q,
            Self::Tabulated { table, .. } => {
                let h = 1e-3 * table.min_spacing();
                (table.eval(q + h).0 - table.eval(q - h).0) / (2.0 * h)
            }
        }
    }
}

/// Action value in units of J·s (or natural units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionValue {
    pub value: f64,
    /// A tabulated potential was evaluated outside its table.
    pub extrapolated: bool,
}

fn check_pair(p_path: &LatticePath, q_path: &LatticePath, grid: &TimeGrid) -> Result<()> {
    p_path.check(PathKind::Momentum, grid)?;
    q_path.check(PathKind::Position, grid)?;
    Ok(())
}

/// Slice sum `Σ p_k (q_{k+1} - q_k) - H(p_k, q̄_k) dt`, with `q̄_k` the
/// interval midpoint.
pub(crate) fn action_s_raw(p: &[f64], q: &[f64], h: &HamiltonianModel, dt: f64) -> (f64, bool) {
    let mut acc = NeumaierSum::new();
    let mut extrapolated = false;
    for (k, &pk) in p.iter().enumerate() {
        let (v, flag) = h.potential_flagged(0.5 * (q[k] + q[k + 1]));
        extrapolated |= flag;
        acc.add(pk * (q[k + 1] - q[k]) - (h.kinetic(pk) + v) * dt);
    }
    (acc.total(), extrapolated)
}

pub fn discrete_action_s(
    p_path: &LatticePath,
    q_path: &LatticePath,
    hamiltonian: &HamiltonianModel,
    grid: &TimeGrid,
) -> Result<ActionValue> {
    check_pair(p_path, q_path, grid)?;
    let (value, extrapolated) =
        action_s_raw(p_path.values(), q_path.values(), hamiltonian, grid.dt());
    if !value.is_finite() {
        return Err(ActionError::NonFinite);
    }
    Ok(ActionValue {
        value,
        extrapolated,
    })
}

/// The boundary term `p_f q_f - p_i q_i` separating S from R.
pub fn boundary_term(p_path: &LatticePath, q_path: &LatticePath) -> f64 {
    p_path.last() * q_path.last() - p_path.first() * q_path.first()
}

/// Dual action, fixed by the discrete integration-by-parts identity
/// `R = S - (p_f q_f - p_i q_i)`.
pub fn discrete_action_r(
    p_path: &LatticePath,
    q_path: &LatticePath,
    hamiltonian: &HamiltonianModel,
    grid: &TimeGrid,
) -> Result<ActionValue> {
    let s = discrete_action_s(p_path, q_path, hamiltonian, grid)?;
    Ok(ActionValue {
        value: s.value - boundary_term(p_path, q_path),
        extrapolated: s.extrapolated,
    })
}

/// Diagonal action of a position path paired with its inferred momentum path.
pub fn classical_pair_action(
    q_path: &LatticePath,
    hamiltonian: &HamiltonianModel,
    grid: &TimeGrid,
) -> Result<ActionValue> {
    let p = lattice::infer_momentum_path(q_path, hamiltonian, grid)?;
    discrete_action_s(&p, q_path, hamiltonian, grid)
}

/// Square matrix `S_jk = S[p_j, q_k]`; rows index momentum paths, columns
/// position paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMatrix {
    n: usize,
    entries: Vec<f64>,
    extrapolated: bool,
}

impl ActionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(ActionError::InvalidMatrix("empty matrix".into()));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(ActionError::InvalidMatrix("matrix must be square".into()));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(ActionError::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self {
            n,
            entries,
            extrapolated: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.n + k]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.entries[j * self.n..(j + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn extrapolated(&self) -> bool {
        self.extrapolated
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.get(j, j)).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|x| c * x).collect(),
            extrapolated: self.extrapolated,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0.0)
    }

    /// `S x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|j| dot(self.row(j), x)).collect()
    }

    /// `Sᵀ x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|k| {
                let mut acc = NeumaierSum::new();
                for j in 0..self.n {
                    acc.add(self.get(j, k) * x[j]);
                }
                acc.total()
            })
            .collect()
    }

    /// Row sums (`S 𝟙`).
    pub fn row_sums(&self) -> Vec<f64> {
        self.apply(&vec![1.0; self.n])
    }

    /// Column sums (`Sᵀ 𝟙`).
    pub fn column_sums(&self) -> Vec<f64> {
        self.apply_transpose(&vec![1.0; self.n])
    }

    pub fn total(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        acc.extend(self.entries.iter().copied());
        acc.total()
    }

    /// Row-major CSV with a header row of column indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.n).map(|k| k.to_string()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for j in 0..self.n {
            let row: Vec<String> = self.row(j).iter().map(|x| x.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| ActionError::InvalidMatrix("missing header".into()))?;
        let n = header.split(',').count();
        let rows = lines
            .map(|l| {
                l.split(',')
                    .map(|x| {
                        x.trim().parse::<f64>().map_err(|e| {
                            ActionError::InvalidMatrix(format!("bad entry {x:?}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.len() != n {
            return Err(ActionError::InvalidMatrix(format!(
                "header names {n} columns but {} rows follow",
                rows.len()
            )));
        }
        Self::from_rows(rows)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n);
        for (j, d) in self.diagonal().iter().enumerate() {
            let _ = writeln!(s, "S[{j},{j}] = {d}");
        }
        s
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionMatrixJson {
    n: usize,
    entries: Vec<Vec<f64>>,
}

impl Serialize for ActionMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ActionMatrixJson {
            n: self.n,
            entries: self.rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ActionMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ActionMatrixJson::deserialize(d)?;
        if raw.entries.len() != raw.n {
            return Err(serde::de::Error::custom("entries length does not match n"));
        }
        ActionMatrix::from_rows(raw.entries).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.total()
}

pub fn build_action_matrix(
    q_family: &PathFamily,
    hamiltonian: &HamiltonianModel,
    grid: &TimeGrid,
) -> Result<ActionMatrix> {
    build_action_matrix_capped(q_family, hamiltonian, grid, DEFAULT_MATRIX_CAP)
}

/// Fills `S_jk = S[p_j, q_k]` with `p_j` inferred from `q_j`. Entries are
/// computed independently, so the parallel fill is bit-identical to a
/// serial one.
pub fn build_action_matrix_capped(
    q_family: &PathFamily,
    hamiltonian: &HamiltonianModel,
    grid: &TimeGrid,
    entry_cap: u64,
) -> Result<ActionMatrix> {
    let n = q_family.len();
    if n == 0 {
        return Err(ActionError::EmptyFamily);
    }
    if (n as u128) * (n as u128) > entry_cap as u128 {
        return Err(ActionError::MatrixCapExceeded { n, cap: entry_cap });
    }
    let momenta = q_family
        .paths
        .iter()
        .map(|q| lattice::infer_momentum_path(q, hamiltonian, grid))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    for q in &q_family.paths {
        q.check(PathKind::Position, grid)?;
    }
    let dt = grid.dt();
    let cells: Vec<(f64, bool)> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (j, k) = (idx / n, idx % n);
            action_s_raw(
                momenta[j].values(),
                q_family.paths[k].values(),
                hamiltonian,
                dt,
            )
        })
        .collect();
    if cells.iter().any(|(v, _)| !v.is_finite()) {
        return Err(ActionError::NonFinite);
    }
    Ok(ActionMatrix {
        n,
        extrapolated: cells.iter().any(|c| c.1),
        entries: cells.into_iter().map(|c| c.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_position_paths, SpaceGrid};

    fn grid(t: f64, n: usize) -> TimeGrid {
        TimeGrid::new(0.0, t, n).unwrap()
    }

    #[test]
    fn free_single_slice_action() {
        let h = HamiltonianModel::free(1.0).unwrap();
        let q = LatticePath::position(vec![0.0, 1.0]);
        let p = LatticePath::momentum(vec![1.0]);
        let s = discrete_action_s(&p, &q, &h, &grid(1.0, 1)).unwrap();
        assert_eq!(s.value, 0.5);
        let r = discrete_action_r(&p, &q, &h, &grid(1.0, 1)).unwrap();
        assert_eq!(r.value, -0.5);
    }

    #[test]
    fn harmonic_rest_at_origin_has_zero_action() {
        let h = HamiltonianModel::harmonic(1.0, 1.0).unwrap();
        let q = LatticePath::position(vec![0.0, 0.0]);
        let p = LatticePath::momentum(vec![0.0]);
        assert_eq!(
            discrete_action_s(&p, &q, &h, &grid(1.0, 1)).unwrap().value,
            0.0
        );
    }

    #[test]
    fn rest_path_r_equals_s() {
        let h = HamiltonianModel::harmonic(1.0, 1.0).unwrap();
        let q = LatticePath::position(vec![3.0, 3.0]);
        let p = LatticePath::momentum(vec![0.0]);
        let g = grid(0.7, 1);
        let s = discrete_action_s(&p, &q, &h, &g).unwrap().value;
        let r = discrete_action_r(&p, &q, &h, &g).unwrap().value;
        assert_eq!(s, r);
        assert!((s + h.potential(3.0) * 0.7).abs() < 1e-15);
    }

    #[test]
    fn two_slice_hand_sum() {
        let h = HamiltonianModel::free(1.0).unwrap();
        let q = LatticePath::position(vec![0.0, 1.0, 0.0]);
        let p = LatticePath::momentum(vec![1.0, -1.0]);
        let g = grid(2.0, 2);
        // (1*1 - 0.5*1) + ((-1)*(-1) - 0.5*1)
        assert_eq!(discrete_action_s(&p, &q, &h, &g).unwrap().value, 1.0);
        assert_eq!(discrete_action_r(&p, &q, &h, &g).unwrap().value, 1.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let h = HamiltonianModel::free(1.0).unwrap();
        let q = LatticePath::position(vec![0.0, 1.0]);
        let p = LatticePath::momentum(vec![1.0, 1.0]);
        assert!(discrete_action_s(&p, &q, &h, &grid(1.0, 1)).is_err());
        assert!(discrete_action_s(&q, &p, &h, &grid(1.0, 1)).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_flags_clamping() {
        let h = HamiltonianModel::tabulated(1.0, vec![[0.0, 0.0], [1.0, 2.0], [2.0, 0.0]]).unwrap();
        assert_eq!(h.potential_flagged(0.5), (1.0, false));
        assert_eq!(h.potential_flagged(1.5), (1.0, false));
        assert_eq!(h.potential_flagged(3.0), (0.0, true));
        assert_eq!(h.potential_flagged(-1.0), (0.0, true));
        assert!((h.force_gradient(0.5) - 2.0).abs() < 1e-9);
        assert!((h.force_gradient(1.5) + 2.0).abs() < 1e-9);
        let q = LatticePath::position(vec![0.0, 6.0]);
        let p = LatticePath::momentum(vec![6.0]);
        assert!(
            discrete_action_s(&p, &q, &h, &grid(1.0, 1))
                .unwrap()
                .extrapolated
        );
        assert!(HamiltonianModel::tabulated(1.0, vec![[0.0, 0.0]]).is_err());
        assert!(HamiltonianModel::tabulated(1.0, vec![[1.0, 0.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn hamiltonian_validation_and_serde() {
        assert!(HamiltonianModel::free(0.0).is_err());
        assert!(HamiltonianModel::harmonic(1.0, -1.0).is_err());
        let h: HamiltonianModel =
            serde_json::from_str(r#"{"kind":"harmonic","mass":2.0,"omega":3.0}"#).unwrap();
        assert_eq!(h, HamiltonianModel::harmonic(2.0, 3.0).unwrap());
        assert!(
            serde_json::from_str::<HamiltonianModel>(r#"{"kind":"free","mass":1,"x":1}"#).is_err()
        );
        let t: HamiltonianModel =
            serde_json::from_str(r#"{"kind":"tabulated","mass":1.0,"table":[[0,0],[1,1]]}"#)
                .unwrap();
        assert_eq!(t.potential(0.25), 0.25);
        assert!(serde_json::from_str::<HamiltonianModel>(
            r#"{"kind":"tabulated","mass":1.0,"table":[[0,0]]}"#
        )
        .is_err());
    }

    #[test]
    fn single_path_matrix_is_one_by_one() {
        let g = grid(1.0, 1);
        let space = SpaceGrid::uniform(0.0, 1.0, 2).unwrap();
        let fam = enumerate_position_paths(g, &space, 0.0, 1.0, 10).unwrap();
        let h = HamiltonianModel::free(1.0).unwrap();
        let m = build_action_matrix(&fam, &h, &g).unwrap();
        assert_eq!(m.n(), 1);
        assert_eq!(m.get(0, 0), 0.5);
    }

    /// Scalar slice-sum oracle for one entry, written out term by term.
    fn entry_oracle(qj: &[f64], qk: &[f64], dt: f64, m: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..qk.len() - 1 {
            let p = m * (qj[i + 1] - qj[i]) / dt;
            total += p * (qk[i + 1] - qk[i]) - p * p / (2.0 * m) * dt;
        }
        total
    }

    #[test]
    fn three_path_matrix_matches_entry_oracle() {
        let g = grid(2.0, 2);
        let space = SpaceGrid::uniform(0.0, 0.5, 3).unwrap();
        let fam = enumerate_position_paths(g, &space, 0.0, 1.0, 10).unwrap();
        let h = HamiltonianModel::free(1.0).unwrap();
        let m = build_action_matrix(&fam, &h, &g).unwrap();
        assert_eq!(m.n(), 3);
        for j in 0..3 {
            for k in 0..3 {
                let o = entry_oracle(fam.paths[j].values(), fam.paths[k].values(), 1.0, 1.0);
                assert!((m.get(j, k) - o).abs() < 1e-14, "entry {j},{k}");
            }
        }
        // straight path (0, 0.5, 1) sits in the middle of the ordering
        assert_eq!(m.get(1, 1), 0.25);
    }

    #[test]
    fn matrix_cap_and_empty_family() {
        let g = grid(1.0, 3);
        let space = SpaceGrid::uniform(0.0, 1.0, 4).unwrap();
        let fam = enumerate_position_paths(g, &space, 0.0, 1.0, 100).unwrap();
        let h = HamiltonianModel::free(1.0).unwrap();
        assert!(matches!(
            build_action_matrix_capped(&fam, &h, &g, 100),
            Err(ActionError::MatrixCapExceeded { n: 16, cap: 100 })
        ));
        let empty = PathFamily {
            paths: vec![],
            ..fam
        };
        assert_eq!(
            build_action_matrix(&empty, &h, &g),
            Err(ActionError::EmptyFamily)
        );
    }

    #[test]
    fn parallel_fill_is_bit_identical_to_serial() {
        let g = grid(1.0, 3);
        let space = SpaceGrid::uniform(-1.0, 0.5, 5).unwrap();
        let fam = enumerate_position_paths(g, &space, 0.0, 1.0, 100).unwrap();
        let h = HamiltonianModel::harmonic(1.3, 0.8).unwrap();
        let m = build_action_matrix(&fam, &h, &g).unwrap();
        for j in 0..m.n() {
            let p = lattice::infer_momentum_path(&fam.paths[j], &h, &g).unwrap();
            for k in 0..m.n() {
                let s = discrete_action_s(&p, &fam.paths[k], &h, &g).unwrap().value;
                assert_eq!(s.to_bits(), m.get(j, k).to_bits());
            }
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let m = ActionMatrix::from_rows(vec![vec![1.0, -2.5], vec![0.125, 3.0]]).unwrap();
        let csv = m.to_csv();
        assert_eq!(csv, "0,1\n1,-2.5\n0.125,3\n");
        assert_eq!(ActionMatrix::from_csv(&csv).unwrap(), m);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"n":2,"entries":[[1.0,-2.5],[0.125,3.0]]}"#);
        let back: ActionMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(ActionMatrix::from_rows(vec![vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn action_is_additive_over_concatenation() {
        let h = HamiltonianModel::harmonic(1.0, 2.0).unwrap();
        let q = LatticePath::position(vec![0.0, 0.3, -0.2, 0.7, 1.0]);
        let g = grid(1.0, 4);
        let (gl, gr) = g.split_at(2).unwrap();
        let ql = LatticePath::position(q.values()[..=2].to_vec());
        let qr = LatticePath::position(q.values()[2..].to_vec());
        let total = classical_pair_action(&q, &h, &g).unwrap().value;
        let left = classical_pair_action(&ql, &h, &gl).unwrap().value;
        let right = classical_pair_action(&qr, &h, &gr).unwrap().value;
        assert!((total - (left + right)).abs() < 1e-12);
    }
}

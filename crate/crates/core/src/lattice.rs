//! Time and space lattices, lattice paths, and enumeration of every position
//! path between two fixed endpoints.
//!
//! Positions live on the `n_steps + 1` node times `t_k = t_start + k dt`.
//! Momenta live on the `n_steps` interval midpoints `t_k + dt/2`, so that the
//! two kinds of sample are never taken at the same instant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::HamiltonianModel;

/// Default ceiling on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: u64 = 1_000_000;

const SPACING_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("invalid space grid: {0}")]
    InvalidSpaceGrid(String),
    #[error("endpoint {0} is not a point of the space grid")]
    EndpointNotOnGrid(f64),
    #[error("path enumeration would produce {predicted} paths, above the cap of {cap}")]
    CapExceeded { predicted: u128, cap: u64 },
    #[error("expected a {expected:?} path with {expected_len} values, got {kind:?} with {len}")]
    PathShape {
        expected: PathKind,
        expected_len: usize,
        kind: PathKind,
        len: usize,
    },
    #[error("kinetic term cannot be inverted for velocity {0}")]
    NonInvertibleKinetic(f64),
    #[error("uncertainty cell inputs must be positive (dp={dp}, dq={dq}, hbar={hbar})")]
    NonPositiveCell { dp: f64, dq: f64, hbar: f64 },
}

pub type Result<T> = std::result::Result<T, LatticeError>;

/// Uniform time axis `[t_start, t_end]` cut into `n_steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(LatticeError::InvalidTimeGrid("non-finite bounds".into()));
        }
        if t_end <= t_start {
            return Err(LatticeError::InvalidTimeGrid(format!(
                "t_end ({t_end}) must exceed t_start ({t_start})"
            )));
        }
        if n_steps == 0 {
            return Err(LatticeError::InvalidTimeGrid(
                "n_steps must be at least 1".into(),
            ));
        }
        let dt = (t_end - t_start) / n_steps as f64;
        if dt <= 0.0 {
            return Err(LatticeError::InvalidTimeGrid(
                "dt underflows to zero".into(),
            ));
        }
        Ok(Self {
            t_start,
            t_end,
            n_steps,
            dt,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Time of node `k`, `0 <= k <= n_steps`.
    pub fn node_time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    /// Time of the momentum sample on interval `k`, half a step after node `k`.
    pub fn momentum_time(&self, k: usize) -> f64 {
        self.node_time(k) + 0.5 * self.dt
    }

    /// Splits the grid at node `k` into the two sub-grids on either side.
    pub fn split_at(&self, k: usize) -> Result<(TimeGrid, TimeGrid)> {
        if k == 0 || k >= self.n_steps {
            return Err(LatticeError::InvalidTimeGrid(format!(
                "split node {k} must be interior to 0..{}",
                self.n_steps
            )));
        }
        let mid = self.node_time(k);
        Ok((
            TimeGrid::new(self.t_start, mid, k)?,
            TimeGrid::new(mid, self.t_end, self.n_steps - k)?,
        ))
    }
}

/// Strictly increasing, uniformly spaced set of positions.
///
/// A single-point grid is allowed; its spacing is reported as zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceGrid {
    points: Vec<f64>,
    dq: f64,
}

impl SpaceGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(LatticeError::InvalidSpaceGrid(
                "at least one point required".into(),
            ));
        }
        if points.iter().any(|q| !q.is_finite()) {
            return Err(LatticeError::InvalidSpaceGrid("non-finite point".into()));
        }
        if points.len() == 1 {
            return Ok(Self { points, dq: 0.0 });
        }
        let span = points[points.len() - 1] - points[0];
        let dq = span / (points.len() - 1) as f64;
        if dq <= 0.0 {
            return Err(LatticeError::InvalidSpaceGrid(
                "points must be strictly increasing".into(),
            ));
        }
        for (i, w) in points.windows(2).enumerate() {
            let step = w[1] - w[0];
            if step <= 0.0 {
                return Err(LatticeError::InvalidSpaceGrid(format!(
                    "points must be strictly increasing (index {i})"
                )));
            }
            if ((step - dq) / dq).abs() > SPACING_REL_TOL {
                return Err(LatticeError::InvalidSpaceGrid(format!(
                    "non-uniform spacing at index {i}: {step} vs {dq}"
                )));
            }
        }
        Ok(Self { points, dq })
    }

    /// `count` points starting at `start` with spacing `spacing`.
    pub fn uniform(start: f64, spacing: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(LatticeError::InvalidSpaceGrid(
                "at least one point required".into(),
            ));
        }
        if !(spacing > 0.0 && spacing.is_finite()) && count > 1 {
            return Err(LatticeError::InvalidSpaceGrid(
                "spacing must be positive".into(),
            ));
        }
        Self::new((0..count).map(|i| start + i as f64 * spacing).collect())
    }

    /// Grid with spacing `spacing` covering `[lo - extent, hi + extent]`,
    /// anchored so that `lo` is a grid point.
    pub fn covering(lo: f64, hi: f64, extent: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(extent >= 0.0) || hi < lo {
            return Err(LatticeError::InvalidSpaceGrid(format!(
                "bad covering request lo={lo} hi={hi} extent={extent} spacing={spacing}"
            )));
        }
        let below = (extent / spacing).ceil() as usize;
        let above = ((hi - lo + extent) / spacing - 1e-9).ceil() as usize;
        let start = lo - below as f64 * spacing;
        Self::new(
            (0..=below + above)
                .map(|i| start + i as f64 * spacing)
                .collect(),
        )
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dq(&self) -> f64 {
        self.dq
    }

    /// Index of the grid point equal to `q` within `1e-12 dq`.
    pub fn index_of(&self, q: f64) -> Option<usize> {
        if self.points.len() == 1 {
            let p = self.points[0];
            return ((q - p).abs() <= 1e-12 * p.abs().max(1.0)).then_some(0);
        }
        let tol = 1e-12 * self.dq;
        let raw = (q - self.points[0]) / self.dq;
        if !raw.is_finite() {
            return None;
        }
        let i = raw.round();
        if i < 0.0 || i as usize >= self.points.len() {
            return None;
        }
        let i = i as usize;
        ((self.points[i] - q).abs() <= tol).then_some(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Position,
    Momentum,
}

/// Positions at node times or momenta at interval midpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticePath {
    kind: PathKind,
    values: Vec<f64>,
}

impl LatticePath {
    pub fn position(values: Vec<f64>) -> Self {
        Self {
            kind: PathKind::Position,
            values,
        }
    }

    pub fn momentum(values: Vec<f64>) -> Self {
        Self {
            kind: PathKind::Momentum,
            values,
        }
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn expected_len(kind: PathKind, grid: &TimeGrid) -> usize {
        match kind {
            PathKind::Position => grid.n_steps() + 1,
            PathKind::Momentum => grid.n_steps(),
        }
    }

    /// Checks that this path has the given kind and the length the grid demands.
    pub fn check(&self, kind: PathKind, grid: &TimeGrid) -> Result<()> {
        let expected_len = Self::expected_len(kind, grid);
        if self.kind != kind || self.values.len() != expected_len {
            return Err(LatticeError::PathShape {
                expected: kind,
                expected_len,
                kind: self.kind,
                len: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Ordered family of same-kind paths sharing fixed endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFamily {
    pub grid: TimeGrid,
    pub space: Option<SpaceGrid>,
    pub kind: PathKind,
    pub endpoints: (f64, f64),
    pub paths: Vec<LatticePath>,
}

impl PathFamily {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let file = PathFamilyFile {
            t_start: self.grid.t_start(),
            t_end: self.grid.t_end(),
            n_steps: self.grid.n_steps(),
            space: self
                .space
                .as_ref()
                .map(|s| s.points().to_vec())
                .unwrap_or_default(),
            paths: self.paths.iter().map(|p| p.values().to_vec()).collect(),
        };
        serde_json::to_value(file).expect("path family serializes")
    }
}

/// On-disk form of a path family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFamilyFile {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub space: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
}

impl PathFamilyFile {
    /// Rebuilds a position family, validating grid and path shapes.
    pub fn into_family(self) -> Result<PathFamily> {
        let grid = TimeGrid::new(self.t_start, self.t_end, self.n_steps)?;
        let space = if self.space.is_empty() {
            None
        } else {
            Some(SpaceGrid::new(self.space)?)
        };
        let paths: Vec<LatticePath> = self.paths.into_iter().map(LatticePath::position).collect();
        for p in &paths {
            p.check(PathKind::Position, &grid)?;
        }
        let endpoints = paths
            .first()
            .map(|p| (p.first(), p.last()))
            .unwrap_or((f64::NAN, f64::NAN));
        Ok(PathFamily {
            grid,
            space,
            kind: PathKind::Position,
            endpoints,
            paths,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationOptions {
    pub cap: u64,
    /// Largest allowed jump, in grid indices, between consecutive nodes.
    pub hop_limit: Option<usize>,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_PATH_CAP,
            hop_limit: None,
        }
    }
}

/// Streaming enumerator over every position path with fixed endpoints whose
/// interior nodes range over the space grid.
///
/// Paths are produced in lexicographic order of their interior values; the
/// last interior node varies fastest. Without a hop limit, path `j` can be
/// produced directly with [`PositionPathEnumerator::path_at`].
#[derive(Debug, Clone)]
pub struct PositionPathEnumerator {
    grid: TimeGrid,
    space: SpaceGrid,
    start: usize,
    end: usize,
    hop_limit: Option<usize>,
}

impl PositionPathEnumerator {
    pub fn new(
        grid: TimeGrid,
        space: SpaceGrid,
        q_start: f64,
        q_end: f64,
        hop_limit: Option<usize>,
    ) -> Result<Self> {
        let start = space
            .index_of(q_start)
            .ok_or(LatticeError::EndpointNotOnGrid(q_start))?;
        let end = space
            .index_of(q_end)
            .ok_or(LatticeError::EndpointNotOnGrid(q_end))?;
        Ok(Self {
            grid,
            space,
            start,
            end,
            hop_limit,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    pub fn endpoints(&self) -> (f64, f64) {
        (
            self.space.points()[self.start],
            self.space.points()[self.end],
        )
    }

    pub fn hop_limit(&self) -> Option<usize> {
        self.hop_limit
    }

    pub fn interior_nodes(&self) -> usize {
        self.grid.n_steps() - 1
    }

    /// `|space|^(n_steps - 1)`, saturating at `u128::MAX`.
    pub fn unrestricted_count(&self) -> u128 {
        (self.space.len() as u128)
            .checked_pow(self.interior_nodes() as u32)
            .unwrap_or(u128::MAX)
    }

    /// Number of paths this enumerator yields, honouring the hop limit.
    pub fn count(&self) -> u128 {
        match self.hop_limit {
            None => self.unrestricted_count(),
            Some(hop) => self.hop_limited_count(hop),
        }
    }

    fn hop_limited_count(&self, hop: usize) -> u128 {
        let n = self.space.len();
        let mut ways = vec![0u128; n];
        ways[self.start] = 1;
        for _ in 0..self.interior_nodes() {
            let mut next = vec![0u128; n];
            for (i, &w) in ways.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                let lo = i.saturating_sub(hop);
                let hi = (i + hop).min(n - 1);
                for slot in &mut next[lo..=hi] {
                    *slot = slot.saturating_add(w);
                }
            }
            ways = next;
        }
        let lo = self.end.saturating_sub(hop);
        let hi = (self.end + hop).min(n - 1);
        ways[lo..=hi]
            .iter()
            .fold(0u128, |acc, &w| acc.saturating_add(w))
    }

    fn check_cap(&self, cap: u64) -> Result<u128> {
        let predicted = self.count();
        if predicted > cap as u128 {
            return Err(LatticeError::CapExceeded { predicted, cap });
        }
        Ok(predicted)
    }

    fn assemble(&self, interior: &[usize]) -> LatticePath {
        let pts = self.space.points();
        let mut values = Vec::with_capacity(self.grid.n_steps() + 1);
        values.push(pts[self.start]);
        values.extend(interior.iter().map(|&i| pts[i]));
        values.push(pts[self.end]);
        LatticePath::position(values)
    }

    /// Path number `index` in lexicographic order, ignoring any hop limit.
    pub fn path_at(&self, index: u64) -> LatticePath {
        let base = self.space.len() as u64;
        let k = self.interior_nodes();
        let mut digits = vec![0usize; k];
        let mut rest = index;
        for d in digits.iter_mut().rev() {
            *d = (rest % base) as usize;
            rest /= base;
        }
        self.assemble(&digits)
    }

    /// Writes the node values of path `index` into `out` without allocating.
    pub fn fill_path_at(&self, index: u64, out: &mut [f64]) {
        let pts = self.space.points();
        let base = self.space.len() as u64;
        let n = self.grid.n_steps();
        out[0] = pts[self.start];
        out[n] = pts[self.end];
        let mut rest = index;
        for slot in out[1..n].iter_mut().rev() {
            *slot = pts[(rest % base) as usize];
            rest /= base;
        }
    }

    pub fn iter(&self) -> PositionPaths<'_> {
        PositionPaths {
            source: self,
            digits: vec![0; self.interior_nodes()],
            done: false,
        }
    }

    fn admissible(&self, digits: &[usize]) -> bool {
        let Some(hop) = self.hop_limit else {
            return true;
        };
        let mut prev = self.start;
        for &d in digits.iter().chain(std::iter::once(&self.end)) {
            if prev.abs_diff(d) > hop {
                return false;
            }
            prev = d;
        }
        true
    }
}

/// Iterator returned by [`PositionPathEnumerator::iter`].
pub struct PositionPaths<'a> {
    source: &'a PositionPathEnumerator,
    digits: Vec<usize>,
    done: bool,
}

impl PositionPaths<'_> {
    fn advance(&mut self) {
        let base = self.source.space.len();
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < base {
                return;
            }
            *d = 0;
        }
        self.done = true;
    }
}

impl Iterator for PositionPaths<'_> {
    type Item = LatticePath;

    fn next(&mut self) -> Option<LatticePath> {
        while !self.done {
            let ok = self.source.admissible(&self.digits);
            let path = ok.then(|| self.source.assemble(&self.digits));
            self.advance();
            if path.is_some() {
                return path;
            }
        }
        None
    }
}

pub fn enumerate_position_paths(
    grid: TimeGrid,
    space: &SpaceGrid,
    q_start: f64,
    q_end: f64,
    cap: u64,
) -> Result<PathFamily> {
    enumerate_position_paths_with(
        grid,
        space,
        q_start,
        q_end,
        &EnumerationOptions {
            cap,
            ..Default::default()
        },
    )
}

pub fn enumerate_position_paths_with(
    grid: TimeGrid,
    space: &SpaceGrid,
    q_start: f64,
    q_end: f64,
    options: &EnumerationOptions,
) -> Result<PathFamily> {
    let source =
        PositionPathEnumerator::new(grid, space.clone(), q_start, q_end, options.hop_limit)?;
    let count = source.check_cap(options.cap)?;
    let mut paths = Vec::with_capacity(count as usize);
    paths.extend(source.iter());
    Ok(PathFamily {
        grid,
        space: Some(space.clone()),
        kind: PathKind::Position,
        endpoints: source.endpoints(),
        paths,
    })
}

impl PositionPathEnumerator {
    /// Fails with [`LatticeError::CapExceeded`] when the family is larger than `cap`.
    pub fn ensure_within(&self, cap: u64) -> Result<u64> {
        self.check_cap(cap).map(|c| c as u64)
    }
}

/// Momentum path implied by `q̇ = H_p` on each interval.
pub fn infer_momentum_path(
    q_path: &LatticePath,
    hamiltonian: &HamiltonianModel,
    grid: &TimeGrid,
) -> Result<LatticePath> {
    q_path.check(PathKind::Position, grid)?;
    let dt = grid.dt();
    let values = q_path
        .values()
        .windows(2)
        .map(|w| {
            let v = (w[1] - w[0]) / dt;
            hamiltonian
                .momentum_for_velocity(v)
                .ok_or(LatticeError::NonInvertibleKinetic(v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LatticePath::momentum(values))
}

/// Position path obtained by integrating `q̇ = H_p` forward from `q_start`.
pub fn infer_position_path(
    p_path: &LatticePath,
    hamiltonian: &HamiltonianModel,
    grid: &TimeGrid,
    q_start: f64,
) -> Result<LatticePath> {
    p_path.check(PathKind::Momentum, grid)?;
    let dt = grid.dt();
    let mut values = Vec::with_capacity(p_path.values().len() + 1);
    let mut q = q_start;
    values.push(q);
    for &p in p_path.values() {
        q += hamiltonian.velocity(p) * dt;
        values.push(q);
    }
    Ok(LatticePath::position(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub product: f64,
    pub at_quantum_floor: bool,
}

/// Compares the phase-space cell `dp dq` against the action scale `hbar`.
pub fn uncertainty_cell_check(dp: f64, dq: f64, hbar: f64) -> Result<UncertaintyReport> {
    if !(dp > 0.0 && dq > 0.0 && hbar > 0.0) {
        return Err(LatticeError::NonPositiveCell { dp, dq, hbar });
    }
    let product = dp * dq;
    Ok(UncertaintyReport {
        product,
        at_quantum_floor: product >= hbar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(m: f64) -> HamiltonianModel {
        HamiltonianModel::free(m).unwrap()
    }

    /// Nested-loop enumeration used as an independent ordering oracle.
    fn brute_paths(points: &[f64], interior: usize, a: f64, b: f64) -> Vec<Vec<f64>> {
        let mut out = vec![vec![a]];
        for _ in 0..interior {
            let mut next = Vec::new();
            for prefix in &out {
                for &p in points {
                    let mut v = prefix.clone();
                    v.push(p);
                    next.push(v);
                }
            }
            out = next;
        }
        for v in &mut out {
            v.push(b);
        }
        out
    }

    #[test]
    fn time_grid_rejects_bad_input() {
        assert!(TimeGrid::new(1.0, 1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        let g = TimeGrid::new(0.0, 2.0, 4).unwrap();
        assert_eq!(g.dt(), 0.5);
        assert_eq!(g.node_time(4), 2.0);
        assert_eq!(g.momentum_time(0), 0.25);
    }

    #[test]
    fn space_grid_validation() {
        assert!(SpaceGrid::new(vec![]).is_err());
        assert!(SpaceGrid::new(vec![0.0, 1.0, 3.0]).is_err());
        assert!(SpaceGrid::new(vec![1.0, 0.0]).is_err());
        let g = SpaceGrid::uniform(-1.0, 0.5, 5).unwrap();
        assert_eq!(g.index_of(0.0), Some(2));
        assert_eq!(g.index_of(0.25), None);
        assert_eq!(g.index_of(5.0), None);
        let single = SpaceGrid::new(vec![2.0]).unwrap();
        assert_eq!(single.dq(), 0.0);
        assert_eq!(single.index_of(2.0), Some(0));
    }

    #[test]
    fn covering_grid_contains_endpoints() {
        let g = SpaceGrid::covering(0.0, 1.0, 8.0, 0.125).unwrap();
        assert_eq!(g.points()[0], -8.0);
        assert!((g.points()[g.len() - 1] - 9.0).abs() < 1e-12);
        assert!(g.index_of(0.0).is_some());
        assert!(g.index_of(1.0).is_some());
        assert_eq!(g.len(), 137);
    }

    #[test]
    fn single_step_has_one_path() {
        let grid = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let space = SpaceGrid::uniform(0.0, 1.0, 4).unwrap();
        let fam = enumerate_position_paths(grid, &space, 0.0, 1.0, 10).unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam.paths[0].values(), &[0.0, 1.0]);
    }

    #[test]
    fn two_steps_three_points_give_three_paths() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let space = SpaceGrid::uniform(0.0, 0.5, 3).unwrap();
        let fam = enumerate_position_paths(grid, &space, 0.0, 1.0, 10).unwrap();
        assert_eq!(fam.len(), 3);
    }

    #[test]
    fn three_steps_match_nested_loop_oracle() {
        let grid = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let space = SpaceGrid::uniform(0.0, 0.5, 3).unwrap();
        let fam = enumerate_position_paths(grid, &space, 0.0, 1.0, 100).unwrap();
        let expected = brute_paths(space.points(), 2, 0.0, 1.0);
        let got: Vec<Vec<f64>> = fam.paths.iter().map(|p| p.values().to_vec()).collect();
        assert_eq!(got.len(), 9);
        assert_eq!(got, expected);
        let mut sorted = got.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sorted, got);
    }

    #[test]
    fn counts_are_exact_for_small_grids() {
        for n_steps in 1..=4 {
            for size in 1..=5 {
                let grid = TimeGrid::new(0.0, 1.0, n_steps).unwrap();
                let space = SpaceGrid::uniform(0.0, 1.0, size).unwrap();
                let fam =
                    enumerate_position_paths(grid, &space, 0.0, (size - 1) as f64, 10_000).unwrap();
                assert_eq!(fam.len(), size.pow(n_steps as u32 - 1));
            }
        }
    }

    #[test]
    fn path_at_agrees_with_iterator() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let space = SpaceGrid::uniform(0.0, 1.0, 4).unwrap();
        let e = PositionPathEnumerator::new(grid, space, 0.0, 3.0, None).unwrap();
        let mut buf = vec![0.0; 5];
        for (j, p) in e.iter().enumerate() {
            assert_eq!(e.path_at(j as u64), p);
            e.fill_path_at(j as u64, &mut buf);
            assert_eq!(&buf[..], p.values());
        }
    }

    #[test]
    fn cap_and_endpoint_errors() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let space = SpaceGrid::uniform(0.0, 1.0, 5).unwrap();
        match enumerate_position_paths(grid, &space, 0.0, 1.0, 100) {
            Err(LatticeError::CapExceeded { predicted, cap }) => {
                assert_eq!(predicted, 125);
                assert_eq!(cap, 100);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            enumerate_position_paths(grid, &space, 0.5, 1.0, 1000).unwrap_err(),
            LatticeError::EndpointNotOnGrid(0.5)
        );
    }

    #[test]
    fn hop_limit_restricts_and_counts() {
        let grid = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let space = SpaceGrid::uniform(0.0, 1.0, 5).unwrap();
        let opts = EnumerationOptions {
            cap: 1000,
            hop_limit: Some(1),
        };
        let fam = enumerate_position_paths_with(grid, &space, 0.0, 1.0, &opts).unwrap();
        let oracle: Vec<_> = brute_paths(space.points(), 2, 0.0, 1.0)
            .into_iter()
            .filter(|v| v.windows(2).all(|w| (w[1] - w[0]).abs() <= 1.0 + 1e-12))
            .collect();
        assert_eq!(fam.len(), oracle.len());
        let e = PositionPathEnumerator::new(grid, space, 0.0, 1.0, Some(1)).unwrap();
        assert_eq!(e.count(), oracle.len() as u128);
    }

    #[test]
    fn momentum_inference_examples() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let q = LatticePath::position(vec![0.0, 0.5, 1.0]);
        let p = infer_momentum_path(&q, &free(1.0), &grid).unwrap();
        assert_eq!(p.values(), &[1.0, 1.0]);

        let grid1 = TimeGrid::new(0.0, 0.3, 1).unwrap();
        let rest = LatticePath::position(vec![0.0, 0.0]);
        assert_eq!(
            infer_momentum_path(&rest, &free(1.0), &grid1)
                .unwrap()
                .values(),
            &[0.0]
        );

        let grid2 = TimeGrid::new(0.0, 2.0, 2).unwrap();
        let q = LatticePath::position(vec![0.0, 1.0, 0.0]);
        let p = infer_momentum_path(&q, &free(2.0), &grid2).unwrap();
        // finite differences by hand: m (q1 - q0)/dt, m (q2 - q1)/dt
        assert_eq!(
            p.values(),
            &[2.0 * (1.0 - 0.0) / 1.0, 2.0 * (0.0 - 1.0) / 1.0]
        );
    }

    #[test]
    fn position_inference_examples() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let p = LatticePath::momentum(vec![1.0, 1.0]);
        let q = infer_position_path(&p, &free(1.0), &grid, 0.0).unwrap();
        assert_eq!(q.values(), &[0.0, 0.5, 1.0]);

        let grid1 = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let p = LatticePath::momentum(vec![0.0]);
        assert_eq!(
            infer_position_path(&p, &free(1.0), &grid1, 3.0)
                .unwrap()
                .values(),
            &[3.0, 3.0]
        );

        let grid2 = TimeGrid::new(0.0, 2.0, 2).unwrap();
        let p = LatticePath::momentum(vec![2.0, -2.0]);
        let q = infer_position_path(&p, &free(2.0), &grid2, 0.0).unwrap();
        assert_eq!(q.values(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn inference_rejects_wrong_kind() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let p = LatticePath::momentum(vec![1.0, 1.0]);
        assert!(infer_momentum_path(&p, &free(1.0), &grid).is_err());
        let q = LatticePath::position(vec![0.0, 1.0]);
        assert!(infer_momentum_path(&q, &free(1.0), &grid).is_err());
    }

    #[test]
    fn uncertainty_cell_examples() {
        let r = uncertainty_cell_check(1.0, 1.0, 1.0).unwrap();
        assert_eq!((r.product, r.at_quantum_floor), (1.0, true));
        let r = uncertainty_cell_check(0.5, 1.0, 1.0).unwrap();
        assert_eq!((r.product, r.at_quantum_floor), (0.5, false));
        let r = uncertainty_cell_check(3.0, 2.0, 1.0).unwrap();
        assert_eq!((r.product, r.at_quantum_floor), (6.0, true));
        assert!(uncertainty_cell_check(0.0, 1.0, 1.0).is_err());
        assert!(uncertainty_cell_check(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn family_json_schema() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let space = SpaceGrid::uniform(0.0, 0.5, 3).unwrap();
        let fam = enumerate_position_paths(grid, &space, 0.0, 1.0, 10).unwrap();
        let v = fam.to_json_value();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        assert_eq!(keys.len(), 5);
        for k in ["t_start", "t_end", "n_steps", "space", "paths"] {
            assert!(keys.contains(&k));
        }
        let back: PathFamilyFile = serde_json::from_value(v).unwrap();
        assert_eq!(back.into_family().unwrap().paths, fam.paths);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn momentum_position_round_trip(
            n_steps in 1usize..4,
            size in 1usize..5,
            dq in 0.1f64..2.0,
            mass in 0.2f64..5.0,
            duration in 0.1f64..3.0,
        ) {
            let grid = TimeGrid::new(0.0, duration, n_steps).unwrap();
            let space = SpaceGrid::uniform(-dq, dq, size).unwrap();
            let h = HamiltonianModel::free(mass).unwrap();
            let a = space.points()[0];
            let b = space.points()[size - 1];
            let fam = enumerate_position_paths(grid, &space, a, b, 10_000).unwrap();
            for q in &fam.paths {
                let p = infer_momentum_path(q, &h, &grid).unwrap();
                let back = infer_position_path(&p, &h, &grid, q.first()).unwrap();
                for (x, y) in back.values().iter().zip(q.values()) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn enumeration_is_repeatable(n_steps in 1usize..4, size in 1usize..5) {
            let grid = TimeGrid::new(0.0, 1.0, n_steps).unwrap();
            let space = SpaceGrid::uniform(0.0, 1.0, size).unwrap();
            let a = enumerate_position_paths(grid, &space, 0.0, 0.0, 1000).unwrap();
            let b = enumerate_position_paths(grid, &space, 0.0, 0.0, 1000).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

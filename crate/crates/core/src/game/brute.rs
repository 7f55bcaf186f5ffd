//! Exhaustive scan of the normalization manifold for small `n`.
//!
//! The manifold `(Σα)² + (Σβ)² = 1` is parameterized by an angle `φ` with
//! `Σα = cos φ`, `Σβ = sin φ`, plus the first `n - 1` components of each
//! vector on a uniform grid over `[-1, 1]`; the last component of each
//! vector is determined by its sum and must also land in the box. Every
//! grid point is therefore exactly normalized.
//!
//! Stationary candidates start as discrete local minima of the Lagrange
//! residual that fall below a grid-scale threshold and whose neighbours are
//! all feasible grid points. Each is then refined by a compass search on the
//! same parameterization and kept only if the residual vanishes to
//! `1e-8 max |S_jk|`; candidates that refine to the same point are merged.
//! Only interior stationary points are reported. This module deliberately keeps
//! its own residual arithmetic instead of sharing the solver's.

use rayon::prelude::*;
use serde::Serialize;

use super::{lex_cmp, GameError, MixedPathVector, OptimalPair, Result};
use crate::action::ActionMatrix;

/// Largest number of grid points the oracle will evaluate.
pub const MAX_BRUTE_FORCE_POINTS: u128 = 50_000_000;

const REFINE_LEVELS: usize = 60;
const REFINE_MOVES: usize = 200;
/// Refined candidates must reach this residual relative to `max |S_jk|`.
const ACCEPT_RELATIVE: f64 = 1e-8;
/// Refined candidates closer than this in every component are merged.
const MERGE_DISTANCE: f64 = 1e-6;
/// Values this close to the best count as ties.
const TIE_RELATIVE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceResult {
    /// Largest-value candidate; values within a relative `1e-12` are ties,
    /// broken towards the lexicographically greatest `(α, β)`.
    pub best: OptimalPair,
    /// Candidates whose value is within `1/resolution` of the best,
    /// sorted lexicographically by `(α, β)`.
    pub candidates: Vec<OptimalPair>,
    pub resolution: usize,
    pub angle_steps: usize,
    pub evaluated_points: u64,
    pub residual_threshold: f64,
}

struct Layout {
    n: usize,
    resolution: usize,
    angle_steps: usize,
    /// radices per axis: angle, then n-1 alpha axes, then n-1 beta axes
    radices: Vec<usize>,
    total: usize,
}

impl Layout {
    fn new(n: usize, resolution: usize) -> Result<Self> {
        // multiple of 8 so that φ = kπ/4 are grid angles
        let angle_steps = (resolution.max(2) - 1).div_ceil(8) * 8;
        let mut radices = vec![angle_steps];
        radices.extend(std::iter::repeat_n(resolution, 2 * (n - 1)));
        let total: u128 = radices.iter().map(|&r| r as u128).product();
        if total > MAX_BRUTE_FORCE_POINTS {
            return Err(GameError::GridTooLarge {
                points: total,
                limit: MAX_BRUTE_FORCE_POINTS,
            });
        }
        Ok(Self {
            n,
            resolution,
            angle_steps,
            radices,
            total: total as usize,
        })
    }

    fn digits(&self, mut index: usize, out: &mut [usize]) {
        for (d, &r) in out.iter_mut().zip(&self.radices).rev() {
            *d = index % r;
            index /= r;
        }
    }

    fn flat(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&d, &r)| acc * r + d)
    }

    fn component(&self, i: usize) -> f64 {
        -1.0 + 2.0 * i as f64 / (self.resolution - 1) as f64
    }

    fn coords(&self, digits: &[usize]) -> Vec<f64> {
        let mut x = vec![std::f64::consts::TAU * digits[0] as f64 / self.angle_steps as f64];
        x.extend(digits[1..].iter().map(|&i| self.component(i)));
        x
    }

    fn steps(&self) -> Vec<f64> {
        let mut h = vec![std::f64::consts::TAU / self.angle_steps as f64];
        h.extend(std::iter::repeat_n(
            2.0 / (self.resolution - 1) as f64,
            2 * (self.n - 1),
        ));
        h
    }

    /// Decodes a grid point into `(α, β)`; `None` if a dependent component
    /// leaves the box.
    fn point(&self, digits: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
        decode(self.n, &self.coords(digits))
    }
}

/// `(φ, α_1..α_{n-1}, β_1..β_{n-1})` to `(α, β)`, or `None` outside the box.
fn decode(n: usize, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let (sum_b, sum_a) = x[0].sin_cos();
    let build = |free: &[f64], total: f64| -> Option<Vec<f64>> {
        if free.iter().any(|v| v.abs() > 1.0) {
            return None;
        }
        let mut v = free.to_vec();
        let last = total - v.iter().sum::<f64>();
        if last.abs() > 1.0 + 1e-12 {
            return None;
        }
        v.push(last.clamp(-1.0, 1.0));
        Some(v)
    };
    Some((build(&x[1..n], sum_a)?, build(&x[n..], sum_b)?))
}

/// Lagrange gradient rows with the least-squares multiplier.
fn oracle_gradient(s: &ActionMatrix, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let n = s.n();
    let a: f64 = alpha.iter().sum();
    let b: f64 = beta.iter().sum();
    let mut s_beta = vec![0.0; n];
    let mut st_alpha = vec![0.0; n];
    for j in 0..n {
        for k in 0..n {
            let sjk = s.get(j, k);
            s_beta[j] += sjk * beta[k];
            st_alpha[k] += sjk * alpha[j];
        }
    }
    let num: f64 =
        s_beta.iter().map(|x| a * x).sum::<f64>() + st_alpha.iter().map(|x| b * x).sum::<f64>();
    let den = 2.0 * n as f64 * (a * a + b * b);
    let lambda = if den > 0.0 { num / den } else { 0.0 };
    s_beta
        .iter()
        .map(|x| x - 2.0 * lambda * a)
        .chain(st_alpha.iter().map(|x| x - 2.0 * lambda * b))
        .collect()
}

fn oracle_residual(s: &ActionMatrix, alpha: &[f64], beta: &[f64]) -> f64 {
    oracle_gradient(s, alpha, beta)
        .iter()
        .fold(0.0, |m, x| m.max(x.abs()))
}

fn squared_residual(s: &ActionMatrix, n: usize, x: &[f64]) -> f64 {
    match decode(n, x) {
        Some((a, b)) => oracle_gradient(s, &a, &b).iter().map(|g| g * g).sum(),
        None => f64::INFINITY,
    }
}

/// Compass search on the squared residual over the full `3^d - 1`
/// stencil, halving the step per axis when no neighbour improves.
fn refine(
    s: &ActionMatrix,
    n: usize,
    start: Vec<f64>,
    steps: &[f64],
    offsets: &[Vec<isize>],
) -> Vec<f64> {
    let mut x = start;
    let mut f = squared_residual(s, n, &x);
    let mut h = steps.to_vec();
    let mut trial = x.clone();
    for _ in 0..REFINE_LEVELS {
        if f == 0.0 {
            break;
        }
        for _ in 0..REFINE_MOVES {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for off in offsets {
                for (axis, t) in trial.iter_mut().enumerate() {
                    *t = x[axis] + off[axis] as f64 * h[axis];
                }
                let ft = squared_residual(s, n, &trial);
                if ft < best.as_ref().map_or(f, |b| b.0) {
                    best = Some((ft, trial.clone()));
                }
            }
            match best {
                Some((fb, xb)) => {
                    f = fb;
                    x = xb;
                }
                None => break,
            }
        }
        for v in &mut h {
            *v *= 0.5;
        }
    }
    x
}

fn oracle_value(s: &ActionMatrix, alpha: &[f64], beta: &[f64]) -> f64 {
    let n = s.n();
    let mut total = 0.0;
    for j in 0..n {
        for k in 0..n {
            total += alpha[j] * s.get(j, k) * beta[k];
        }
    }
    total
}

/// Exhaustive stationary-point search for `n <= 3`.
pub fn brute_force_extremum(s: &ActionMatrix, resolution: usize) -> Result<BruteForceResult> {
    let n = s.n();
    if n > 3 {
        return Err(GameError::DimensionTooLarge(n));
    }
    if !(3..=201).contains(&resolution) {
        return Err(GameError::InvalidInput(format!(
            "resolution must lie in 3..=201, got {resolution}"
        )));
    }
    if s.is_zero() {
        return Err(GameError::DegenerateMatrix);
    }
    let layout = Layout::new(n, resolution)?;
    let dims = layout.radices.len();

    let residuals: Vec<f64> = (0..layout.total)
        .into_par_iter()
        .map_init(
            || vec![0usize; dims],
            |digits, idx| {
                layout.digits(idx, digits);
                match layout.point(digits) {
                    Some((a, b)) => oracle_residual(s, &a, &b),
                    None => f64::NAN,
                }
            },
        )
        .collect();

    let max_entry = s.entries().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let step =
        (2.0 / (resolution - 1) as f64).max(std::f64::consts::TAU / layout.angle_steps as f64);
    let threshold = 4.0 * max_entry * n as f64 * step;

    let neighbour_offsets: Vec<Vec<isize>> = (0..3usize.pow(dims as u32))
        .map(|mut code| {
            (0..dims)
                .map(|_| {
                    let d = (code % 3) as isize - 1;
                    code /= 3;
                    d
                })
                .collect()
        })
        .filter(|o: &Vec<isize>| o.iter().any(|&d| d != 0))
        .collect();

    let minima: Vec<usize> = (0..layout.total)
        .into_par_iter()
        .filter(|&idx| {
            let r = residuals[idx];
            if !(r <= threshold) {
                return false;
            }
            let mut digits = vec![0usize; dims];
            layout.digits(idx, &mut digits);
            let mut other = digits.clone();
            for off in &neighbour_offsets {
                let mut valid = true;
                for axis in 0..dims {
                    let radix = layout.radices[axis] as isize;
                    let d = digits[axis] as isize + off[axis];
                    other[axis] = if axis == 0 {
                        d.rem_euclid(radix) as usize
                    } else if d < 0 || d >= radix {
                        valid = false;
                        break;
                    } else {
                        d as usize
                    };
                }
                if !valid {
                    return false;
                }
                let rn = residuals[layout.flat(&other)];
                if !(rn >= r) {
                    return false;
                }
            }
            true
        })
        .collect();

    let steps = layout.steps();
    let accept = ACCEPT_RELATIVE * max_entry;
    let refined: Vec<(Vec<f64>, Vec<f64>)> = minima
        .par_iter()
        .map(|&idx| {
            let mut digits = vec![0usize; dims];
            layout.digits(idx, &mut digits);
            let x = refine(s, n, layout.coords(&digits), &steps, &neighbour_offsets);
            decode(n, &x).filter(|(a, b)| oracle_residual(s, a, b) <= accept)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let mut refined = refined;
    refined.sort_by(|x, y| {
        lex_cmp(
            &[x.0.clone(), x.1.clone()].concat(),
            &[y.0.clone(), y.1.clone()].concat(),
        )
    });
    refined.dedup_by(|later, kept| {
        later
            .0
            .iter()
            .chain(&later.1)
            .zip(kept.0.iter().chain(&kept.1))
            .all(|(u, v)| (u - v).abs() <= MERGE_DISTANCE)
    });

    let mut candidates: Vec<OptimalPair> = Vec::with_capacity(refined.len());
    for (a, b) in refined {
        let value = oracle_value(s, &a, &b);
        let residual = oracle_residual(s, &a, &b);
        let alpha = MixedPathVector::new(a).expect("decoded point in box");
        let beta = MixedPathVector::new(b).expect("decoded point in box");
        let mut pair = OptimalPair::diagnose(alpha, beta, s)?;
        pair.value = value;
        pair.lagrange_residual = residual;
        candidates.push(pair);
    }
    if candidates.is_empty() {
        return Err(GameError::NoInteriorCandidate {
            min_residual: residuals
                .iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(f64::INFINITY, f64::min),
        });
    }
    let top = candidates
        .iter()
        .map(|p| p.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1.0 / resolution as f64;
    candidates.retain(|p| p.value >= top - tol);
    candidates.sort_by(|x, y| lex_cmp(&x.key(), &y.key()));
    let best = candidates
        .iter()
        .filter(|p| top - p.value <= TIE_RELATIVE * (1.0 + top.abs()))
        .max_by(|x, y| lex_cmp(&x.key(), &y.key()))
        .cloned()
        .expect("top value is attained");

    Ok(BruteForceResult {
        best,
        candidates,
        resolution,
        angle_steps: layout.angle_steps,
        evaluated_points: layout.total as u64,
        residual_threshold: threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn mat(rows: &[&[f64]]) -> ActionMatrix {
        ActionMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn recovers_one_by_one_extremum() {
        let r = brute_force_extremum(&mat(&[&[2.0]]), 201).unwrap();
        let a = r.best.alpha0.components()[0];
        let b = r.best.beta0.components()[0];
        assert!((a - FRAC_1_SQRT_2).abs() <= 1.0 / 201.0);
        assert!((b - FRAC_1_SQRT_2).abs() <= 1.0 / 201.0);
        assert!((r.best.value - 1.0).abs() <= 1.0 / 201.0);
        // the sign-reversed pair has the same value and is also reported
        assert_eq!(r.candidates.len(), 2);
    }

    #[test]
    fn negated_matrix_flips_beta() {
        let r = brute_force_extremum(&mat(&[&[-2.0]]), 201).unwrap();
        assert!((r.best.value - 1.0).abs() <= 1.0 / 201.0);
        let a = r.best.alpha0.components()[0];
        let b = r.best.beta0.components()[0];
        assert!(a > 0.0 && b < 0.0);
    }

    #[test]
    fn finds_negative_component_optimum() {
        let s = mat(&[&[1.0, 2.0], &[2.0, 8.0]]);
        let r = brute_force_extremum(&s, 101).unwrap();
        assert!((r.best.value - 0.4).abs() <= 2.0 / 101.0);
        assert!(r.best.alpha0.components().iter().any(|&x| x < 0.0));
        for c in &r.candidates {
            assert!((c.normalization() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn candidates_are_sorted() {
        let r = brute_force_extremum(&mat(&[&[1.0, 0.0], &[0.0, 2.0]]), 61).unwrap();
        for w in r.candidates.windows(2) {
            assert_ne!(
                lex_cmp(&w[0].key(), &w[1].key()),
                std::cmp::Ordering::Greater
            );
        }
    }

    #[test]
    fn rejects_large_inputs() {
        let s = ActionMatrix::from_rows(vec![vec![1.0; 4]; 4]).unwrap();
        assert_eq!(
            brute_force_extremum(&s, 11).unwrap_err(),
            GameError::DimensionTooLarge(4)
        );
        let s = ActionMatrix::from_rows(vec![vec![1.0; 3]; 3]).unwrap();
        assert!(matches!(
            brute_force_extremum(&s, 201),
            Err(GameError::GridTooLarge { .. })
        ));
        assert!(brute_force_extremum(&mat(&[&[1.0]]), 500).is_err());
    }

    #[test]
    fn three_by_three_balanced_matrix() {
        let s = mat(&[&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0], &[2.0, 3.0, 1.0]]);
        let r = brute_force_extremum(&s, 17).unwrap();
        // closed form 1/(2 𝟙ᵀS⁻¹𝟙) = r/(2n) with row sum 6
        assert!(
            (r.best.value - 1.0).abs() <= 2.0 / 17.0,
            "value {}",
            r.best.value
        );
    }
}

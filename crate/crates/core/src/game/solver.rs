//! Damped Gauss-Newton iteration on the Lagrange system of the generalized
//! action, with an active set for the `[-1, 1]` box.

use nalgebra::{DMatrix, DVector};

use super::{
    hessian_inertia, lagrange_multiplier, lagrange_residual, lex_cmp, ActiveBound, FreeMask,
    GameError, MixedPathVector, OptimalPair, Result, Side,
};
use crate::action::ActionMatrix;
use crate::summation::compensated_sum;

/// Perturbation applied to the first component of the default start.
pub const DEFAULT_PERTURBATION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

struct Attempt {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    lambda: f64,
    mask: FreeMask,
    residual: f64,
    iterations: usize,
    converged: bool,
}

/// Residual vector: gradient rows of free components, then the constraint.
fn system(s: &ActionMatrix, alpha: &[f64], beta: &[f64], lambda: f64, mask: &FreeMask) -> Vec<f64> {
    let n = s.n();
    let a = compensated_sum(alpha.iter().copied());
    let b = compensated_sum(beta.iter().copied());
    let sb = s.apply(beta);
    let sa = s.apply_transpose(alpha);
    let mut f = Vec::with_capacity(2 * n + 1);
    for j in 0..n {
        if mask.alpha[j] {
            f.push(sb[j] - 2.0 * lambda * a);
        }
    }
    for k in 0..n {
        if mask.beta[k] {
            f.push(sa[k] - 2.0 * lambda * b);
        }
    }
    f.push(a * a + b * b - 1.0);
    f
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn jacobian(
    s: &ActionMatrix,
    alpha: &[f64],
    beta: &[f64],
    lambda: f64,
    mask: &FreeMask,
) -> DMatrix<f64> {
    let n = s.n();
    let a = compensated_sum(alpha.iter().copied());
    let b = compensated_sum(beta.iter().copied());
    let free_a: Vec<usize> = (0..n).filter(|&j| mask.alpha[j]).collect();
    let free_b: Vec<usize> = (0..n).filter(|&k| mask.beta[k]).collect();
    let rows = free_a.len() + free_b.len() + 1;
    let cols = free_a.len() + free_b.len() + 1;
    let lam_col = cols - 1;
    let mut jac = DMatrix::zeros(rows, cols);
    // rows for ∂L/∂α_j = (Sβ)_j - 2λa
    for (r, &j) in free_a.iter().enumerate() {
        for c in 0..free_a.len() {
            jac[(r, c)] = -2.0 * lambda;
        }
        for (c, &k) in free_b.iter().enumerate() {
            jac[(r, free_a.len() + c)] = s.get(j, k);
        }
        jac[(r, lam_col)] = -2.0 * a;
    }
    // rows for ∂L/∂β_k = (Sᵀα)_k - 2λb
    for (r, &k) in free_b.iter().enumerate() {
        let r = free_a.len() + r;
        for (c, &j) in free_a.iter().enumerate() {
            jac[(r, c)] = s.get(j, k);
        }
        for c in 0..free_b.len() {
            jac[(r, free_a.len() + c)] = -2.0 * lambda;
        }
        jac[(r, lam_col)] = -2.0 * b;
    }
    let last = rows - 1;
    for c in 0..free_a.len() {
        jac[(last, c)] = 2.0 * a;
    }
    for c in 0..free_b.len() {
        jac[(last, free_a.len() + c)] = 2.0 * b;
    }
    jac
}

fn apply_step(
    alpha: &mut [f64],
    beta: &mut [f64],
    lambda: &mut f64,
    mask: &FreeMask,
    step: &[f64],
    t: f64,
) {
    let mut i = 0;
    for (j, x) in alpha.iter_mut().enumerate() {
        if mask.alpha[j] {
            *x += t * step[i];
            i += 1;
        }
    }
    for (k, x) in beta.iter_mut().enumerate() {
        if mask.beta[k] {
            *x += t * step[i];
            i += 1;
        }
    }
    *lambda += t * step[i];
}

fn newton(s: &ActionMatrix, alpha0: &[f64], beta0: &[f64], opts: &SolverOptions) -> Attempt {
    let n = s.n();
    let mut alpha = alpha0.to_vec();
    let mut beta = beta0.to_vec();
    let mut mask = FreeMask::all(n);
    let mut lambda = lagrange_multiplier(&alpha, &beta, s, None);
    let mut iterations = 0;
    let mut converged = false;

    // each round either converges inside the box or pins at least one more component
    for _round in 0..=2 * n {
        converged = false;
        let mut f = system(s, &alpha, &beta, lambda, &mask);
        while iterations < opts.max_iter {
            if max_abs(&f) <= opts.tol {
                converged = true;
                break;
            }
            iterations += 1;
            let jac = jacobian(s, &alpha, &beta, lambda, &mask);
            let rhs = DVector::from_iterator(f.len(), f.iter().map(|x| -x));
            let svd = jac.svd(true, true);
            let eps = 1e-14 * svd.singular_values.max().max(1.0);
            let Ok(step) = svd.solve(&rhs, eps) else {
                break;
            };
            let step: Vec<f64> = step.iter().copied().collect();
            let f_norm = norm2(&f);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let (mut a2, mut b2, mut l2) = (alpha.clone(), beta.clone(), lambda);
                apply_step(&mut a2, &mut b2, &mut l2, &mask, &step, t);
                let f2 = system(s, &a2, &b2, l2, &mask);
                if norm2(&f2) < f_norm || max_abs(&f2) <= opts.tol {
                    alpha = a2;
                    beta = b2;
                    lambda = l2;
                    f = f2;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if !converged {
            break;
        }
        let mut pinned = false;
        for (j, x) in alpha.iter_mut().enumerate() {
            if mask.alpha[j] && x.abs() > 1.0 {
                *x = x.signum();
                mask.alpha[j] = false;
                pinned = true;
            }
        }
        for (k, x) in beta.iter_mut().enumerate() {
            if mask.beta[k] && x.abs() > 1.0 {
                *x = x.signum();
                mask.beta[k] = false;
                pinned = true;
            }
        }
        if !pinned {
            break;
        }
        if mask.alpha.iter().chain(&mask.beta).all(|f| !f) {
            converged = false;
            break;
        }
    }

    // the constraint holds to `tol`; rescale so it holds to rounding
    let norm = {
        let a = compensated_sum(alpha.iter().copied());
        let b = compensated_sum(beta.iter().copied());
        (a * a + b * b).sqrt()
    };
    if norm > 0.0 && norm.is_finite() {
        for x in alpha.iter_mut().chain(beta.iter_mut()) {
            *x = (*x / norm).clamp(-1.0, 1.0);
        }
    }
    let residual = lagrange_residual(&alpha, &beta, s, lambda, Some(&mask))
        .max((norm * norm - 1.0).abs().min(f64::MAX));
    Attempt {
        alpha,
        beta,
        lambda,
        mask,
        residual: if residual.is_finite() {
            residual
        } else {
            f64::INFINITY
        },
        iterations,
        converged: converged && residual.is_finite(),
    }
}

fn finish(s: &ActionMatrix, attempt: Attempt) -> OptimalPair {
    let clamp = |v: Vec<f64>| {
        MixedPathVector::new(
            v.into_iter()
                .map(|x| {
                    if x.is_finite() {
                        x.clamp(-1.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
        .expect("clamped components lie in the box")
    };
    let alpha = clamp(attempt.alpha);
    let beta = clamp(attempt.beta);
    let mut pair = OptimalPair::diagnose(alpha, beta, s).expect("dimensions agree");
    let mut active = Vec::new();
    for (j, &free) in attempt.mask.alpha.iter().enumerate() {
        if !free {
            active.push(ActiveBound {
                vector: Side::Alpha,
                index: j,
                upper: pair.alpha0.components()[j] > 0.0,
            });
        }
    }
    for (k, &free) in attempt.mask.beta.iter().enumerate() {
        if !free {
            active.push(ActiveBound {
                vector: Side::Beta,
                index: k,
                upper: pair.beta0.components()[k] > 0.0,
            });
        }
    }
    pair.multiplier = attempt.lambda;
    pair.lagrange_residual = lagrange_residual(
        pair.alpha0.components(),
        pair.beta0.components(),
        s,
        attempt.lambda,
        Some(&attempt.mask),
    );
    pair.inertia = Some(hessian_inertia(
        pair.alpha0.components(),
        pair.beta0.components(),
        attempt.lambda,
        s,
        Some(&attempt.mask),
    ));
    pair.active_bounds = active;
    pair.iterations = attempt.iterations;
    pair
}

fn default_starts(n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let c = 1.0 / (n as f64 * std::f64::consts::SQRT_2);
    let mut alpha = vec![c; n];
    alpha[0] += DEFAULT_PERTURBATION;
    let beta = vec![c; n];
    let flipped: Vec<f64> = beta.iter().map(|x| -x).collect();
    vec![(alpha.clone(), beta), (alpha, flipped)]
}

/// Stationary point of `αᵀ S β` subject to `(Σα)² + (Σβ)² = 1`.
///
/// With `init = None` the iteration is started from the uniform pair
/// (first α component perturbed by [`DEFAULT_PERTURBATION`]) and from the
/// same start with β negated; among the converged results the one with
/// the largest value is returned, ties going to the lexicographically
/// greatest `(α, β)`. The residual is an absolute max-norm.
pub fn solve_stationary_numeric(
    s: &ActionMatrix,
    init: Option<&OptimalPair>,
    tol: f64,
    max_iter: usize,
) -> Result<OptimalPair> {
    if !(tol > 0.0) {
        return Err(GameError::InvalidInput(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if s.is_zero() {
        return Err(GameError::DegenerateMatrix);
    }
    let opts = SolverOptions { tol, max_iter };
    let starts = match init {
        Some(p) => {
            if p.n() != s.n() {
                return Err(GameError::DimensionMismatch(format!(
                    "initial pair has {} components, matrix is {}x{}",
                    p.n(),
                    s.n(),
                    s.n()
                )));
            }
            vec![(
                p.alpha0.components().to_vec(),
                p.beta0.components().to_vec(),
            )]
        }
        None => default_starts(s.n()),
    };
    let attempts: Vec<Attempt> = starts.iter().map(|(a, b)| newton(s, a, b, &opts)).collect();
    let total_iters: usize = attempts.iter().map(|a| a.iterations).sum();

    let mut converged: Vec<OptimalPair> = Vec::new();
    let mut best_failed: Option<(f64, OptimalPair)> = None;
    for attempt in attempts {
        let ok = attempt.converged;
        let residual = attempt.residual;
        let pair = finish(s, attempt);
        if ok
            && pair.lagrange_residual <= tol
            && (pair.normalization() - 1.0).abs() <= super::NORMALIZATION_TOL
        {
            converged.push(pair);
        } else if best_failed.as_ref().is_none_or(|(r, _)| residual < *r) {
            best_failed = Some((residual, pair));
        }
    }
    let best = converged.into_iter().max_by(|x, y| {
        x.value
            .total_cmp(&y.value)
            .then_with(|| lex_cmp(&x.key(), &y.key()))
    });
    match best {
        Some(mut pair) => {
            pair.iterations = total_iters;
            Ok(pair)
        }
        None => {
            let (residual, pair) = best_failed.expect("at least one start");
            Err(GameError::NoConvergence {
                iterations: total_iters,
                residual,
                best: Box::new(pair),
            })
        }
    }
}

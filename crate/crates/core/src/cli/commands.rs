use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::action::{
    build_action_matrix_capped, discrete_action_s, ActionMatrix, HamiltonianModel,
};
use crate::amplitude::{
    self, amplitudes_from_pair, compose_propagators, lattice_propagator, propagator_table_csv,
    propagator_table_json, KernelTable, Propagator, PropagatorRow,
};
use crate::game::{
    brute_force_extremum, solve_stationary_numeric, uniform_stationary_pair, GameError, OptimalPair,
};
use crate::grassmann::identity_suite;
use crate::lattice::{
    enumerate_position_paths_with, infer_momentum_path, uncertainty_cell_check, EnumerationOptions,
    PathFamily, PositionPathEnumerator,
};
use crate::reference::{self, brute_force_path_sum, OracleResult, QuadraticKernel};

use super::{CliError, Command, Context, Outputs};

pub fn dispatch(command: Command, ctx: &Context, out: &mut Outputs) -> Result<String, CliError> {
    match command {
        Command::Enumerate => enumerate(ctx, out),
        Command::ActionMatrix => action_matrix(ctx, out),
        Command::Solve => solve(ctx, out),
        Command::Propagate => propagate(ctx, out),
        Command::Compare => compare(ctx, out),
        Command::FermionCheck { force_fail } => fermion_check(ctx, out, force_fail),
        Command::Compose => compose(ctx, out),
    }
}

fn family(ctx: &Context) -> Result<PathFamily, CliError> {
    let c = &ctx.config;
    let opts = EnumerationOptions {
        cap: c.limits.path_cap,
        hop_limit: c.hop_limit,
    };
    Ok(enumerate_position_paths_with(
        c.time_grid()?,
        &c.space_grid()?,
        c.endpoints.q_i,
        c.endpoints.q_f,
        &opts,
    )?)
}

/// Number of distinct prefixes through each interior node.
fn fan_out(fam: &PathFamily) -> Vec<usize> {
    let interior = fam.grid.n_steps() - 1;
    let mut counts = vec![0usize; interior];
    let mut prev: Option<&[f64]> = None;
    for p in &fam.paths {
        let v = &p.values()[1..=interior];
        let first_diff = match prev {
            None => 0,
            Some(q) => v
                .iter()
                .zip(q)
                .position(|(a, b)| a.to_bits() != b.to_bits())
                .unwrap_or(interior),
        };
        for c in &mut counts[first_diff..] {
            *c += 1;
        }
        prev = Some(v);
    }
    counts
}

fn enumerate(ctx: &Context, out: &mut Outputs) -> Result<String, CliError> {
    let c = &ctx.config;
    ctx.config.enumerator()?.ensure_within(c.limits.path_cap)?;
    let fam = family(ctx)?;
    out.write_json("paths.json", &fam.to_json_value())?;

    let grid = fam.grid;
    let space = c.space_grid()?;
    let mut s = String::new();
    let _ = writeln!(s, "paths: {}", fam.len());
    let _ = writeln!(s, "time steps: {} (dt = {})", grid.n_steps(), grid.dt());
    let _ = writeln!(s, "space points: {} (dq = {})", space.len(), space.dq());
    let _ = writeln!(s, "fan-out:");
    for (k, n) in fan_out(&fam).iter().enumerate() {
        let _ = writeln!(
            s,
            "  node {} (t = {}): {} prefixes",
            k + 1,
            grid.node_time(k + 1),
            n
        );
    }
    if space.dq() > 0.0 {
        let dp = c.hamiltonian.mass() * space.dq() / grid.dt();
        let cell = uncertainty_cell_check(dp, space.dq(), c.hbar)?;
        let _ = writeln!(
            s,
            "phase-space cell: dp*dq = {} ({} hbar)",
            cell.product,
            if cell.at_quantum_floor { ">=" } else { "<" }
        );
    }
    Ok(s)
}

fn build_matrix(ctx: &Context, fam: &PathFamily) -> Result<ActionMatrix, CliError> {
    let c = &ctx.config;
    Ok(build_action_matrix_capped(
        fam,
        &c.hamiltonian,
        &fam.grid,
        c.limits.matrix_cap,
    )?)
}

#[derive(Serialize)]
struct EntryCheck {
    entries: usize,
    mismatches: usize,
    max_abs_diff: f64,
}

/// Serial per-entry recomputation of `S_jk`.
fn recompute_entries(
    fam: &PathFamily,
    h: &HamiltonianModel,
    m: &ActionMatrix,
) -> Result<EntryCheck, CliError> {
    let n = fam.len();
    let mut check = EntryCheck {
        entries: n * n,
        mismatches: 0,
        max_abs_diff: 0.0,
    };
    for j in 0..n {
        let p = infer_momentum_path(&fam.paths[j], h, &fam.grid)?;
        for k in 0..n {
            let v = discrete_action_s(&p, &fam.paths[k], h, &fam.grid)?.value;
            let got = m.get(j, k);
            if v.to_bits() != got.to_bits() {
                check.mismatches += 1;
            }
            check.max_abs_diff = check.max_abs_diff.max((v - got).abs());
        }
    }
    Ok(check)
}

fn action_matrix(ctx: &Context, out: &mut Outputs) -> Result<String, CliError> {
    let fam = family(ctx)?;
    let m = build_matrix(ctx, &fam)?;
    out.write("action_matrix.csv", &m.to_csv())?;
    let mut diag = String::from("path,action\n");
    for (j, d) in m.diagonal().iter().enumerate() {
        let _ = writeln!(diag, "{j},{d}");
    }
    out.write("action_diagonal.csv", &diag)?;

    let mut s = String::new();
    let _ = writeln!(s, "action matrix {}x{}", m.n(), m.n());
    s.push_str(&m.summary());
    if m.extrapolated() {
        let _ = writeln!(s, "warning: potential table evaluated outside its range");
    }
    let (argmin, min) =
        m.diagonal()
            .into_iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (j, d)| if d < acc.1 { (j, d) } else { acc },
            );
    let _ = writeln!(s, "least diagonal action: path {argmin}, S = {min}");
    if ctx.oracle {
        let check = recompute_entries(&fam, &ctx.config.hamiltonian, &m)?;
        out.write_json("action_matrix_oracle.json", &check)?;
        let _ = writeln!(
            s,
            "oracle: {} entries recomputed, {} mismatches, max |diff| = {}",
            check.entries, check.mismatches, check.max_abs_diff
        );
        if check.mismatches > 0 {
            return Err(CliError::CheckFailed(format!(
                "{} matrix entries differ",
                check.mismatches
            )));
        }
    }
    Ok(s)
}

fn diagnostics_csv(pair: &OptimalPair) -> String {
    let mut t = String::from("path,alpha,beta,probability,abs_phi,theta\n");
    for (j, a) in amplitudes_from_pair(pair).iter().enumerate() {
        let _ = writeln!(
            t,
            "{j},{},{},{},{},{}",
            a.phi.re,
            a.phi.im,
            a.modulus_squared(),
            a.magnitude,
            a.theta
        );
    }
    t
}

fn describe_pair(s: &mut String, label: &str, p: &OptimalPair) {
    let _ = writeln!(s, "{label}:");
    let _ = writeln!(s, "  alpha0 = {:?}", p.alpha0.components());
    let _ = writeln!(s, "  beta0 = {:?}", p.beta0.components());
    let _ = writeln!(s, "  value = {}", p.value);
    let _ = writeln!(s, "  lagrange residual = {}", p.lagrange_residual);
    match p.parallelism_angle {
        Some(a) => {
            let _ = writeln!(s, "  parallelism angle = {a} rad");
        }
        None => {
            let _ = writeln!(s, "  parallelism angle undefined (S beta0 = 0)");
        }
    }
    if let Some(i) = p.inertia {
        let _ = writeln!(
            s,
            "  hessian inertia (+, -, 0) = ({}, {}, {})",
            i.positive, i.negative, i.zero
        );
    }
    if !p.active_bounds.is_empty() {
        let _ = writeln!(s, "  active bounds = {}", p.active_bounds.len());
    }
}

fn solve(ctx: &Context, out: &mut Outputs) -> Result<String, CliError> {
    let c = &ctx.config;
    let m = match c.supplied_matrix()? {
        Some(m) => m,
        None => build_matrix(ctx, &family(ctx)?)?,
    };
    out.write("action_matrix.csv", &m.to_csv())?;
    let mut s = String::new();
    let _ = writeln!(s, "matrix {}x{}", m.n(), m.n());
    let uniform = uniform_stationary_pair(&m);
    out.write_json("uniform_pair.json", &uniform)?;
    describe_pair(&mut s, "uniform pair", &uniform);

    let pair = match solve_stationary_numeric(&m, None, c.solver.tol, c.solver.max_iter) {
        Ok(p) => p,
        Err(GameError::NoConvergence {
            iterations,
            residual,
            best,
        }) => {
            out.write_json("solution.json", &*best)?;
            describe_pair(&mut s, "best iterate (not converged)", &best);
            out.write("solve-summary.txt", &s)?;
            return Err(CliError::NoConvergence(format!(
                "residual {residual} after {iterations} iterations"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    out.write_json("solution.json", &pair)?;
    out.write("diagnostics.csv", &diagnostics_csv(&pair))?;
    describe_pair(&mut s, "numeric solution", &pair);
    let _ = writeln!(s, "  iterations = {}", pair.iterations);

    if ctx.oracle {
        let res = c.solver.brute_force_resolution;
        let b = brute_force_extremum(&m, res)?;
        out.write_json("brute_force.json", &b)?;
        describe_pair(&mut s, "brute-force best", &b.best);
        let diff = (pair.value - b.best.value).abs();
        let tol = 2.0 / res as f64;
        let _ = writeln!(
            s,
            "oracle: {} candidates at resolution {res}, |value diff| = {diff} (tolerance {tol})",
            b.candidates.len()
        );
        if !(diff <= tol) {
            return Err(CliError::CheckFailed(format!(
                "solver value differs from oracle by {diff}"
            )));
        }
    }
    Ok(s)
}

struct Comparison {
    rel_modulus_error: f64,
    phase_error: f64,
}

fn compare_to(k: Complex64, oracle: Complex64) -> Comparison {
    Comparison {
        rel_modulus_error: (k.norm() - oracle.norm()).abs() / oracle.norm(),
        phase_error: (k / oracle).arg().abs(),
    }
}

fn analytic_oracle(
    c: &super::ExperimentConfig,
    q_i: f64,
    q_f: f64,
    duration: f64,
) -> Result<Option<OracleResult>, CliError> {
    Ok(match c.hamiltonian {
        HamiltonianModel::Free { mass } => Some(reference::analytic_free_propagator(
            mass, c.hbar, q_i, q_f, duration,
        )?),
        HamiltonianModel::Harmonic { mass, omega } => Some(
            reference::analytic_harmonic_propagator(mass, omega, c.hbar, q_i, q_f, duration)?,
        ),
        HamiltonianModel::Tabulated { .. } => None,
    })
}

fn row(q_i: f64, q_f: f64, k: Complex64) -> PropagatorRow {
    PropagatorRow { q_i, q_f, k }
}

fn brute_force(ctx: &Context, source: &PositionPathEnumerator) -> Result<OracleResult, CliError> {
    let c = &ctx.config;
    if c.hop_limit.is_some() {
        return Err(CliError::Config(
            "the brute-force oracle does not apply a hop limit".into(),
        ));
    }
    Ok(brute_force_path_sum(
        source.grid(),
        source.space(),
        &c.hamiltonian,
        c.endpoints.q_i,
        c.endpoints.q_f,
        c.hbar,
        c.limits.path_cap,
    )?)
}

fn propagate(ctx: &Context, out: &mut Outputs) -> Result<String, CliError> {
    let c = &ctx.config;
    let source = c.enumerator()?;
    let grid = *source.grid();
    let analytic = analytic_oracle(c, c.endpoints.q_i, c.endpoints.q_f, grid.duration())?;
    source.ensure_within(c.limits.path_cap)?;
    let k: Propagator = lattice_propagator(
        &source,
        &c.hamiltonian,
        c.hbar,
        c.phase_constant,
        c.limits.path_cap,
    )?;
    let (q_i, q_f) = source.endpoints();
    let rows = [row(q_i, q_f, k.k)];
    out.write("propagator.csv", &propagator_table_csv(&rows))?;
    out.write_json(
        "propagator.json",
        &serde_json::json!({
            "table": propagator_table_json(&rows, "lattice-pipeline", k.grid.as_ref()),
            "propagator": k,
            "phase_constant": c.phase_constant.label(),
        }),
    )?;

    let brute = if ctx.oracle || analytic.is_none() {
        Some(brute_force(ctx, &source)?)
    } else {
        None
    };
    let oracle = analytic
        .as_ref()
        .or(brute.as_ref())
        .expect("an oracle is always chosen");
    let method = serde_json::to_value(oracle.method).expect("method serializes");
    let method = method.as_str().unwrap_or("oracle");
    let orows = [row(q_i, q_f, oracle.k)];
    out.write("oracle.csv", &propagator_table_csv(&orows))?;
    out.write_json(
        "oracle.json",
        &serde_json::json!({
            "table": propagator_table_json(&orows, method, k.grid.as_ref()),
            "oracle": oracle,
        }),
    )?;

    let cmp = compare_to(k.k, oracle.k);
    let mut report = serde_json::json!({
        "oracle_method": method,
        "phase_constant": c.phase_constant.label(),
        "normalization": k.normalization,
        "paths": k.n_paths,
        "magnitude_a": k.magnitude,
        "rel_modulus_error": cmp.rel_modulus_error,
        "phase_error_rad": cmp.phase_error,
    });
    let mut s = String::new();
    let _ = writeln!(s, "paths: {}", k.n_paths);
    let _ = writeln!(
        s,
        "phase constant: {} (kappa = {})",
        c.phase_constant.label(),
        k.kappa
    );
    let _ = writeln!(s, "normalization a = {}", k.magnitude);
    let _ = writeln!(
        s,
        "pipeline K = {} (|K| = {}, arg K = {})",
        k.k,
        k.k.norm(),
        k.k.arg()
    );
    let _ = writeln!(
        s,
        "{method} K = {} (|K| = {}, arg K = {})",
        oracle.k,
        oracle.k.norm(),
        oracle.k.arg()
    );
    let _ = writeln!(s, "relative modulus error = {}", cmp.rel_modulus_error);
    let _ = writeln!(s, "phase error = {} rad", cmp.phase_error);
    if let (Some(b), Some(_)) = (&brute, &analytic) {
        let rel = (k.k - b.k).norm() / b.k.norm();
        report["brute_force_rel_diff"] = serde_json::json!(rel);
        let _ = writeln!(
            s,
            "brute-force K = {} (relative difference to pipeline {rel})",
            b.k
        );
    }
    out.write_json("comparison.json", &report)?;
    Ok(s)
}

fn compare(ctx: &Context, out: &mut Outputs) -> Result<String, CliError> {
    let c = &ctx.config;
    let grid = c.time_grid()?;
    let (q_i, q_f) = (c.endpoints.q_i, c.endpoints.q_f);
    let oracle = analytic_oracle(c, q_i, q_f, grid.duration())?
        .ok_or_else(|| CliError::Config("compare needs a free or harmonic hamiltonian".into()))?;
    let levels_cfg = &c.compare;
    let mut sources = Vec::with_capacity(levels_cfg.levels);
    for level in 0..levels_cfg.levels {
        let divisor = levels_cfg.base_spacing_divisor * f64::powi(2.0, level as i32);
        let space = c.oracle_space(grid.duration(), levels_cfg.extent_sigma, divisor)?;
        let source = PositionPathEnumerator::new(grid, space, q_i, q_f, c.hop_limit)?;
        source.ensure_within(c.limits.path_cap)?;
        sources.push(source);
    }
    let mut csv = String::from(
        "level,dq,space_points,paths,re_k,im_k,abs_k,arg_k,rel_modulus_error,phase_error\n",
    );
    let mut s = String::new();
    let _ = writeln!(s, "oracle K = {} (|K| = {})", oracle.k, oracle.k.norm());
    let mut errors = Vec::new();
    for (level, source) in sources.iter().enumerate() {
        let k = lattice_propagator(
            source,
            &c.hamiltonian,
            c.hbar,
            c.phase_constant,
            c.limits.path_cap,
        )?;
        let cmp = compare_to(k.k, oracle.k);
        let dq = source.space().dq();
        let _ = writeln!(
            csv,
            "{level},{dq},{},{},{},{},{},{},{},{}",
            source.space().len(),
            k.n_paths,
            k.k.re,
            k.k.im,
            k.k.norm(),
            k.k.arg(),
            cmp.rel_modulus_error,
            cmp.phase_error
        );
        let _ = writeln!(
            s,
            "level {level}: dq = {dq}, paths = {}, modulus error = {}, phase error = {}",
            k.n_paths, cmp.rel_modulus_error, cmp.phase_error
        );
        errors.push((k.k - oracle.k).norm() / oracle.k.norm());
    }
    for w in errors.windows(2) {
        if w[0] > 0.0 && w[1] > 0.0 {
            let _ = writeln!(s, "observed order: {}", (w[0] / w[1]).log2());
        }
    }
    out.write("compare.csv", &csv)?;
    Ok(s)
}

fn fermion_check(ctx: &Context, out: &mut Outputs, force_fail: bool) -> Result<String, CliError> {
    let f = ctx.config.fermion;
    let checks = identity_suite(
        f.n_generators,
        f.exhaustive_n,
        f.draws,
        ctx.config.seed,
        force_fail,
    )?;
    out.write_json(
        "fermion_check.json",
        &serde_json::json!({
            "n_generators": f.n_generators,
            "exhaustive_n": f.exhaustive_n,
            "draws": f.draws,
            "seed": ctx.config.seed,
            "checks": checks.iter().map(|c| serde_json::json!({
                "name": c.name, "cases": c.cases, "failures": c.failures, "passed": c.passed(),
            })).collect::<Vec<_>>(),
        }),
    )?;
    let mut s = String::new();
    for c in &checks {
        let _ = writeln!(
            s,
            "{:<26} {:>8} cases  {}",
            c.name,
            c.cases,
            if c.passed() {
                "pass".to_string()
            } else {
                format!("FAIL ({})", c.failures)
            }
        );
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(s)
    } else {
        out.write("fermion-check-summary.txt", &s)?;
        Err(CliError::CheckFailed(failed.join(", ")))
    }
}

fn quadratic_kernel(
    c: &super::ExperimentConfig,
    duration: f64,
) -> Result<QuadraticKernel, CliError> {
    match c.hamiltonian {
        HamiltonianModel::Free { mass } => Ok(QuadraticKernel::free(mass, c.hbar, duration)?),
        HamiltonianModel::Harmonic { mass, omega } => {
            Ok(QuadraticKernel::harmonic(mass, omega, c.hbar, duration)?)
        }
        HamiltonianModel::Tabulated { .. } => Err(CliError::Config(
            "compose needs a free or harmonic hamiltonian".into(),
        )),
    }
}

fn compose(ctx: &Context, out: &mut Outputs) -> Result<String, CliError> {
    let c = &ctx.config;
    let grid = c.time_grid()?;
    let t_mid = c
        .compose
        .t_split
        .unwrap_or(0.5 * (grid.t_start() + grid.t_end()));
    let (t1, t2) = (t_mid - grid.t_start(), grid.t_end() - t_mid);
    let left = quadratic_kernel(c, t1)?;
    let right = quadratic_kernel(c, t2)?;
    let full = quadratic_kernel(c, grid.duration())?;
    let mid = c.oracle_space(
        grid.duration(),
        c.compose.extent_sigma,
        c.compose.spacing_divisor,
    )?;
    let (q_i, q_f) = (c.endpoints.q_i, c.endpoints.q_f);

    let lt = KernelTable::from_fn(&[q_i], mid.points(), |x, y| left.eval(x, y));
    let rt = KernelTable::from_fn(mid.points(), &[q_f], |x, y| right.eval(x, y));
    let discrete = compose_propagators(&lt, &rt, &mid, Complex64::new(mid.dq(), 0.0))?.get(0, 0);
    let continuum = left.compose(&right)?.eval(q_i, q_f);
    let exact = full.eval(q_i, q_f);

    let rows = [
        row(q_i, q_f, discrete),
        row(q_i, q_f, continuum),
        row(q_i, q_f, exact),
    ];
    let mut csv = String::from("method,");
    let table = propagator_table_csv(&rows);
    let mut lines = table.lines();
    csv.push_str(lines.next().unwrap_or_default());
    csv.push('\n');
    for (name, line) in ["discrete", "continuum", "analytic"].iter().zip(lines) {
        let _ = writeln!(csv, "{name},{line}");
    }
    out.write("compose.csv", &csv)?;
    let d_err = (discrete - exact).norm() / exact.norm();
    let c_err = (continuum - exact).norm() / exact.norm();
    out.write_json(
        "compose.json",
        &serde_json::json!({
            "t_split": t_mid,
            "intermediate_points": mid.len(),
            "dq": mid.dq(),
            "discrete_rel_error": d_err,
            "continuum_rel_error": c_err,
            "table": amplitude::propagator_table_json(&rows, "composition", None),
        }),
    )?;
    let mut s = String::new();
    let _ = writeln!(s, "split at t = {t_mid} ({t1} + {t2})");
    let _ = writeln!(
        s,
        "intermediate grid: {} points, dq = {}",
        mid.len(),
        mid.dq()
    );
    let _ = writeln!(s, "analytic K = {exact}");
    let _ = writeln!(
        s,
        "discrete composition K = {discrete} (relative error {d_err})"
    );
    let _ = writeln!(
        s,
        "continuum composition K = {continuum} (relative error {c_err})"
    );
    Ok(s)
}

//! The `solve`, `sweep-hbar`, `scaling` and `compare` commands.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gham::baselines::{newton_solve, sham_solve, NewtonRun, SHAM_SOFT_LIMIT};
use gham::ham::{minimize_curve, optimize_hbar, GhamSolver, HamConfig, HamRun, HbarSweep, Stop};
use gham::problem::{AuxTag, NonlinearBvp};
use gham::spectral::{cheb_points, ChebCoeffs};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, Hbar, ProblemSpec, SolverKind};
use crate::fit::{loglog_fit, median, FitError, ScalingFit};
use crate::record::{ham_records, newton_records, write_csv, BenchRecord};

/// Beyond this SHAM's dense matrices are not attempted in sweeps.
pub const SHAM_DENSE_CAP: usize = 4 * SHAM_SOFT_LIMIT;

#[derive(Debug, thiserror::Error)]
pub enum CmdError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(#[from] gham::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Fit(#[from] FitError),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Solver(gham::Error::ResolutionTooLow { .. } | gham::Error::MaxIterations(_)) => 2,
            CmdError::Solver(gham::Error::Divergence { .. } | gham::Error::NoConvergentHbar { .. }) => 3,
            _ => 1,
        }
    }
}

/// How a solve ended; maps onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIterations,
    Diverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::MaxIterations => 2,
            Status::Diverged => 3,
        }
    }
}

fn run_id(command: &str, seed: u64, index: usize) -> String {
    format!("{command}-{seed}-{index}")
}

fn out_file(out: &Path, name: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    Ok(out.join(name))
}

fn problem_label(spec: &ProblemSpec) -> String {
    if spec.problem.is_some() {
        spec.name.clone()
    } else {
        format!("{} (alpha = {}, Re = {})", spec.name, spec.params.alpha, spec.params.re)
    }
}

/// Result of one solver at one resolution.
#[derive(Debug, Clone)]
pub enum SolverRun {
    Ham(HamRun),
    Newton(NewtonRun),
}

impl SolverRun {
    pub fn solution(&self) -> &ChebCoeffs {
        match self {
            SolverRun::Ham(r) => r.solution(),
            SolverRun::Newton(r) => &r.solution,
        }
    }

    pub fn final_residual(&self) -> f64 {
        match self {
            SolverRun::Ham(r) => r.final_residual(),
            SolverRun::Newton(r) => r.final_residual(),
        }
    }

    pub fn best_residual(&self) -> f64 {
        match self {
            SolverRun::Ham(r) => r.best_residual(),
            SolverRun::Newton(r) => r.residual_trace.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            SolverRun::Ham(r) => r.state.iterations_done,
            SolverRun::Newton(r) => r.steps(),
        }
    }

    pub fn hbar(&self) -> Option<f64> {
        match self {
            SolverRun::Ham(r) => Some(r.hbar),
            SolverRun::Newton(_) => None,
        }
    }

    pub fn status(&self) -> Status {
        match self {
            SolverRun::Ham(r) => match r.stop {
                Stop::Converged => Status::Converged,
                Stop::MaxIterations => Status::MaxIterations,
                Stop::Diverged { .. } => Status::Diverged,
            },
            SolverRun::Newton(r) if r.converged => Status::Converged,
            SolverRun::Newton(_) => Status::MaxIterations,
        }
    }

    pub fn records(&self, run_id: &str, solver: SolverKind, aux: AuxTag, n: usize) -> Vec<BenchRecord> {
        match self {
            SolverRun::Ham(r) => ham_records(run_id, solver.tag(), &aux.to_string(), n, r),
            SolverRun::Newton(r) => newton_records(run_id, n, r),
        }
    }
}

/// Rejects resolutions too coarse for the problem's order before any
/// operator is built.
pub fn check_resolution(p: &NonlinearBvp, n: usize) -> Result<(), CmdError> {
    let order = p.order();
    if n < order + 2 {
        return Err(gham::Error::ResolutionTooLow { n, order }.into());
    }
    Ok(())
}

/// The sampling plan for automatic `ħ`.
pub fn hbar_sweep(spec: &ProblemSpec) -> HbarSweep {
    HbarSweep {
        range: (spec.sweep.range[0], spec.sweep.range[1]),
        samples: spec.sweep.samples,
        probe_iterations: spec.sweep.probe_iterations,
        ..HbarSweep::default()
    }
}

/// `ħ` for a homotopy solve at resolution `n`; automatic values are tuned
/// on GHAM with the spec's auxiliary operator.
pub fn resolve_hbar(spec: &ProblemSpec, p: &NonlinearBvp, n: usize) -> Result<f64, CmdError> {
    check_resolution(p, n)?;
    match spec.hbar {
        Hbar::Fixed(h) => Ok(h),
        Hbar::Auto => {
            let aux = spec.aux.resolve(p, n)?;
            let solver = GhamSolver::new(p, &aux, n)?;
            let (h, _) = optimize_hbar(&solver, &hbar_sweep(spec))?;
            info!("tuned hbar = {h:.6} at n = {n}");
            Ok(h)
        }
    }
}

/// One untimed-overhead run of `solver`. Building the auxiliary operator,
/// including the reference solve of `L4`, counts as setup.
pub fn run_solver(
    solver: SolverKind,
    p: &NonlinearBvp,
    aux: AuxTag,
    n: usize,
    hbar: f64,
    max_iterations: usize,
    tolerance: f64,
) -> Result<SolverRun, CmdError> {
    check_resolution(p, n)?;
    if solver == SolverKind::Newton {
        return Ok(SolverRun::Newton(newton_solve(p, n, tolerance, max_iterations)?));
    }
    let t = Instant::now();
    let op = aux.resolve(p, n)?;
    let resolve = t.elapsed();
    let mut run = match solver {
        SolverKind::Gham => GhamSolver::new(p, &op, n)?.run(hbar, max_iterations, tolerance)?,
        _ => {
            // SHAM requires a positive tolerance
            let cfg = HamConfig::new(n, hbar, max_iterations, tolerance.max(f64::MIN_POSITIVE))?;
            sham_solve(p, &op, &cfg)?
        }
    };
    run.times.setup += resolve;
    for t in &mut run.iteration_times {
        t.setup += resolve;
    }
    Ok(SolverRun::Ham(run))
}

/// Median over `repeats` timed runs after `warmup` discarded ones. The
/// returned run is the last one; its records carry the median timings.
#[allow(clippy::too_many_arguments)]
pub fn timed_run(
    spec: &ProblemSpec,
    solver: SolverKind,
    p: &NonlinearBvp,
    n: usize,
    hbar: f64,
    max_iterations: usize,
    tolerance: f64,
    id: &str,
) -> Result<(SolverRun, Vec<BenchRecord>), CmdError> {
    for _ in 0..spec.warmup {
        run_solver(solver, p, spec.aux, n, hbar, max_iterations, tolerance)?;
    }
    let mut all = Vec::with_capacity(spec.repeats);
    let mut last = None;
    for _ in 0..spec.repeats.max(1) {
        let run = run_solver(solver, p, spec.aux, n, hbar, max_iterations, tolerance)?;
        all.push(run.records(id, solver, spec.aux, n));
        last = Some(run);
    }
    Ok((last.expect("at least one repeat"), median_records(&all)))
}

/// Field-wise median of the timing columns; the other columns come from the
/// first series.
pub fn median_records(series: &[Vec<BenchRecord>]) -> Vec<BenchRecord> {
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let col = |f: fn(&BenchRecord) -> f64| median(&series.iter().map(|s| f(&s[i])).collect::<Vec<_>>());
            BenchRecord {
                t_setup_s: col(|r| r.t_setup_s),
                t_factor_s: col(|r| r.t_factor_s),
                t_solve_s: col(|r| r.t_solve_s),
                t_transform_s: col(|r| r.t_transform_s),
                t_deriv_s: col(|r| r.t_deriv_s),
                ..series[0][i].clone()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub problem: String,
    pub solver: &'static str,
    pub aux: String,
    pub n: usize,
    pub hbar: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub best_residual: f64,
    pub tolerance: f64,
    pub status: Status,
    pub t_total_s: f64,
}

/// Solves once, writing `solution.csv`, `coefficients.csv`, `run.csv` and
/// `summary.json` into `out`.
pub fn cmd_solve(spec: &ProblemSpec, out: &Path) -> Result<SolveSummary, CmdError> {
    let p = spec.build_problem()?;
    let n = spec.n;
    let hbar = match spec.solver {
        SolverKind::Newton => 0.0,
        _ => resolve_hbar(spec, &p, n)?,
    };
    let run = run_solver(spec.solver, &p, spec.aux, n, hbar, spec.max_iterations, spec.tolerance)?;
    let id = run_id("solve", spec.seed, 0);
    let records = run.records(&id, spec.solver, spec.aux, n);

    let u = run.solution();
    let x = cheb_points(n.max(2))?;
    let mut w = csv::Writer::from_path(out_file(out, "solution.csv")?)?;
    w.write_record(["x", "u"])?;
    for &xi in &x {
        w.write_record([format!("{xi:.17e}"), format!("{:.17e}", u.eval(xi))])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out_file(out, "coefficients.csv")?)?;
    w.write_record(["k", "coefficient"])?;
    for (k, c) in u.as_slice().iter().enumerate() {
        w.write_record([k.to_string(), format!("{c:.17e}")])?;
    }
    w.flush()?;
    write_csv(
        &out_file(out, "run.csv")?,
        &format!("Residual history of a single {} solve of {}", spec.solver.tag(), problem_label(spec)),
        &records,
    )?;

    let summary = SolveSummary {
        problem: problem_label(spec),
        solver: spec.solver.tag(),
        aux: spec.aux.to_string(),
        n,
        hbar: run.hbar(),
        iterations: run.iterations(),
        residual: run.final_residual(),
        best_residual: run.best_residual(),
        tolerance: spec.tolerance,
        status: run.status(),
        t_total_s: records.last().map_or(0.0, BenchRecord::total_s),
    };
    let file = std::fs::File::create(out_file(out, "summary.json")?)?;
    serde_json::to_writer_pretty(file, &summary)?;
    Ok(summary)
}

/// One row of the `ħ` sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub hbar: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Minimiser of the residual after the largest iteration count.
    pub hbar_opt: Option<f64>,
}

/// Residual against `ħ` at each requested iteration count, written to
/// `sweep.csv` with a gnuplot stub `sweep.gp`. A row is converged when the
/// series did not diverge and its residual is within tolerance.
pub fn cmd_sweep_hbar(spec: &ProblemSpec, out: &Path) -> Result<SweepResult, CmdError> {
    let p = spec.build_problem()?;
    check_resolution(&p, spec.n)?;
    let aux = spec.aux.resolve(&p, spec.n)?;
    let solver = GhamSolver::new(&p, &aux, spec.n)?;
    let mut counts = if spec.sweep.iterations.is_empty() {
        vec![spec.max_iterations]
    } else {
        spec.sweep.iterations.clone()
    };
    counts.sort_unstable();
    counts.dedup();
    let last = *counts.last().expect("nonempty");
    let plan = HbarSweep {
        exclude: 0.0,
        ..hbar_sweep(spec)
    };
    let points = plan.points();

    let per_point: Vec<Vec<SweepRow>> = points
        .par_iter()
        .map(|&h| {
            let run = solver.run(h, last, 0.0).ok();
            counts
                .iter()
                .map(|&m| {
                    let (residual, diverged) = match &run {
                        Some(r) => match r.stop {
                            Stop::Diverged { iteration } if iteration <= m => (f64::INFINITY, true),
                            _ => (r.state.residual_trace.get(m - 1).copied().unwrap_or(f64::INFINITY), false),
                        },
                        None => (f64::INFINITY, true),
                    };
                    SweepRow {
                        hbar: h,
                        iterations: m,
                        residual,
                        converged: !diverged && residual <= spec.tolerance,
                    }
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<SweepRow> = per_point.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.iterations.cmp(&b.iterations).then(a.hbar.total_cmp(&b.hbar)));

    let hbar_opt = minimize_curve(
        |h| {
            if h == 0.0 {
                return f64::INFINITY;
            }
            match solver.run(h, last, 0.0) {
                Ok(r) if !matches!(r.stop, Stop::Diverged { .. }) => r.final_residual(),
                _ => f64::INFINITY,
            }
        },
        &HbarSweep {
            probe_iterations: last,
            ..plan
        },
    )
    .map(|(h, _)| h)
    .ok();

    let path = out_file(out, "sweep.csv")?;
    let mut file = std::fs::File::create(&path)?;
    writeln!(
        file,
        "# Residual against hbar for {} with auxiliary operator {} at n = {}",
        problem_label(spec),
        spec.aux,
        spec.n
    )?;
    let mut w = csv::Writer::from_writer(file);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let mut gp = String::new();
    writeln!(gp, "set datafile separator ','").unwrap();
    writeln!(gp, "set logscale y").unwrap();
    writeln!(gp, "set xlabel 'hbar'").unwrap();
    writeln!(gp, "set ylabel 'residual'").unwrap();
    let plots: Vec<String> = counts
        .iter()
        .map(|m| format!("'sweep.csv' using ($2=={m} ? $1 : 1/0):3 skip 2 with linespoints title 'm = {m}'"))
        .collect();
    writeln!(gp, "plot {}", plots.join(", \\\n     ")).unwrap();
    std::fs::write(out_file(out, "sweep.gp")?, gp)?;

    Ok(SweepResult { rows, hbar_opt })
}

/// Per-resolution summary of a scaling run.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub solver: &'static str,
    pub aux: String,
    pub n: usize,
    pub c: f64,
    pub s: f64,
    pub r_squared: f64,
    pub window_lo: usize,
    pub window_hi: usize,
    pub t_factor_s: f64,
    pub t_total_s: f64,
    /// Total time over that of the previous resolution.
    pub ratio: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingResult {
    pub rows: Vec<ScalingRow>,
    pub records: Vec<BenchRecord>,
    /// `(solver, n, message)` for resolutions that were skipped or failed.
    pub halted: Vec<(&'static str, usize, String)>,
    /// Exponent of the factorization time against `n`.
    pub factor_exponent: Option<f64>,
}

/// Timings over `spec.scaling.n` for each solver, run for exactly
/// `spec.max_iterations` iterations. Writes `scaling.csv` and
/// `scaling_fit.csv`. A failing solver stops at that resolution.
pub fn cmd_scaling(spec: &ProblemSpec, solvers: &[SolverKind], out: &Path) -> Result<ScalingResult, CmdError> {
    let p = spec.build_problem()?;
    let window = (spec.scaling.fit_window[0], spec.scaling.fit_window[1]);
    if spec.max_iterations < window.1 {
        return Err(ConfigError(format!(
            "scaling needs at least {} iterations for the fit window, got {}",
            window.1, spec.max_iterations
        ))
        .into());
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut halted = Vec::new();
    let mut index = 0;
    for &solver in solvers {
        let mut prev_total = None;
        for &n in &spec.scaling.n {
            if solver == SolverKind::Sham && n > SHAM_DENSE_CAP {
                halted.push((solver.tag(), n, format!("skipped: dense size above {SHAM_DENSE_CAP}")));
                break;
            }
            let id = run_id("scaling", spec.seed, index);
            index += 1;
            let attempt = (|| {
                let hbar = if solver == SolverKind::Newton { 0.0 } else { resolve_hbar(spec, &p, n)? };
                let tol = if solver == SolverKind::Newton { spec.tolerance } else { 0.0 };
                timed_run(spec, solver, &p, n, hbar, spec.max_iterations, tol, &id)
            })();
            let (run, recs) = match attempt {
                Ok(v) => v,
                Err(e) => {
                    warn!("{} halted at n = {n}: {e}", solver.tag());
                    halted.push((solver.tag(), n, e.to_string()));
                    break;
                }
            };
            if run.status() == Status::Diverged {
                halted.push((solver.tag(), n, "diverged".into()));
            }
            let Some(last) = recs.last() else { continue };
            let total = last.total_s();
            let cumulative: Vec<f64> = recs.iter().map(BenchRecord::iteration_s).collect();
            let fit = ScalingFit::from_cumulative(&cumulative, window).ok();
            rows.push(ScalingRow {
                solver: solver.tag(),
                aux: if solver == SolverKind::Newton { "-".into() } else { spec.aux.to_string() },
                n,
                c: fit.map_or(f64::NAN, |f| f.c),
                s: fit.map_or(f64::NAN, |f| f.s),
                r_squared: fit.map_or(f64::NAN, |f| f.r_squared),
                window_lo: window.0,
                window_hi: window.1,
                t_factor_s: last.t_factor_s,
                t_total_s: total,
                ratio: prev_total.map_or(f64::NAN, |p: f64| total / p),
                residual: run.final_residual(),
            });
            info!("{} n = {n}: total {total:.4e} s", solver.tag());
            prev_total = Some(total);
            records.extend(recs);
        }
    }
    let factor_exponent = {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.solver == "GHAM")
            .map(|r| (r.n as f64, r.t_factor_s))
            .collect();
        loglog_fit(&pts).ok().map(|f| f.1)
    };

    write_csv(
        &out_file(out, "scaling.csv")?,
        &format!(
            "Phase timings against iteration count and resolution for {} with auxiliary operator {}",
            problem_label(spec),
            spec.aux
        ),
        &records,
    )?;
    let mut file = std::fs::File::create(out_file(out, "scaling_fit.csv")?)?;
    writeln!(file, "# Fit of cumulative iteration time t = C * I^S over iterations {}..{}", window.0, window.1)?;
    let mut w = csv::Writer::from_writer(file);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(ScalingResult {
        rows,
        records,
        halted,
        factor_exponent,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub solver: &'static str,
    pub iterations: usize,
    pub residual: f64,
    pub t_total_s: f64,
    pub status: Status,
}

#[derive(Debug, Clone)]
pub struct CompareResult {
    pub rows: Vec<CompareRow>,
    /// `(a, b, ‖u_a − u_b‖∞)` for every pair.
    pub differences: Vec<(&'static str, &'static str, f64)>,
    pub records: Vec<BenchRecord>,
}

/// Max-norm difference of two series, sampled on a fine grid.
pub fn max_difference(a: &ChebCoeffs, b: &ChebCoeffs) -> f64 {
    let m = 2 * a.len().max(b.len()).max(16);
    let grid = gham::problem::Grid::new(m).expect("m >= 2");
    let d = a.add(&b.scaled(-1.0));
    grid.values(d.as_slice()).iter().fold(0.0f64, |s, v| s.max(v.abs()))
}

/// Runs each solver at `spec.n`; writes `compare.csv` and `compare.md`.
pub fn cmd_compare(spec: &ProblemSpec, solvers: &[SolverKind], out: &Path) -> Result<CompareResult, CmdError> {
    if solvers.len() < 2 {
        return Err(ConfigError(format!("compare needs at least two solvers, got {}", solvers.len())).into());
    }
    let p = spec.build_problem()?;
    let n = spec.n;
    let hbar = if solvers.iter().any(|s| *s != SolverKind::Newton) {
        resolve_hbar(spec, &p, n)?
    } else {
        0.0
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut solutions = Vec::new();
    for (i, &solver) in solvers.iter().enumerate() {
        let id = run_id("compare", spec.seed, i);
        let (run, recs) = timed_run(spec, solver, &p, n, hbar, spec.max_iterations, spec.tolerance, &id)?;
        rows.push(CompareRow {
            solver: solver.tag(),
            iterations: run.iterations(),
            residual: run.final_residual(),
            t_total_s: recs.last().map_or(0.0, BenchRecord::total_s),
            status: run.status(),
        });
        solutions.push((solver.tag(), run.solution().clone()));
        records.extend(recs);
    }
    let mut differences = Vec::new();
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            let d = max_difference(&solutions[i].1, &solutions[j].1);
            differences.push((solutions[i].0, solutions[j].0, d));
        }
    }

    write_csv(
        &out_file(out, "compare.csv")?,
        &format!("Residual against wall-clock time per solver for {} at n = {n}", problem_label(spec)),
        &records,
    )?;
    let mut md = String::new();
    writeln!(md, "# Solver comparison\n").unwrap();
    writeln!(md, "{} at n = {n}, auxiliary operator {}, hbar = {hbar:.6}.\n", problem_label(spec), spec.aux).unwrap();
    writeln!(md, "| solver | iterations | residual | total time (s) | status |").unwrap();
    writeln!(md, "|---|---:|---:|---:|---|").unwrap();
    for r in &rows {
        writeln!(
            md,
            "| {} | {} | {:.3e} | {:.4e} | {:?} |",
            r.solver, r.iterations, r.residual, r.t_total_s, r.status
        )
        .unwrap();
    }
    writeln!(md, "\n| pair | max difference |").unwrap();
    writeln!(md, "|---|---:|").unwrap();
    for (a, b, d) in &differences {
        writeln!(md, "| {a} vs {b} | {d:.3e} |").unwrap();
    }
    std::fs::write(out_file(out, "compare.md")?, md)?;
    Ok(CompareResult {
        rows,
        differences,
        records,
    })
}

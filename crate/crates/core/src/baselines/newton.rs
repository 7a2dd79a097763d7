//! Newton iteration on the ultraspherical discretisation, refactoring the
//! Fréchet derivative at every step.

use std::time::{Duration, Instant};

use crate::assembly::{assemble_system, LinearBvp, LinearOperator};
use crate::error::{Error, Result};
use crate::ham::PhaseTimes;
use crate::linsolve::factorize;
use crate::problem::{reference_solution, DefectEvaluator, Grid, NonlinearBvp};
use crate::spectral::ChebCoeffs;

#[derive(Debug, Clone)]
pub struct NewtonRun {
    pub solution: ChebCoeffs,
    /// Residual of the starting guess, then after every step.
    pub residual_trace: Vec<f64>,
    /// `‖δ‖∞` per step.
    pub step_norms: Vec<f64>,
    pub times: PhaseTimes,
    /// Cumulative time after each step.
    pub step_times: Vec<Duration>,
    pub factorizations: usize,
    pub converged: bool,
}

impl NewtonRun {
    pub fn steps(&self) -> usize {
        self.step_norms.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_trace.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// `L[·] + Σ_t c_t Σ_i (Π_{j≠i} u^(d_j)) (·)^(d_i)` at `u`, coefficients
/// sampled on `grid`.
pub fn frechet_operator(p: &NonlinearBvp, u: &[f64], grid: &Grid) -> Result<LinearOperator> {
    let order = p.order();
    let d = grid.derivative_values(u, order);
    let mut op = p.linear().clone();
    for t in p.terms() {
        let c = grid.values(t.coeff().as_slice());
        let f = t.factors();
        for i in 0..f.len() {
            let mut vals = c.clone();
            for (j, &dj) in f.iter().enumerate() {
                if j != i {
                    vals.iter_mut().zip(&d[dj]).for_each(|(v, w)| *v *= w);
                }
            }
            op.add_term(f[i], &grid.coeffs(&vals)?);
        }
    }
    Ok(op)
}

/// Newton's method from the solution of the linear part with the full
/// boundary data. Stops once the residual is at most `tol`.
pub fn newton_solve(p: &NonlinearBvp, n: usize, tol: f64, max_iter: usize) -> Result<NewtonRun> {
    let order = p.order();
    if n < order + 2 {
        return Err(Error::ResolutionTooLow { n, order });
    }
    let mut times = PhaseTimes::default();
    let t = Instant::now();
    let grid = Grid::new(n)?;
    let evaluator = DefectEvaluator::new(p, 2 * n + 1)?;
    let local = DefectEvaluator::new(p, n)?;
    let mut u = reference_solution(p, n)?.resized(n);
    times.setup += t.elapsed();

    let mut residual_trace = vec![evaluator.residual(u.as_slice())];
    let mut step_norms = Vec::new();
    let mut step_times = Vec::new();
    let mut factorizations = 0;
    let mut converged = residual_trace[0] <= tol;

    while !converged && step_norms.len() < max_iter {
        let t = Instant::now();
        let jac = frechet_operator(p, u.as_slice(), &grid)?.capped(n);
        let defect = local.defect(u.as_slice());
        let rhs = grid.coeffs(&defect.iter().map(|r| -r).collect::<Vec<_>>())?;
        let bc: Vec<f64> = p
            .boundary()
            .iter()
            .zip(p.values())
            .map(|(b, c)| c - b.apply(u.as_slice()))
            .collect();
        let (a, b) = assemble_system(&LinearBvp::new(jac, rhs, p.boundary().to_vec(), bc)?.capped(n), n)?;
        times.setup += t.elapsed();

        let t = Instant::now();
        let lu = factorize(&a)?;
        factorizations += 1;
        times.factorize += t.elapsed();

        let t = Instant::now();
        let delta = lu.solve(&b)?;
        times.solve += t.elapsed();
        let norm = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        u = u.add(&ChebCoeffs::new(delta)?);
        step_norms.push(norm);
        step_times.push(times.total());

        let t = Instant::now();
        let r = evaluator.residual(u.as_slice());
        times.residual += t.elapsed();
        residual_trace.push(r);
        if !r.is_finite() {
            return Err(Error::NonFinite("Newton iterate"));
        }
        converged = r <= tol;
    }

    Ok(NewtonRun {
        solution: u,
        residual_trace,
        step_norms,
        times,
        step_times,
        factorizations,
        converged,
    })
}

//! The spectral homotopy analysis method: the same iteration as GHAM on
//! dense Chebyshev collocation matrices.

use std::time::Instant;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::assembly::{BoundaryFunctional, Endpoint, LinearOperator};
use crate::error::{Error, Result};
use crate::ham::{
    chop_level, chop_noise, expand_about, nonlinear_rhs, prepare_terms, HamConfig, HamRun, HamState,
    PhaseTimes, ProductCounter, Stop, DIVERGENCE_FACTOR,
};
use crate::linsolve::DenseLu;
use crate::problem::{AuxOperator, DefectEvaluator, Grid, NonlinearBvp};
use crate::spectral::{cheb_points, ChebCoeffs};

/// Above this resolution collocation matrices are expected to be too badly
/// conditioned to be useful.
pub const SHAM_SOFT_LIMIT: usize = 512;

/// Dense differentiation matrices on the `n` Chebyshev–Gauss–Lobatto points,
/// ordered like [`cheb_points`].
#[derive(Debug, Clone)]
pub struct CollocationOperator {
    n: usize,
    points: Vec<f64>,
    /// `d[k−1]` is `D_k`.
    d: Vec<DMatrix<f64>>,
}

impl CollocationOperator {
    pub fn new(n: usize, max_order: usize) -> Result<Self> {
        let points = cheb_points(n)?;
        let d1 = first_derivative(&points);
        let mut d = Vec::with_capacity(max_order);
        if max_order > 0 {
            d.push(d1.clone());
        }
        for k in 1..max_order {
            d.push(&d1 * &d[k - 1]);
        }
        Ok(Self { n, points, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `D_k`; `k = 0` is not stored.
    pub fn derivative(&self, k: usize) -> &DMatrix<f64> {
        &self.d[k - 1]
    }

    /// `Σ diag(a_k) D_k`.
    pub fn operator(&self, op: &LinearOperator) -> Result<DMatrix<f64>> {
        if op.order() > self.d.len() {
            return Err(Error::DimensionMismatch {
                expected: self.d.len(),
                got: op.order(),
            });
        }
        let grid = Grid::new(self.n)?;
        let mut a = DMatrix::zeros(self.n, self.n);
        for (k, c) in op.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let vals = grid.values(c.as_slice());
            if k == 0 {
                for (i, v) in vals.iter().enumerate() {
                    a[(i, i)] += v;
                }
            } else {
                let dk = &self.d[k - 1];
                for (i, v) in vals.iter().enumerate() {
                    for j in 0..self.n {
                        a[(i, j)] += v * dk[(i, j)];
                    }
                }
            }
        }
        Ok(a)
    }

    /// Row of `u ↦ u^(d)(±1)`.
    pub fn boundary_row(&self, b: &BoundaryFunctional) -> Vec<f64> {
        let i = self.endpoint_index(b.point);
        let mut row = vec![0.0; self.n];
        if b.derivative_order == 0 {
            row[i] = b.weight;
        } else {
            let dk = &self.d[b.derivative_order - 1];
            for (j, r) in row.iter_mut().enumerate() {
                *r = b.weight * dk[(i, j)];
            }
        }
        row
    }

    fn endpoint_index(&self, p: Endpoint) -> usize {
        match p {
            Endpoint::Right => 0,
            Endpoint::Left => self.n - 1,
        }
    }

    /// Equation rows replaced by boundary conditions: successive rows inward
    /// from the matching endpoint.
    pub fn replaced_rows(&self, boundary: &[BoundaryFunctional]) -> Vec<usize> {
        let (mut right, mut left) = (0, 0);
        boundary
            .iter()
            .map(|b| match b.point {
                Endpoint::Right => {
                    right += 1;
                    right - 1
                }
                Endpoint::Left => {
                    left += 1;
                    self.n - left
                }
            })
            .collect()
    }

    pub fn apply(&self, k: usize, v: &[f64]) -> Vec<f64> {
        if k == 0 {
            return v.to_vec();
        }
        let out = &self.d[k - 1] * DVector::from_column_slice(v);
        out.as_slice().to_vec()
    }
}

fn first_derivative(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let c = |i: usize| {
        let e = if i == 0 || i == n - 1 { 2.0 } else { 1.0 };
        if i % 2 == 0 {
            e
        } else {
            -e
        }
    };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = c(i) / c(j) / (x[i] - x[j]);
                d[(i, j)] = v;
                sum += v;
            }
        }
        // negative-sum diagonal, exact on constants
        d[(i, i)] = -sum;
    }
    d
}

/// A factored collocation system, rejected when its estimated condition
/// number reaches `1/ε`.
#[derive(Debug)]
struct CollocationSystem {
    lu: DenseLu,
    rows: Vec<usize>,
}

impl CollocationSystem {
    fn new(c: &CollocationOperator, op: &LinearOperator, boundary: &[BoundaryFunctional]) -> Result<Self> {
        let mut a = c.operator(op)?;
        let rows = c.replaced_rows(boundary);
        for (b, &r) in boundary.iter().zip(&rows) {
            a.row_mut(r).copy_from_slice(&c.boundary_row(b));
        }
        let lu = DenseLu::factor(&a)?;
        let cond = condition_estimate(&a, &lu)?;
        if !(cond * f64::EPSILON < 1.0) {
            return Err(Error::Singular {
                index: c.n,
                pivot: 1.0 / cond,
            });
        }
        Ok(Self { lu, rows })
    }

    /// Solves with interior equations `f` and boundary values `g`.
    fn solve(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = f.to_vec();
        for (&r, &v) in self.rows.iter().zip(g) {
            rhs[r] = v;
        }
        self.lu.solve(&rhs)
    }
}

/// Lower bound on `‖RA‖∞ ‖(RA)⁻¹‖∞` for the row-equilibrated matrix, from a
/// few deterministic probes.
fn condition_estimate(a: &DMatrix<f64>, lu: &DenseLu) -> Result<f64> {
    let n = a.nrows();
    let scale = lu.row_scale();
    let norm_a = a
        .row_iter()
        .zip(scale)
        .map(|(r, s)| s * r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut inv = 0.0f64;
    for k in 1..=3 {
        // (RA)⁻¹ z = A⁻¹ R⁻¹ z
        let z: Vec<f64> = (0..n)
            .map(|i| ((i * k) as f64 * 0.618).sin().signum() / scale[i])
            .collect();
        let x = lu.solve(&z)?;
        let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !xn.is_finite() {
            return Ok(f64::INFINITY);
        }
        inv = inv.max(xn);
    }
    Ok(norm_a * inv)
}

/// Runs the SHAM iteration. The residual is the GHAM metric applied to the
/// Chebyshev interpolant of the collocation values.
pub fn sham_solve(p: &NonlinearBvp, aux: &AuxOperator, config: &HamConfig) -> Result<HamRun> {
    let n = config.n;
    let order = p.order();
    if n < order + 2 {
        return Err(Error::ResolutionTooLow { n, order });
    }
    if n > SHAM_SOFT_LIMIT {
        warn!("SHAM at n = {n} exceeds {SHAM_SOFT_LIMIT}; expect ill-conditioning");
    }
    let mut times = PhaseTimes::default();
    let t = Instant::now();
    let colloc = CollocationOperator::new(n, order)?;
    let op = aux.operator(p, n)?;
    let grid = Grid::new(n)?;
    let rows = colloc.replaced_rows(p.boundary());
    times.setup += t.elapsed();

    let t = Instant::now();
    let system = CollocationSystem::new(&colloc, &op, p.boundary())?;
    times.factorize += t.elapsed();

    let t = Instant::now();
    let psi = grid.values(p.psi().as_slice());
    let u0_vals = system.solve(&psi, p.values())?;
    let u0 = ChebCoeffs::new(grid.transform().vals_to_coeffs(&u0_vals))?;
    let hom = expand_about(p, &u0, n)?;
    let mut a1 = colloc.operator(&hom.l1)?;
    for &r in &rows {
        a1.row_mut(r).fill(0.0);
    }
    let (orders, terms) = prepare_terms(&hom.terms, &grid);
    let psi1 = grid.values(hom.psi1.as_slice());
    let evaluator = DefectEvaluator::new(p, 2 * n + 1)?;
    let zeros = vec![0.0; rows.len()];
    times.setup += t.elapsed();

    let hbar = config.hbar;
    let mut counter = ProductCounter::default();
    let mut state = HamState {
        u0: u0.clone(),
        history: vec![ChebCoeffs::zeros(n)],
        partial_sum: u0.resized(n),
        residual_trace: Vec::with_capacity(config.max_iterations),
        iterations_done: 0,
    };
    let mut prev = vec![0.0; n];
    let mut sum_vals = u0_vals;
    let mut dvals: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; n]; orders.len()]];
    let mut cubic_w: Vec<Vec<Vec<f64>>> = vec![Vec::new(); terms.len()];
    let mut iteration_times = Vec::with_capacity(config.max_iterations);
    let mut v1_norm = 0.0;
    let mut stop = Stop::MaxIterations;

    for m in 1..=config.max_iterations {
        let chi = if m == 1 { 0.0 } else { 1.0 };
        let t = Instant::now();
        let mut nm = nonlinear_rhs(&terms, &dvals, m, &psi1, &mut cubic_w, &mut counter);
        times.transform += t.elapsed();

        let t = Instant::now();
        let lin = &a1 * DVector::from_column_slice(&prev);
        nm.iter_mut().zip(lin.iter()).for_each(|(a, b)| *a += b);
        let x = system.solve(&nm, &zeros)?;
        let v: Vec<f64> = prev.iter().zip(&x).map(|(p, x)| chi * p + hbar * x).collect();
        times.solve += t.elapsed();

        let norm = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if m == 1 {
            v1_norm = norm;
        }
        if !norm.is_finite() || norm > DIVERGENCE_FACTOR * v1_norm.max(f64::MIN_POSITIVE) {
            stop = Stop::Diverged { iteration: m };
            break;
        }

        let t = Instant::now();
        dvals.push(orders.iter().map(|&k| colloc.apply(k, &v)).collect());
        times.derivative += t.elapsed();

        let t = Instant::now();
        sum_vals.iter_mut().zip(&v).for_each(|(s, v)| *s += v);
        let mut coeffs = grid.transform().vals_to_coeffs(&v);
        chop_noise(&mut coeffs, chop_level(n));
        let vc = ChebCoeffs::new(coeffs)?;
        state.partial_sum = ChebCoeffs::new(grid.transform().vals_to_coeffs(&sum_vals))?;
        times.transform += t.elapsed();
        state.history.push(vc);
        state.iterations_done = m;
        prev = v;
        iteration_times.push(times);

        let t = Instant::now();
        let r = evaluator.residual(state.partial_sum.as_slice());
        times.residual += t.elapsed();
        state.residual_trace.push(r);
        if !r.is_finite() {
            stop = Stop::Diverged { iteration: m };
            break;
        }
        if r <= config.tolerance {
            stop = Stop::Converged;
            break;
        }
    }

    Ok(HamRun {
        hbar,
        state,
        stop,
        counter,
        times,
        iteration_times,
        factorizations: 1,
    })
}

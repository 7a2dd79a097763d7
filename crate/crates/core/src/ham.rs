//! The Gegenbauer homotopy analysis iteration.
//!
//! With `u = v + u0` and `u0` carrying the boundary data, the iterates obey
//! `V_m = χ_m V_{m−1} + ħ A⁻¹ (A_1 V_{m−1} + N_m)`, where `A` is the bordered
//! auxiliary operator (factored once), `A_1` the linear part of the shifted
//! problem and `N_m` the `q^{m−1}` coefficient of its products, less `ψ_1`
//! at `m = 1`.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::assembly::{assemble_operator, assemble_system, LinearBvp, LinearOperator};
use crate::error::{Error, Result};
use crate::linsolve::{factorize, Factorization};
use crate::problem::{AuxOperator, DefectEvaluator, Grid, NonlinearBvp, NonlinearTerm};
use crate::spectral::{conversion_chain, BandedOp, ChebCoeffs};

/// Iterates whose max-norm exceeds this multiple of `‖V_1‖∞` count as divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamConfig {
    pub n: usize,
    pub hbar: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl HamConfig {
    pub fn new(n: usize, hbar: f64, max_iterations: usize, tolerance: f64) -> Result<Self> {
        if hbar == 0.0 || !hbar.is_finite() {
            return Err(Error::InvalidConfig(format!("hbar must be finite and nonzero, got {hbar}")));
        }
        if max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tolerance}")));
        }
        Ok(Self {
            n,
            hbar,
            max_iterations,
            tolerance,
        })
    }
}

/// The problem after substituting `u = v + u0`:
/// `L_1[v] + N_1[v] = ψ_1` with homogeneous boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct Homogenized {
    pub u0: ChebCoeffs,
    /// Original linear part plus the cross terms linear in `v`.
    pub l1: LinearOperator,
    /// Products of two or more `v` factors.
    pub terms: Vec<NonlinearTerm>,
    /// `ψ − N[u0]`.
    pub psi1: ChebCoeffs,
}

/// Expands `N[v + u0]` about a given `u0`, with all coefficient functions
/// resolved on an `n`-point grid.
pub fn expand_about(p: &NonlinearBvp, u0: &ChebCoeffs, n: usize) -> Result<Homogenized> {
    let order = p.order();
    let grid = Grid::new(n.max(order + 2))?;
    let d = grid.derivative_values(u0.as_slice(), order);
    let mut l1 = p.linear().clone();
    let mut terms = Vec::new();
    for t in p.terms() {
        let c = grid.values(t.coeff().as_slice());
        let f = t.factors();
        // every proper subset of factors taken from u0, the rest from v
        for mask in 0u32..(1 << f.len()) - 1 {
            let from_u0: Vec<usize> = (0..f.len()).filter(|i| mask >> i & 1 == 1).collect();
            let in_v: Vec<usize> = (0..f.len()).filter(|i| mask >> i & 1 == 0).map(|i| f[i]).collect();
            let mut coeff = c.clone();
            for &i in &from_u0 {
                for (a, b) in coeff.iter_mut().zip(&d[f[i]]) {
                    *a *= b;
                }
            }
            let coeff = grid.coeffs(&coeff)?;
            if coeff.is_zero() {
                continue;
            }
            if in_v.len() == 1 {
                l1.add_term(in_v[0], &coeff);
            } else {
                terms.push(NonlinearTerm::new(coeff, in_v)?);
            }
        }
    }
    let defect = DefectEvaluator::new(p, grid.len())?.defect(u0.as_slice());
    let psi1 = grid.coeffs(&defect.iter().map(|r| -r).collect::<Vec<_>>())?;
    Ok(Homogenized {
        u0: u0.clone(),
        l1: l1.capped(n),
        terms: merge_terms(terms),
        psi1,
    })
}

/// Combines terms with equal factor multisets.
fn merge_terms(terms: Vec<NonlinearTerm>) -> Vec<NonlinearTerm> {
    let mut out: Vec<NonlinearTerm> = Vec::new();
    for t in terms {
        let mut key = t.factors().to_vec();
        key.sort_unstable();
        if let Some(o) = out.iter_mut().find(|o| o.factors() == key.as_slice()) {
            *o = NonlinearTerm::new(o.coeff().add(t.coeff()), key).expect("same shape");
        } else {
            out.push(NonlinearTerm::new(t.coeff().clone(), key).expect("same shape"));
        }
    }
    out
}

/// Solves the auxiliary operator against `ψ` with the inhomogeneous boundary
/// data and expands the problem about the result.
pub fn homogenize(p: &NonlinearBvp, aux: &AuxOperator, n: usize) -> Result<Homogenized> {
    let op = aux.operator(p, n)?;
    let bvp = aux_bvp(p, op)?.capped(n);
    let (a, rhs) = assemble_system(&bvp, n)?;
    let u0 = ChebCoeffs::new(factorize(&a)?.solve(&rhs)?)?;
    expand_about(p, &u0, n)
}

fn aux_bvp(p: &NonlinearBvp, op: LinearOperator) -> Result<LinearBvp> {
    LinearBvp::new(
        op,
        p.psi().clone(),
        p.boundary().to_vec(),
        p.values().to_vec(),
    )
}

/// Cumulative grid-product counts of the right-hand-side construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProductCounter {
    /// Products of two distinct iterates.
    pub pairs: usize,
    /// Products of an iterate with itself.
    pub squares: usize,
    /// Products entering cubic terms.
    pub cubic: usize,
}

/// Wall time per phase, summed over the run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub setup: Duration,
    pub factorize: Duration,
    pub solve: Duration,
    pub transform: Duration,
    pub derivative: Duration,
    /// Residual evaluation; diagnostic only, excluded from [`total`](Self::total).
    pub residual: Duration,
}

impl PhaseTimes {
    pub fn total(&self) -> Duration {
        self.setup + self.factorize + self.iteration()
    }

    pub fn iteration(&self) -> Duration {
        self.solve + self.transform + self.derivative
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamState {
    pub u0: ChebCoeffs,
    /// `V_0 … V_m`; `V_0 = 0`.
    pub history: Vec<ChebCoeffs>,
    /// `u0 + Σ V_j`.
    pub partial_sum: ChebCoeffs,
    pub residual_trace: Vec<f64>,
    pub iterations_done: usize,
}

impl HamState {
    /// `u0 + Σ V_j` summed afresh.
    pub fn recomputed_sum(&self) -> ChebCoeffs {
        self.history.iter().fold(self.u0.clone(), |acc, v| acc.add(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    Converged,
    MaxIterations,
    Diverged { iteration: usize },
}

#[derive(Debug, Clone)]
pub struct HamRun {
    pub hbar: f64,
    pub state: HamState,
    pub stop: Stop,
    pub counter: ProductCounter,
    pub times: PhaseTimes,
    /// Cumulative phase times after each iteration.
    pub iteration_times: Vec<PhaseTimes>,
    pub factorizations: usize,
}

impl HamRun {
    pub fn solution(&self) -> &ChebCoeffs {
        &self.state.partial_sum
    }

    /// Last residual, or infinity if none was recorded.
    pub fn final_residual(&self) -> f64 {
        self.state.residual_trace.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn best_residual(&self) -> f64 {
        self.state
            .residual_trace
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn converged(&self) -> bool {
        self.stop == Stop::Converged
    }
}

/// A quadratic or cubic term of `N_1` prepared for value-space products.
#[derive(Debug, Clone)]
pub(crate) struct PreparedTerm {
    /// Grid values of the coefficient, `None` when constant.
    coeff: Option<Vec<f64>>,
    constant: f64,
    /// Positions of the factor orders in the derivative cache.
    slots: Vec<usize>,
}

/// Everything that does not depend on `ħ`: the auxiliary factorization, the
/// shifted problem and its operators. Shared read-only by concurrent runs.
#[derive(Debug)]
pub struct GhamSolver {
    n: usize,
    k: usize,
    problem: NonlinearBvp,
    aux_label: String,
    factorization: Factorization,
    hom: Homogenized,
    a1: BandedOp,
    chain: BandedOp,
    grid: Grid,
    orders: Vec<usize>,
    terms: Vec<PreparedTerm>,
    psi1: Vec<f64>,
    evaluator: DefectEvaluator,
    times: PhaseTimes,
    nnz_fraction: f64,
}

impl GhamSolver {
    /// Builds and factors the auxiliary system once.
    pub fn new(p: &NonlinearBvp, aux: &AuxOperator, n: usize) -> Result<Self> {
        let order = p.order();
        if n < order + 2 {
            return Err(Error::ResolutionTooLow { n, order });
        }
        let t0 = Instant::now();
        let op = aux.operator(p, n)?;
        let (a, rhs) = assemble_system(&aux_bvp(p, op)?.capped(n), n)?;
        let nnz_fraction = crate::assembly::nnz_fraction(&a);
        let t_setup = t0.elapsed();

        let t1 = Instant::now();
        let factorization = factorize(&a)?;
        let t_factor = t1.elapsed();

        let t2 = Instant::now();
        let u0 = ChebCoeffs::new(factorization.solve(&rhs)?)?;
        let hom = expand_about(p, &u0, n)?;
        let k = order;
        let a1 = assemble_operator(&hom.l1, n)?.truncated(n - k, n);
        let chain = conversion_chain(0, order, n)?.truncated(n - k, n);
        // n + 1 points keep the DCT at a power-of-two FFT length for n = 2^k
        let grid = Grid::new(n + 1)?;
        let (orders, terms) = prepare_terms(&hom.terms, &grid);
        let psi1 = grid.values(hom.psi1.as_slice());
        let evaluator = DefectEvaluator::new(p, 2 * n + 1)?;
        let t_setup = t_setup + t2.elapsed();

        Ok(Self {
            n,
            k,
            problem: p.clone(),
            aux_label: aux.label(),
            factorization,
            hom,
            a1,
            chain,
            grid,
            orders,
            terms,
            psi1,
            evaluator,
            times: PhaseTimes {
                setup: t_setup,
                factorize: t_factor,
                ..PhaseTimes::default()
            },
            nnz_fraction,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn aux_label(&self) -> &str {
        &self.aux_label
    }

    pub fn problem(&self) -> &NonlinearBvp {
        &self.problem
    }

    pub fn homogenized(&self) -> &Homogenized {
        &self.hom
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    /// Setup and factorization times of the preparation.
    pub fn setup_times(&self) -> PhaseTimes {
        self.times
    }

    pub fn nnz_fraction(&self) -> f64 {
        self.nnz_fraction
    }

    /// `∫|N[u] − ψ|` on the `2n + 1`-point grid.
    pub fn residual(&self, u: &[f64]) -> f64 {
        self.evaluator.residual(u)
    }

    /// Runs the iteration for one `ħ`. A tolerance of zero runs all iterations.
    pub fn run(&self, hbar: f64, max_iterations: usize, tolerance: f64) -> Result<HamRun> {
        let n = self.n;
        let k = self.k;
        let mut times = self.times;
        let mut iteration_times = Vec::with_capacity(max_iterations);
        let mut counter = ProductCounter::default();

        let zero = ChebCoeffs::zeros(n);
        let mut state = HamState {
            u0: self.hom.u0.clone(),
            history: vec![zero.clone()],
            partial_sum: self.hom.u0.resized(n),
            residual_trace: Vec::with_capacity(max_iterations),
            iterations_done: 0,
        };
        // derivative values of V_j, indexed [j][slot]
        let mut dvals: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; self.grid.len()]; self.orders.len()]];
        // W_s = Σ_{i+j=s} of the first two factors, per cubic term
        let mut cubic_w: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.terms.len()];
        let mut v1_norm = 0.0;
        let mut stop = Stop::MaxIterations;

        for m in 1..=max_iterations {
            let chi = if m == 1 { 0.0 } else { 1.0 };
            let prev = state.history.last().expect("V_0 present").clone();

            let t = Instant::now();
            let nm = nonlinear_rhs(&self.terms, &dvals, m, &self.psi1, &mut cubic_w, &mut counter);
            let mut nm_coeffs = self.grid.transform().vals_to_coeffs(&nm);
            nm_coeffs.truncate(n);
            chop_noise(&mut nm_coeffs, chop_level(n));
            times.transform += t.elapsed();

            let t = Instant::now();
            let mut rhs = vec![0.0; n];
            let tail = &mut rhs[k..];
            self.chain.apply_into(&nm_coeffs, tail);
            let mut lin = vec![0.0; n - k];
            self.a1.apply_into(prev.as_slice(), &mut lin);
            tail.iter_mut().zip(&lin).for_each(|(a, b)| *a += b);
            let x = self.factorization.solve(&rhs)?;
            let v: Vec<f64> = prev
                .as_slice()
                .iter()
                .zip(&x)
                .map(|(p, x)| chi * p + hbar * x)
                .collect();
            times.solve += t.elapsed();

            let norm = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if m == 1 {
                v1_norm = norm;
            }
            if !norm.is_finite() || norm > DIVERGENCE_FACTOR * v1_norm.max(f64::MIN_POSITIVE) {
                stop = Stop::Diverged { iteration: m };
                break;
            }

            dvals.push(self.derivative_values(&v, &mut times));

            let v = ChebCoeffs::new(v)?;
            state.partial_sum = state.partial_sum.add(&v);
            state.history.push(v);
            state.iterations_done = m;
            iteration_times.push(times);

            let t = Instant::now();
            let r = self.evaluator.residual(state.partial_sum.as_slice());
            times.residual += t.elapsed();
            state.residual_trace.push(r);
            if !r.is_finite() {
                stop = Stop::Diverged { iteration: m };
                break;
            }
            if r <= tolerance {
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

    /// Grid values of the cached derivative orders of one iterate.
    fn derivative_values(&self, v: &[f64], times: &mut PhaseTimes) -> Vec<Vec<f64>> {
        let Some(&max) = self.orders.last() else {
            return Vec::new();
        };
        let t = Instant::now();
        let mut coeffs = Vec::with_capacity(max + 1);
        let mut c = v.to_vec();
        for d in 0..=max {
            if d > 0 {
                let mut next = vec![0.0; c.len()];
                crate::spectral::derivative_into(&c, &mut next);
                c = next;
            }
            if self.orders.contains(&d) {
                coeffs.push(c.clone());
            }
        }
        times.derivative += t.elapsed();
        let t = Instant::now();
        let out = coeffs.iter().map(|c| self.grid.values(c)).collect();
        times.transform += t.elapsed();
        out
    }
}

/// Derivative orders used by `terms`, ascending, and the terms with their
/// coefficients sampled on `grid`.
pub(crate) fn prepare_terms(terms: &[NonlinearTerm], grid: &Grid) -> (Vec<usize>, Vec<PreparedTerm>) {
    let mut orders: Vec<usize> = terms.iter().flat_map(|t| t.factors().to_vec()).collect();
    orders.sort_unstable();
    orders.dedup();
    let prepared = terms
        .iter()
        .map(|t| {
            let c = t.coeff();
            let slots = t
                .factors()
                .iter()
                .map(|d| orders.binary_search(d).expect("collected above"))
                .collect();
            if c.len() == 1 {
                PreparedTerm {
                    coeff: None,
                    constant: c.as_slice()[0],
                    slots,
                }
            } else {
                PreparedTerm {
                    coeff: Some(grid.values(c.as_slice())),
                    constant: 1.0,
                    slots,
                }
            }
        })
        .collect();
    (orders, prepared)
}

/// Grid values of `N_m` from the cached derivative values of `V_0 … V_{m−1}`.
pub(crate) fn nonlinear_rhs(
    terms: &[PreparedTerm],
    dvals: &[Vec<Vec<f64>>],
    m: usize,
    psi1: &[f64],
    cubic_w: &mut [Vec<Vec<f64>>],
    counter: &mut ProductCounter,
) -> Vec<f64> {
    let mut nm = vec![0.0; psi1.len()];
    for (ti, term) in terms.iter().enumerate() {
        let prod = if term.slots.len() == 2 {
            quadratic_cauchy(dvals, term.slots[0], term.slots[1], m - 1, counter)
        } else {
            cubic_cauchy(dvals, &term.slots, m - 1, &mut cubic_w[ti], counter)
        };
        match &term.coeff {
            None => nm.iter_mut().zip(&prod).for_each(|(a, b)| *a += term.constant * b),
            Some(c) => nm
                .iter_mut()
                .zip(&prod)
                .zip(c)
                .for_each(|((a, b), c)| *a += c * b),
        }
    }
    if m == 1 {
        nm.iter_mut().zip(psi1).for_each(|(a, b)| *a -= b);
    }
    nm
}

/// Relative level of transform rounding in a length-`n` DCT.
pub(crate) fn chop_level(n: usize) -> f64 {
    f64::EPSILON * (n.max(2) as f64).log2()
}

/// Zeroes the trailing coefficients below `rel` times the largest magnitude.
pub(crate) fn chop_noise(c: &mut [f64], rel: f64) {
    let cut = rel * c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let keep = c.iter().rposition(|x| x.abs() > cut).map_or(0, |p| p + 1);
    c[keep..].iter_mut().for_each(|x| *x = 0.0);
}

/// `Σ_{i+j=s} D^a V_i · D^b V_j`, pairing `i` with `s − i`.
fn quadratic_cauchy(
    dvals: &[Vec<Vec<f64>>],
    a: usize,
    b: usize,
    s: usize,
    counter: &mut ProductCounter,
) -> Vec<f64> {
    let n = dvals[0].first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for i in 0..=s / 2 {
        let j = s - i;
        if i == j {
            let (x, y) = (&dvals[i][a], &dvals[i][b]);
            out.iter_mut().zip(x.iter().zip(y)).for_each(|(o, (x, y))| *o += x * y);
            counter.squares += 1;
        } else if a == b {
            let (x, y) = (&dvals[i][a], &dvals[j][a]);
            out.iter_mut().zip(x.iter().zip(y)).for_each(|(o, (x, y))| *o += 2.0 * x * y);
            counter.pairs += 1;
        } else {
            let (xa, xb) = (&dvals[i][a][..n], &dvals[i][b][..n]);
            let (ya, yb) = (&dvals[j][a][..n], &dvals[j][b][..n]);
            for t in 0..n {
                out[t] += xa[t] * yb[t] + ya[t] * xb[t];
            }
            counter.pairs += 2;
        }
    }
    out
}

/// `Σ_{i+j+l=s} D^a V_i · D^b V_j · D^c V_l` via the running quadratic sums
/// `W_t = Σ_{i+j=t} D^a V_i · D^b V_j`.
fn cubic_cauchy(
    dvals: &[Vec<Vec<f64>>],
    slots: &[usize],
    s: usize,
    w: &mut Vec<Vec<f64>>,
    counter: &mut ProductCounter,
) -> Vec<f64> {
    let (a, b, c) = (slots[0], slots[1], slots[2]);
    while w.len() <= s {
        let t = w.len();
        let mut scratch = ProductCounter::default();
        w.push(quadratic_cauchy(dvals, a, b, t, &mut scratch));
        counter.cubic += scratch.pairs + scratch.squares;
    }
    let n = w[0].len();
    let mut out = vec![0.0; n];
    for t in 0..=s {
        let z = &dvals[s - t][c];
        out.iter_mut().zip(w[t].iter().zip(z)).for_each(|(o, (x, y))| *o += x * y);
        counter.cubic += 1;
    }
    out
}

/// One-shot solve: prepares the auxiliary factorization and iterates.
pub fn solve_ham(p: &NonlinearBvp, aux: &AuxOperator, config: &HamConfig) -> Result<HamRun> {
    let solver = GhamSolver::new(p, aux, config.n)?;
    let run = solver.run(config.hbar, config.max_iterations, config.tolerance)?;
    if let Stop::Diverged { iteration } = run.stop {
        return Err(Error::Divergence {
            iteration,
            hbar: config.hbar,
        });
    }
    Ok(run)
}

/// Sampling plan for the `ħ` search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbarSweep {
    pub range: (f64, f64),
    pub samples: usize,
    pub probe_iterations: usize,
    /// Samples with `|ħ|` below this are skipped.
    pub exclude: f64,
    /// Golden-section steps after the coarse sweep; zero disables refinement.
    pub refine_steps: usize,
}

impl Default for HbarSweep {
    fn default() -> Self {
        Self {
            range: (-2.0, 2.0),
            samples: 41,
            probe_iterations: 10,
            exclude: 0.01,
            refine_steps: 24,
        }
    }
}

impl HbarSweep {
    pub fn points(&self) -> Vec<f64> {
        let (lo, hi) = self.range;
        let m = self.samples.max(2);
        (0..m)
            .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
            .filter(|h| h.abs() >= self.exclude)
            .collect()
    }
}

/// Minimises a broadly convex curve: coarse samples in parallel, then a
/// golden-section search between the neighbours of the best sample.
/// Non-finite values mark divergent samples.
pub fn minimize_curve<F>(f: F, sweep: &HbarSweep) -> Result<(f64, Vec<(f64, f64)>)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let points = sweep.points();
    let mut curve: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&h| {
            let r = f(h);
            (h, if r.is_finite() { r } else { f64::INFINITY })
        })
        .collect();
    let best = curve
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| r.is_finite())
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i);
    let Some(i) = best else {
        return Err(Error::NoConvergentHbar { curve });
    };
    let (mut best_h, mut best_r) = curve[i];
    if sweep.refine_steps > 0 && points.len() >= 3 {
        let lo = if i > 0 { curve[i - 1].0 } else { curve[i].0 };
        let hi = if i + 1 < curve.len() { curve[i + 1].0 } else { curve[i].0 };
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let eval = |h: f64| {
            let r = if h.abs() < sweep.exclude { f64::INFINITY } else { f(h) };
            if r.is_finite() { r } else { f64::INFINITY }
        };
        let (mut f1, mut f2) = rayon::join(|| eval(x1), || eval(x2));
        for _ in 0..sweep.refine_steps {
            for (h, r) in [(x1, f1), (x2, f2)] {
                if r < best_r {
                    best_h = h;
                    best_r = r;
                }
            }
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = eval(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = eval(x2);
            }
        }
        for (h, r) in [(x1, f1), (x2, f2)] {
            if r < best_r {
                best_h = h;
                best_r = r;
            }
        }
    }
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok((best_h, curve))
}

/// Residual after the probe iterations, infinite when the run diverges.
pub fn probe_residual(solver: &GhamSolver, hbar: f64, iterations: usize) -> f64 {
    match solver.run(hbar, iterations, 0.0) {
        Ok(run) if !matches!(run.stop, Stop::Diverged { .. }) => run.final_residual(),
        _ => f64::INFINITY,
    }
}

/// `ħ` minimising the residual after `sweep.probe_iterations`, and the
/// sampled curve.
pub fn optimize_hbar(solver: &GhamSolver, sweep: &HbarSweep) -> Result<(f64, Vec<(f64, f64)>)> {
    minimize_curve(|h| probe_residual(solver, h, sweep.probe_iterations), sweep)
}

//! Assembly of variable-coefficient linear operators and their
//! boundary-bordered, almost-banded systems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{
    conversion_chain, diff_operator, multiplication_operator, BandedOp, ChebCoeffs,
};

/// Endpoint of the domain `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Left,
    Right,
}

impl Endpoint {
    pub fn x(self) -> f64 {
        match self {
            Endpoint::Left => -1.0,
            Endpoint::Right => 1.0,
        }
    }

    pub fn from_x(x: f64) -> Option<Self> {
        if x == -1.0 {
            Some(Endpoint::Left)
        } else if x == 1.0 {
            Some(Endpoint::Right)
        } else {
            None
        }
    }
}

/// `weight · u^(derivative_order)(point)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFunctional {
    pub point: Endpoint,
    pub derivative_order: usize,
    pub weight: f64,
}

impl BoundaryFunctional {
    pub fn new(point: Endpoint, derivative_order: usize) -> Self {
        Self {
            point,
            derivative_order,
            weight: 1.0,
        }
    }

    /// Value of the functional on a Chebyshev series.
    pub fn apply(&self, u: &[f64]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(j, &c)| c * cheb_derivative_at_endpoint(j, self.derivative_order, self.point))
            .sum::<f64>()
            * self.weight
    }
}

/// `T_j^(d)(±1)` in closed form: `T_j^(d)(1) = Π_{k<d} (j² − k²)/(2k + 1)`.
pub fn cheb_derivative_at_endpoint(j: usize, d: usize, point: Endpoint) -> f64 {
    let jj = (j * j) as f64;
    let mut v = 1.0;
    for k in 0..d {
        let kf = k as f64;
        v *= (jj - kf * kf) / (2.0 * kf + 1.0);
    }
    match point {
        Endpoint::Right => v,
        Endpoint::Left if (j + d) % 2 == 0 => v,
        Endpoint::Left => -v,
    }
}

/// `a_N(x) u^(N) + … + a_1(x) u' + a_0(x) u` with Chebyshev coefficient functions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    coeffs: Vec<ChebCoeffs>,
}

impl LinearOperator {
    /// `coeffs[k]` multiplies the k-th derivative.
    pub fn new(coeffs: Vec<ChebCoeffs>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::Assembly("operator order must be at least 1".into()));
        }
        if coeffs.last().is_some_and(ChebCoeffs::is_zero) {
            return Err(Error::Assembly("leading coefficient is identically zero".into()));
        }
        Ok(Self { coeffs })
    }

    /// `c_N u^(N) + … + c_0 u` with constant coefficients.
    pub fn constant(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| ChebCoeffs::constant(c)).collect())
    }

    /// The zero operator of the given order; terms are added with
    /// [`add_term`](Self::add_term). Unlike [`new`](Self::new) the leading
    /// coefficient may vanish, so it is only meant for operators that are
    /// applied, not inverted.
    pub fn zero(order: usize) -> Self {
        Self {
            coeffs: vec![ChebCoeffs::zeros(1); order.max(1) + 1],
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(ChebCoeffs::is_zero)
    }

    pub fn coeff(&self, k: usize) -> &ChebCoeffs {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[ChebCoeffs] {
        &self.coeffs
    }

    /// Adds `a(x) u^(k)`; `k` must not exceed the order.
    pub fn add_term(&mut self, k: usize, a: &ChebCoeffs) {
        assert!(k <= self.order(), "term order exceeds operator order");
        self.coeffs[k] = self.coeffs[k].add(a);
    }

    pub fn max_coeff_len(&self) -> usize {
        self.coeffs.iter().map(ChebCoeffs::len).max().unwrap_or(1)
    }

    /// Every coefficient function cut to at most `n` modes.
    pub fn capped(&self, n: usize) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| if c.len() > n { c.resized(n) } else { c.clone() })
                .collect(),
        }
    }
}

/// Linear boundary value problem `L u = f`, `B u = c` on `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBvp {
    pub operator: LinearOperator,
    pub rhs: ChebCoeffs,
    pub boundary: Vec<BoundaryFunctional>,
    pub values: Vec<f64>,
}

impl LinearBvp {
    pub fn new(
        operator: LinearOperator,
        rhs: ChebCoeffs,
        boundary: Vec<BoundaryFunctional>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let order = operator.order();
        if boundary.len() != order {
            return Err(Error::Assembly(format!(
                "an order-{order} problem needs {order} boundary conditions, got {}",
                boundary.len()
            )));
        }
        if values.len() != boundary.len() {
            return Err(Error::DimensionMismatch {
                expected: boundary.len(),
                got: values.len(),
            });
        }
        if let Some(b) = boundary.iter().find(|b| b.derivative_order >= order) {
            return Err(Error::Assembly(format!(
                "boundary derivative order {} must be below the problem order {order}",
                b.derivative_order
            )));
        }
        Ok(Self {
            operator,
            rhs,
            boundary,
            values,
        })
    }

    /// Coefficient functions cut to at most `n` modes.
    pub fn capped(&self, n: usize) -> Self {
        Self {
            operator: self.operator.capped(n),
            rhs: if self.rhs.len() > n {
                self.rhs.resized(n)
            } else {
                self.rhs.clone()
            },
            boundary: self.boundary.clone(),
            values: self.values.clone(),
        }
    }

    pub fn order(&self) -> usize {
        self.operator.order()
    }
}

/// Square system with `K` dense boundary rows on top of a banded core.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostBandedMatrix {
    n: usize,
    dense_rows: Vec<Vec<f64>>,
    core: BandedOp,
}

impl AlmostBandedMatrix {
    pub fn new(dense_rows: Vec<Vec<f64>>, core: BandedOp) -> Result<Self> {
        let n = core.n_cols();
        if dense_rows.len() + core.n_rows() != n {
            return Err(Error::Assembly(format!(
                "{} dense rows plus {} core rows do not make a square system of size {n}",
                dense_rows.len(),
                core.n_rows()
            )));
        }
        if let Some(r) = dense_rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.len(),
            });
        }
        Ok(Self {
            n,
            dense_rows,
            core,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            dense_rows: Vec::new(),
            core: BandedOp::identity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of dense boundary rows.
    pub fn k(&self) -> usize {
        self.dense_rows.len()
    }

    pub fn dense_rows(&self) -> &[Vec<f64>] {
        &self.dense_rows
    }

    /// Banded rows `K..n`; core row `r` is global row `K + r`.
    pub fn core(&self) -> &BandedOp {
        &self.core
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let k = self.k();
        if i < k {
            self.dense_rows[i][j]
        } else {
            self.core.get(i - k, j)
        }
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut out: Vec<f64> = self
            .dense_rows
            .iter()
            .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect();
        out.extend(self.core.apply(v)?);
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, r) in self.dense_rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        let k = self.k();
        for (i, j, v) in self.core.entries() {
            m[(k + i, j)] = v;
        }
        m
    }

    pub fn nnz(&self) -> usize {
        let dense: usize = self
            .dense_rows
            .iter()
            .map(|r| r.iter().filter(|&&v| v != 0.0).count())
            .sum();
        dense + self.core.nnz()
    }
}

/// Stored nonzeros over `n²`, boundary rows included.
pub fn nnz_fraction(m: &AlmostBandedMatrix) -> f64 {
    m.nnz() as f64 / (m.n as f64 * m.n as f64)
}

/// The `n × n` section of the operator, mapping Chebyshev coefficients to
/// coefficients in the `C^(N)` basis:
/// `M_N[a_N] D_N + Σ_{λ=1}^{N−1} S_{N−1}⋯S_λ M_λ[a_λ] D_λ + S_{N−1}⋯S_0 M_0[a_0]`.
pub fn assemble_operator(op: &LinearOperator, n: usize) -> Result<BandedOp> {
    let order = op.order();
    if n <= order {
        return Err(Error::DegenerateOperator { order, n });
    }
    if let Some(c) = op.coeffs.iter().find(|c| c.len() > n) {
        return Err(Error::CoefficientTooRich { len: c.len(), n });
    }
    // padding keeps the truncated products equal to the exact section
    let big = n + 2 * order + op.max_coeff_len() + 2;
    let mut total = BandedOp::zeros(big, big);
    for (lambda, a) in op.coeffs.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let mut term = multiplication_operator(lambda, a, big)?;
        if lambda > 0 {
            term = term.matmul(&diff_operator(lambda, big)?)?;
        }
        if lambda < order {
            term = conversion_chain(lambda, order, big)?.matmul(&term)?;
        }
        total.axpy(1.0, &term)?;
    }
    let mut l = total.truncated(n, n);
    l.prune();
    Ok(l)
}

/// Dense `K × n` block of boundary functionals applied to Chebyshev coefficients.
pub fn boundary_rows(b: &[BoundaryFunctional], n: usize) -> Result<Vec<Vec<f64>>> {
    b.iter()
        .map(|f| {
            if f.derivative_order >= n {
                return Err(Error::BoundaryOrder {
                    order: f.derivative_order,
                    n,
                });
            }
            Ok((0..n)
                .map(|j| f.weight * cheb_derivative_at_endpoint(j, f.derivative_order, f.point))
                .collect())
        })
        .collect()
}

/// `f` converted to the `C^(N)` basis and cut to `rows` entries.
pub fn convert_rhs(f: &[f64], order: usize, rows: usize) -> Result<Vec<f64>> {
    let len = f.len().max(rows).max(2);
    let mut padded = f.to_vec();
    padded.resize(len, 0.0);
    let chain = conversion_chain(0, order, len)?;
    let mut out = chain.apply(&padded)?;
    out.truncate(rows);
    Ok(out)
}

/// Boundary-bordered system `[B; P_{n−K} L]` and right-hand side
/// `[c; P_{n−K} S_{N−1}⋯S_0 f]`.
pub fn assemble_system(p: &LinearBvp, n: usize) -> Result<(AlmostBandedMatrix, Vec<f64>)> {
    let k = p.boundary.len();
    if k != p.order() {
        return Err(Error::Assembly(format!(
            "expected {} boundary conditions, got {k}",
            p.order()
        )));
    }
    let l = assemble_operator(&p.operator, n)?;
    let rows = boundary_rows(&p.boundary, n)?;
    let core = l.truncated(n - k, n);
    let mut rhs = p.values.clone();
    rhs.extend(convert_rhs(p.rhs.as_slice(), p.order(), n - k)?);
    Ok((AlmostBandedMatrix::new(rows, core)?, rhs))
}

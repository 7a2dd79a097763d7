//! Nonlinear boundary value problems
//! `Σ a_k(x) u^(k) + Σ_t c_t(x) Π_i u^(d_i) = ψ(x)`, `B u = c`, on `[−1, 1]`,
//! and the auxiliary linear operators built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::assembly::{assemble_system, BoundaryFunctional, Endpoint, LinearBvp, LinearOperator};
use crate::error::{Error, Result};
use crate::linsolve::factorize;
use crate::spectral::{
    derivative_into, integrate_series, ChebCoeffs, ChebTransform, COEFF_TRUNCATION,
};

/// `coeff(x) · Π u^(factors[i])`, quadratic or cubic.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearTerm {
    coeff: ChebCoeffs,
    factors: Vec<usize>,
}

impl NonlinearTerm {
    pub fn new(coeff: ChebCoeffs, factors: Vec<usize>) -> Result<Self> {
        if !(2..=3).contains(&factors.len()) {
            return Err(Error::Assembly(format!(
                "nonlinear terms must have 2 or 3 factors, got {}",
                factors.len()
            )));
        }
        Ok(Self { coeff, factors })
    }

    pub fn constant(c: f64, factors: &[usize]) -> Result<Self> {
        Self::new(ChebCoeffs::constant(c), factors.to_vec())
    }

    pub fn coeff(&self) -> &ChebCoeffs {
        &self.coeff
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn max_order(&self) -> usize {
        self.factors.iter().copied().max().unwrap_or(0)
    }

    /// Index of the factor kept as the operator slot when the others are
    /// frozen: the highest derivative, last one on ties.
    fn lead_index(&self) -> usize {
        let m = self.max_order();
        self.factors.iter().rposition(|&d| d == m).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearBvp {
    linear: LinearOperator,
    psi: ChebCoeffs,
    boundary: Vec<BoundaryFunctional>,
    values: Vec<f64>,
    terms: Vec<NonlinearTerm>,
    params: BTreeMap<String, f64>,
    frozen: Option<Vec<NonlinearTerm>>,
}

impl NonlinearBvp {
    /// An empty `terms` list is accepted; the problem is then linear and the
    /// iteration reduces to a fixed-point scheme for it.
    pub fn new(
        linear: LinearOperator,
        psi: ChebCoeffs,
        boundary: Vec<BoundaryFunctional>,
        values: Vec<f64>,
        terms: Vec<NonlinearTerm>,
    ) -> Result<Self> {
        let order = linear.order();
        LinearBvp::new(linear.clone(), psi.clone(), boundary.clone(), values.clone())?;
        check_term_orders(&terms, order)?;
        Ok(Self {
            linear,
            psi,
            boundary,
            values,
            terms,
            params: BTreeMap::new(),
            frozen: None,
        })
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    /// Overrides the terms used to build the frozen-coefficient operator `L4`.
    /// In each term every factor but the last is frozen at the reference
    /// solution; the last factor is the operator slot.
    pub fn with_frozen_terms(mut self, terms: Vec<NonlinearTerm>) -> Result<Self> {
        check_term_orders(&terms, self.order())?;
        self.frozen = Some(terms);
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.linear.order()
    }

    pub fn linear(&self) -> &LinearOperator {
        &self.linear
    }

    pub fn psi(&self) -> &ChebCoeffs {
        &self.psi
    }

    pub fn boundary(&self) -> &[BoundaryFunctional] {
        &self.boundary
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terms(&self) -> &[NonlinearTerm] {
        &self.terms
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// The linear part with the original boundary data.
    pub fn linear_bvp(&self) -> LinearBvp {
        LinearBvp::new(
            self.linear.clone(),
            self.psi.clone(),
            self.boundary.clone(),
            self.values.clone(),
        )
        .expect("validated at construction")
    }

    /// `max |B u − c|`.
    pub fn boundary_violation(&self, u: &[f64]) -> f64 {
        self.boundary
            .iter()
            .zip(&self.values)
            .fold(0.0, |m, (f, c)| m.max((f.apply(u) - c).abs()))
    }

    /// Terms frozen into `L4`, each with its operator slot last.
    fn frozen_terms(&self) -> Vec<NonlinearTerm> {
        if let Some(t) = &self.frozen {
            return t.clone();
        }
        self.terms
            .iter()
            .map(|t| {
                let lead = t.lead_index();
                let mut f: Vec<usize> = t
                    .factors
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != lead)
                    .map(|(_, &d)| d)
                    .collect();
                f.push(t.factors[lead]);
                NonlinearTerm {
                    coeff: t.coeff.clone(),
                    factors: f,
                }
            })
            .collect()
    }
}

fn check_term_orders(terms: &[NonlinearTerm], order: usize) -> Result<()> {
    for t in terms {
        if t.max_order() > order {
            return Err(Error::Assembly(format!(
                "nonlinear factor of order {} exceeds problem order {order}",
                t.max_order()
            )));
        }
    }
    Ok(())
}

/// Flow between moving porous walls:
/// `y'''' + α((x+1)/4 y''' + 3/4 y'') + Re(½ y y''' − ¼ y' y'') = 0`,
/// `y(−1) = 0, y''(−1) = 0, y(1) = 1, y'(1) = 0`.
pub fn porous_wall(alpha: f64, re: f64) -> NonlinearBvp {
    let linear = LinearOperator::new(vec![
        ChebCoeffs::constant(0.0),
        ChebCoeffs::constant(0.0),
        ChebCoeffs::constant(0.75 * alpha),
        ChebCoeffs::new(vec![0.25 * alpha, 0.25 * alpha]).expect("finite"),
        ChebCoeffs::constant(1.0),
    ])
    .expect("leading coefficient is one");
    let boundary = vec![
        BoundaryFunctional::new(Endpoint::Left, 0),
        BoundaryFunctional::new(Endpoint::Left, 2),
        BoundaryFunctional::new(Endpoint::Right, 0),
        BoundaryFunctional::new(Endpoint::Right, 1),
    ];
    let terms = vec![
        NonlinearTerm::constant(0.5 * re, &[0, 3]).expect("quadratic"),
        NonlinearTerm::constant(-0.25 * re, &[1, 2]).expect("quadratic"),
    ];
    // ½Re(ŷ0 y''' − ŷ0' y'')
    let frozen = vec![
        NonlinearTerm::constant(0.5 * re, &[0, 3]).expect("quadratic"),
        NonlinearTerm::constant(-0.5 * re, &[1, 2]).expect("quadratic"),
    ];
    NonlinearBvp::new(
        linear,
        ChebCoeffs::constant(0.0),
        boundary,
        vec![0.0, 0.0, 1.0, 0.0],
        terms,
    )
    .and_then(|p| p.with_frozen_terms(frozen))
    .expect("well-formed registry problem")
    .with_param("alpha", alpha)
    .with_param("re", re)
}

/// Names of the built-in auxiliary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AuxTag {
    /// Highest derivative of the linear part only.
    L1,
    /// The full linear part.
    L2,
    /// `L2` plus every nonlinear term with its lower factors replaced by one.
    L3,
    /// `L2` plus every nonlinear term with its lower factors frozen at a
    /// reference solution.
    L4,
}

impl AuxTag {
    pub const ALL: [AuxTag; 4] = [AuxTag::L1, AuxTag::L2, AuxTag::L3, AuxTag::L4];

    /// Builds the operator; `L4` first solves for its reference solution at
    /// resolution `n`.
    pub fn resolve(self, p: &NonlinearBvp, n: usize) -> Result<AuxOperator> {
        Ok(match self {
            AuxTag::L1 => AuxOperator::L1,
            AuxTag::L2 => AuxOperator::L2,
            AuxTag::L3 => AuxOperator::L3,
            AuxTag::L4 => AuxOperator::L4(reference_solution(p, n)?),
        })
    }
}

impl fmt::Display for AuxTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AuxTag::L1 => "L1",
            AuxTag::L2 => "L2",
            AuxTag::L3 => "L3",
            AuxTag::L4 => "L4",
        };
        f.write_str(s)
    }
}

impl FromStr for AuxTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L1" => Ok(AuxTag::L1),
            "L2" => Ok(AuxTag::L2),
            "L3" => Ok(AuxTag::L3),
            "L4" => Ok(AuxTag::L4),
            _ => Err(Error::InvalidConfig(format!("unknown auxiliary operator `{s}`"))),
        }
    }
}

/// The auxiliary linear operator of the homotopy.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxOperator {
    L1,
    L2,
    L3,
    /// Carries the reference solution its coefficients are frozen at.
    L4(ChebCoeffs),
    Custom(LinearOperator),
}

impl AuxOperator {
    pub fn label(&self) -> String {
        match self {
            AuxOperator::L1 => "L1".into(),
            AuxOperator::L2 => "L2".into(),
            AuxOperator::L3 => "L3".into(),
            AuxOperator::L4(_) => "L4".into(),
            AuxOperator::Custom(_) => "custom".into(),
        }
    }

    /// The operator with coefficient functions cut to at most `n` modes.
    pub fn operator(&self, p: &NonlinearBvp, n: usize) -> Result<LinearOperator> {
        let order = p.order();
        let op = match self {
            AuxOperator::L1 => {
                let mut c = vec![ChebCoeffs::constant(0.0); order + 1];
                c[order] = p.linear.coeff(order).clone();
                LinearOperator::new(c)?
            }
            AuxOperator::L2 => p.linear.clone(),
            AuxOperator::L3 => {
                let mut op = p.linear.clone();
                for t in &p.terms {
                    op.add_term(t.max_order(), &t.coeff);
                }
                op
            }
            AuxOperator::L4(reference) => {
                let mut op = p.linear.clone();
                let grid = Grid::new(n.max(order + 2))?;
                let derivs = grid.derivative_values(reference.as_slice(), order);
                for t in p.frozen_terms() {
                    let (slot, frozen) = t.factors.split_last().expect("two or more factors");
                    let mut vals = grid.values(t.coeff.as_slice());
                    for &d in frozen {
                        for (v, w) in vals.iter_mut().zip(&derivs[d]) {
                            *v *= w;
                        }
                    }
                    op.add_term(*slot, &grid.coeffs(&vals)?);
                }
                op
            }
            AuxOperator::Custom(op) => {
                if op.order() != order {
                    return Err(Error::DimensionMismatch {
                        expected: order,
                        got: op.order(),
                    });
                }
                op.clone()
            }
        };
        Ok(op.capped(n))
    }
}

/// Reference solution for `L4`: the linear part solved with the full
/// boundary data.
pub fn reference_solution(p: &NonlinearBvp, n: usize) -> Result<ChebCoeffs> {
    let (a, rhs) = assemble_system(&p.linear_bvp().capped(n), n)?;
    let u = factorize(&a)?.solve(&rhs)?;
    Ok(ChebCoeffs::new(u)?.truncated(COEFF_TRUNCATION))
}

/// Values of an `m`-point Chebyshev grid and the transforms onto it.
#[derive(Debug, Clone)]
pub struct Grid {
    t: ChebTransform,
}

impl Grid {
    pub fn new(m: usize) -> Result<Self> {
        Ok(Self {
            t: ChebTransform::new(m)?,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn transform(&self) -> &ChebTransform {
        &self.t
    }

    /// Grid values of a series of any length; modes beyond the grid alias.
    pub fn values(&self, c: &[f64]) -> Vec<f64> {
        let m = self.t.len();
        if c.len() <= m {
            return self.t.coeffs_to_vals(c);
        }
        let period = 2 * (m - 1);
        let mut folded = vec![0.0; m];
        for (j, &cj) in c.iter().enumerate() {
            let r = j % period;
            folded[if r < m { r } else { period - r }] += cj;
        }
        self.t.coeffs_to_vals(&folded)
    }

    /// Chebyshev coefficients of grid values, trailing modes below
    /// [`COEFF_TRUNCATION`] dropped.
    pub fn coeffs(&self, values: &[f64]) -> Result<ChebCoeffs> {
        Ok(ChebCoeffs::new(self.t.vals_to_coeffs(values))?.truncated(COEFF_TRUNCATION))
    }

    /// Values of `u, u', …, u^(max_order)`.
    pub fn derivative_values(&self, u: &[f64], max_order: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(max_order + 1);
        let mut c = u.to_vec();
        let mut next = vec![0.0; c.len()];
        for k in 0..=max_order {
            out.push(self.values(&c));
            if k < max_order {
                derivative_into(&c, &mut next);
                std::mem::swap(&mut c, &mut next);
            }
        }
        out
    }
}

/// Evaluates `N[u] − ψ` for one problem on a fixed grid, with the problem's
/// coefficient functions sampled once.
#[derive(Debug, Clone)]
pub struct DefectEvaluator {
    grid: Grid,
    order: usize,
    linear: Vec<Option<Vec<f64>>>,
    terms: Vec<(Vec<f64>, Vec<usize>)>,
    psi: Vec<f64>,
}

impl DefectEvaluator {
    pub fn new(p: &NonlinearBvp, m: usize) -> Result<Self> {
        let grid = Grid::new(m)?;
        let linear = p
            .linear
            .coeffs()
            .iter()
            .map(|a| (!a.is_zero()).then(|| grid.values(a.as_slice())))
            .collect();
        let terms = p
            .terms
            .iter()
            .map(|t| (grid.values(t.coeff.as_slice()), t.factors.clone()))
            .collect();
        let psi = grid.values(p.psi.as_slice());
        Ok(Self {
            grid,
            order: p.order(),
            linear,
            terms,
            psi,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Grid values of `N[u] − ψ`.
    pub fn defect(&self, u: &[f64]) -> Vec<f64> {
        let d = self.grid.derivative_values(u, self.order);
        let mut r: Vec<f64> = self.psi.iter().map(|v| -v).collect();
        for (k, a) in self.linear.iter().enumerate() {
            if let Some(a) = a {
                for ((r, a), u) in r.iter_mut().zip(a).zip(&d[k]) {
                    *r += a * u;
                }
            }
        }
        for (c, factors) in &self.terms {
            for (i, r) in r.iter_mut().enumerate() {
                *r += factors.iter().fold(c[i], |acc, &f| acc * d[f][i]);
            }
        }
        r
    }

    /// `∫_{−1}^{1} |N[u] − ψ| dx` by Clenshaw–Curtis quadrature.
    pub fn residual(&self, u: &[f64]) -> f64 {
        let r: Vec<f64> = self.defect(u).into_iter().map(f64::abs).collect();
        if r.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        integrate_series(&self.grid.t.vals_to_coeffs(&r))
    }
}

/// `∫ |N[u] − ψ|` over `[−1, 1]`, evaluated on a grid of `2n + 1` points.
pub fn residual(u: &ChebCoeffs, p: &NonlinearBvp, n: usize) -> Result<f64> {
    Ok(DefectEvaluator::new(p, 2 * n.max(2) + 1)?.residual(u.as_slice()))
}

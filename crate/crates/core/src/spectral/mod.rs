//! Chebyshev and Gegenbauer basis arithmetic.

mod banded;
mod operators;
mod transform;

pub use banded::BandedOp;
pub use operators::{
    conversion_chain, conversion_operator, diff_operator, eval_series, gegenbauer_eval,
    multiplication_operator,
};
pub use transform::{
    cheb_points, clenshaw_curtis_weights, dct1_direct, integrate_series, ChebTransform,
};

use crate::error::{Error, Result};

/// Relative magnitude below which trailing coefficients of a sampled
/// coefficient function are dropped.
pub const COEFF_TRUNCATION: f64 = 1e-14;

/// Coefficients in the Chebyshev `T` basis; index `j` multiplies `T_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebCoeffs(Vec<f64>);

impl ChebCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidResolution { n: 0, min: 1 });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("Chebyshev coefficients"));
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n.max(1)])
    }

    pub fn constant(c: f64) -> Self {
        Self(vec![c])
    }

    /// Samples `f` on `n` CGL points and keeps the modes above
    /// [`COEFF_TRUNCATION`] relative to the largest.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let x = cheb_points(n)?;
        let vals: Vec<f64> = x.iter().map(|&x| f(x)).collect();
        let c = ChebTransform::new(n)?.vals_to_coeffs(&vals);
        Ok(Self::new(c)?.truncated(COEFF_TRUNCATION))
    }

    /// Monomial coefficients `p_0 + p_1 x + …` converted to the `T` basis.
    pub fn from_monomials(p: &[f64]) -> Result<Self> {
        if p.is_empty() {
            return Ok(Self::zeros(1));
        }
        // x·T_0 = T_1, x·T_j = (T_{j−1} + T_{j+1})/2; Horner in the T basis
        let mut acc = vec![0.0; p.len()];
        for &pk in p.iter().rev() {
            let mut next = vec![0.0; p.len()];
            for (j, &a) in acc.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                if j == 0 {
                    next[1] += a;
                } else {
                    next[j - 1] += 0.5 * a;
                    if j + 1 < next.len() {
                        next[j + 1] += 0.5 * a;
                    }
                }
            }
            next[0] += pk;
            acc = next;
        }
        Self::new(acc)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_series(0, &self.0, x)
    }

    /// Drops trailing coefficients below `rel_tol` times the largest magnitude.
    pub fn truncated(&self, rel_tol: f64) -> Self {
        let cut = rel_tol * self.max_abs();
        let keep = self
            .0
            .iter()
            .rposition(|c| c.abs() > cut)
            .map_or(1, |p| p + 1);
        Self(self.0[..keep].to_vec())
    }

    /// Zero padded (or cut) to exactly `n` modes.
    pub fn resized(&self, n: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(n.max(1), 0.0);
        Self(v)
    }

    /// Coefficients of the derivative, same length.
    pub fn derivative(&self) -> Self {
        let mut d = vec![0.0; self.0.len()];
        derivative_into(&self.0, &mut d);
        Self(d)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.len().max(other.len());
        let mut v = vec![0.0; n];
        for (i, c) in self.0.iter().enumerate() {
            v[i] += c;
        }
        for (i, c) in other.0.iter().enumerate() {
            v[i] += c;
        }
        Self(v)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|c| c * s).collect())
    }
}

/// Writes the Chebyshev coefficients of the derivative of `c` into `out`.
pub fn derivative_into(c: &[f64], out: &mut [f64]) {
    let n = c.len();
    debug_assert_eq!(out.len(), n);
    out.iter_mut().for_each(|x| *x = 0.0);
    if n < 2 {
        return;
    }
    out[n - 2] = 2.0 * (n - 1) as f64 * c[n - 1];
    for k in (0..n.saturating_sub(2)).rev() {
        out[k] = out[k + 2] + 2.0 * (k + 1) as f64 * c[k + 1];
    }
    out[0] *= 0.5;
}

/// Coefficients in the Gegenbauer `C^(λ)` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GegenCoeffs {
    lambda: usize,
    coeffs: Vec<f64>,
}

impl GegenCoeffs {
    pub fn new(lambda: usize, coeffs: Vec<f64>) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::Assembly("Gegenbauer order must be positive".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("Gegenbauer coefficients"));
        }
        Ok(Self { lambda, coeffs })
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_series(self.lambda, &self.coeffs, x)
    }
}

/// Function values on the CGL grid, ordered as [`cheb_points`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues(Vec<f64>);

impl GridValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidResolution {
                n: values.len(),
                min: 2,
            });
        }
        Ok(Self(values))
    }

    pub fn sample(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(Self(cheb_points(n)?.into_iter().map(f).collect()))
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn vals_to_coeffs(v: &GridValues) -> Result<ChebCoeffs> {
    if v.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("grid values"));
    }
    ChebCoeffs::new(ChebTransform::new(v.n())?.vals_to_coeffs(&v.0))
}

pub fn coeffs_to_vals(c: &ChebCoeffs) -> Result<GridValues> {
    if c.len() < 2 {
        return Err(Error::InvalidResolution { n: c.len(), min: 2 });
    }
    if c.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Chebyshev coefficients"));
    }
    GridValues::new(ChebTransform::new(c.len())?.coeffs_to_vals(&c.0))
}

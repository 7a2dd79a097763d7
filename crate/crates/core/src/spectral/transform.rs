//! Chebyshev–Gauss–Lobatto point sets and the value/coefficient transform pair.
//!
//! Points are ordered by descending `x`: point `k` is `cos(πk/(n−1))`, so index 0
//! is `x = 1` and index `n−1` is `x = −1`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Below this size the transform is evaluated directly in O(n²).
const DIRECT_THRESHOLD: usize = 16;

/// The `n` Chebyshev–Gauss–Lobatto points, descending from 1 to −1.
pub fn cheb_points(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidResolution { n, min: 2 });
    }
    let m = (n - 1) as f64;
    // sin form keeps the set exactly antisymmetric and hits 0 exactly for odd n
    Ok((0..n)
        .map(|k| (PI * (m - 2.0 * k as f64) / (2.0 * m)).sin())
        .collect())
}

/// A reusable transform of fixed size between grid values and Chebyshev coefficients.
#[derive(Clone)]
pub struct ChebTransform {
    n: usize,
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for ChebTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChebTransform")
            .field("n", &self.n)
            .field("fast", &self.fft.is_some())
            .finish()
    }
}

impl ChebTransform {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidResolution { n, min: 2 });
        }
        let fft = if n >= DIRECT_THRESHOLD {
            let mut planner = FftPlanner::new();
            Some(planner.plan_fft_forward(2 * (n - 1)))
        } else {
            None
        };
        Ok(Self { n, fft })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Chebyshev coefficients of the degree-(n−1) interpolant through `values`.
    ///
    /// Panics if `values.len() != n`.
    pub fn vals_to_coeffs(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.n, "transform size mismatch");
        let n = self.n;
        let mut c = self.dct1(values);
        let scale = 1.0 / (n - 1) as f64;
        for v in c.iter_mut() {
            *v *= scale;
        }
        c[0] *= 0.5;
        c[n - 1] *= 0.5;
        c
    }

    /// Values at the grid points of the series with the given coefficients.
    ///
    /// `coeffs` may be shorter than `n` (implicit zero padding) but not longer.
    pub fn coeffs_to_vals(&self, coeffs: &[f64]) -> Vec<f64> {
        assert!(coeffs.len() <= self.n, "series longer than the grid");
        let n = self.n;
        let mut padded;
        let c = if coeffs.len() == n {
            coeffs
        } else {
            padded = vec![0.0; n];
            padded[..coeffs.len()].copy_from_slice(coeffs);
            &padded[..]
        };
        let h = self.dct1(c);
        let first = c[0];
        let last = c[n - 1];
        h.iter()
            .enumerate()
            .map(|(k, &hk)| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                0.5 * (hk + first + sign * last)
            })
            .collect()
    }

    /// Unnormalised DCT-I: `f_0 + (−1)^j f_{n−1} + 2 Σ_{k=1}^{n−2} f_k cos(πjk/(n−1))`.
    fn dct1(&self, f: &[f64]) -> Vec<f64> {
        match &self.fft {
            None => dct1_direct(f),
            Some(fft) => {
                let n = self.n;
                let m = 2 * (n - 1);
                let mut buf: Vec<Complex<f64>> = Vec::with_capacity(m);
                buf.extend(f.iter().map(|&x| Complex::new(x, 0.0)));
                buf.extend(f[1..n - 1].iter().rev().map(|&x| Complex::new(x, 0.0)));
                fft.process(&mut buf);
                buf[..n].iter().map(|z| z.re).collect()
            }
        }
    }
}

/// Direct O(n²) evaluation of the unnormalised DCT-I.
pub fn dct1_direct(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    if n == 1 {
        return vec![f[0]];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let mut s = f[0] + sign * f[n - 1];
            for (k, &fk) in f.iter().enumerate().take(n - 1).skip(1) {
                s += 2.0 * fk * (PI * (j * k) as f64 / m).cos();
            }
            s
        })
        .collect()
}

/// Clenshaw–Curtis quadrature weights on the `n` CGL points (direct formula).
pub fn clenshaw_curtis_weights(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidResolution { n, min: 2 });
    }
    let big_n = n - 1;
    let mut w = vec![0.0; n];
    for (k, wk) in w.iter_mut().enumerate() {
        let ck = if k == 0 || k == big_n { 1.0 } else { 2.0 };
        let mut s = 0.0;
        for j in 1..=big_n / 2 {
            let bj = if 2 * j == big_n { 1.0 } else { 2.0 };
            let jf = j as f64;
            s += bj / (4.0 * jf * jf - 1.0) * (2.0 * PI * (j * k) as f64 / big_n as f64).cos();
        }
        *wk = ck / big_n as f64 * (1.0 - s);
    }
    Ok(w)
}

/// `∫_{−1}^{1}` of the Chebyshev series with coefficients `c`.
pub fn integrate_series(c: &[f64]) -> f64 {
    c.iter()
        .enumerate()
        .step_by(2)
        .map(|(j, &cj)| {
            let jf = j as f64;
            cj * 2.0 / (1.0 - jf * jf)
        })
        .sum()
}

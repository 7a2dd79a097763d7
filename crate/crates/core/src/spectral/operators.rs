//! Sparse ultraspherical operators acting on coefficient vectors.
//!
//! Basis order `λ = 0` denotes the Chebyshev `T` basis; `λ ≥ 1` the Gegenbauer
//! `C^(λ)` basis.

use super::banded::BandedOp;
use super::ChebCoeffs;
use crate::error::{Error, Result};

/// `C_j^(λ)(x)` by the three-term recurrence.
pub fn gegenbauer_eval(lambda: usize, j: usize, x: f64) -> f64 {
    assert!(lambda >= 1, "Gegenbauer order must be positive");
    let l = lambda as f64;
    let mut prev = 1.0;
    if j == 0 {
        return prev;
    }
    let mut cur = 2.0 * l * x;
    for k in 1..j {
        let kf = k as f64;
        let next = (2.0 * (kf + l) * x * cur - (kf + 2.0 * l - 1.0) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Evaluates `Σ c_j φ_j(x)` by Clenshaw's algorithm, where `φ_j = T_j` for
/// `lambda == 0` and `φ_j = C_j^(λ)` otherwise.
pub fn eval_series(lambda: usize, c: &[f64], x: f64) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    if lambda == 0 {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &ck in c[1..].iter().rev() {
            let b0 = ck + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        return c[0] + x * b1 - b2;
    }
    // φ_{k+1} = α_k φ_k − β_k φ_{k−1}
    let l = lambda as f64;
    let alpha = |k: usize| 2.0 * (k as f64 + l) * x / (k as f64 + 1.0);
    let beta = |k: usize| (k as f64 + 2.0 * l - 1.0) / (k as f64 + 1.0);
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for k in (1..c.len()).rev() {
        let b0 = c[k] + alpha(k) * b1 - beta(k + 1) * b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + 2.0 * l * x * b1 - beta(1) * b2
}

/// `D_k`: Chebyshev coefficients to `C^(k)` coefficients of the k-th derivative.
pub fn diff_operator(k: usize, n: usize) -> Result<BandedOp> {
    if k == 0 || k >= n {
        return Err(Error::DegenerateOperator { order: k, n });
    }
    let scale = 2f64.powi(k as i32 - 1) * (1..k).map(|i| i as f64).product::<f64>();
    let mut op = BandedOp::zeros(n, n);
    for j in k..n {
        op.set(j - k, j, scale * j as f64);
    }
    Ok(op)
}

/// `S_λ`: coefficients in the `λ` basis to the same function in the `λ+1` basis.
pub fn conversion_operator(lambda: usize, n: usize) -> Result<BandedOp> {
    if n < 2 {
        return Err(Error::InvalidResolution { n, min: 2 });
    }
    let mut op = BandedOp::zeros(n, n);
    if lambda == 0 {
        op.set(0, 0, 1.0);
        for j in 1..n {
            op.set(j, j, 0.5);
        }
        for i in 0..n.saturating_sub(2) {
            op.set(i, i + 2, -0.5);
        }
    } else {
        let l = lambda as f64;
        for j in 0..n {
            op.set(j, j, l / (l + j as f64));
        }
        for i in 0..n.saturating_sub(2) {
            op.set(i, i + 2, -l / (l + (i + 2) as f64));
        }
    }
    Ok(op)
}

/// `S_{to−1} ⋯ S_from`; the identity when `from == to`.
pub fn conversion_chain(from: usize, to: usize, n: usize) -> Result<BandedOp> {
    assert!(from <= to, "conversion only raises the basis order");
    let mut op = BandedOp::identity(n);
    for lambda in from..to {
        op = conversion_operator(lambda, n)?.matmul(&op)?;
    }
    Ok(op)
}

/// Multiplication by `x` in the `λ` basis.
fn multiply_by_x(lambda: usize, n: usize) -> BandedOp {
    let mut op = BandedOp::zeros(n, n);
    if lambda == 0 {
        if n > 1 {
            op.set(1, 0, 1.0);
        }
        for j in 1..n {
            if j + 1 < n {
                op.set(j + 1, j, 0.5);
            }
            op.set(j - 1, j, 0.5);
        }
    } else {
        let l = lambda as f64;
        for j in 0..n {
            let jf = j as f64;
            if j + 1 < n {
                op.set(j + 1, j, (jf + 1.0) / (2.0 * (jf + l)));
            }
            if j >= 1 {
                op.set(j - 1, j, (jf + 2.0 * l - 1.0) / (2.0 * (jf + l)));
            }
        }
    }
    op
}

/// `M_λ[a]`: multiplication by the function with Chebyshev coefficients `a`,
/// acting on coefficient vectors in the `λ` basis.
///
/// Built as `Σ a_k T_k(X)` with `X` the multiplication-by-x operator, using
/// Clenshaw's recurrence on operators. The recurrence runs on a padded section so
/// that the returned `n × n` block is the exact section of the infinite operator.
pub fn multiplication_operator(lambda: usize, a: &ChebCoeffs, n: usize) -> Result<BandedOp> {
    let coeffs = a.as_slice();
    let len = coeffs.len();
    if len > n {
        return Err(Error::CoefficientTooRich { len, n });
    }
    if len == 1 {
        let mut op = BandedOp::identity(n);
        op.scale(coeffs[0]);
        op.prune();
        return Ok(op);
    }
    let big = n + len + 1;
    let x = multiply_by_x(lambda, big);
    let mut b1 = BandedOp::zeros(big, big);
    let mut b2 = BandedOp::zeros(big, big);
    for &ck in coeffs[1..].iter().rev() {
        let mut b0 = x.matmul(&b1)?;
        b0.scale(2.0);
        b0.axpy(-1.0, &b2)?;
        b0.axpy(ck, &BandedOp::identity(big))?;
        b2 = b1;
        b1 = b0;
    }
    let mut out = x.matmul(&b1)?;
    out.axpy(-1.0, &b2)?;
    out.axpy(coeffs[0], &BandedOp::identity(big))?;
    let mut out = out.truncated(n, n);
    out.prune();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_values() {
        assert_eq!(gegenbauer_eval(1, 0, 0.3), 1.0);
        assert_eq!(gegenbauer_eval(1, 1, 0.5), 1.0);
        assert!(gegenbauer_eval(1, 2, 0.5).abs() < 1e-15);
        // C_3^(2)(x) = 32x³ − 12x
        let x = 0.7;
        assert!((gegenbauer_eval(2, 3, x) - (32.0 * x * x * x - 12.0 * x)).abs() < 1e-13);
    }

    #[test]
    fn clenshaw_matches_termwise_sum() {
        let c = [0.3, -1.2, 0.5, 2.0, -0.7, 0.1];
        for lambda in 1..4 {
            for &x in &[-1.0, -0.4, 0.0, 0.9, 1.0] {
                let direct: f64 = c
                    .iter()
                    .enumerate()
                    .map(|(j, cj)| cj * gegenbauer_eval(lambda, j, x))
                    .sum();
                assert!((eval_series(lambda, &c, x) - direct).abs() < 1e-12);
            }
        }
        let t3 = |x: f64| 4.0 * x * x * x - 3.0 * x;
        assert!((eval_series(0, &[0.0, 0.0, 0.0, 1.0], 0.3) - t3(0.3)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_derivative_rejected() {
        assert!(diff_operator(4, 4).is_err());
        assert!(diff_operator(0, 4).is_err());
    }

    #[test]
    fn derivative_examples() {
        let d1 = diff_operator(1, 6).unwrap();
        let out = d1.apply(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let d2 = diff_operator(2, 6).unwrap();
        let out = d2.apply(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(out[1], 6.0);
        assert_eq!(out.iter().filter(|v| **v != 0.0).count(), 1);
        let out = d1.apply(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn conversion_examples() {
        let s0 = conversion_operator(0, 5).unwrap();
        assert_eq!(s0.apply(&[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap()[0], 1.0);
        let out = s0.apply(&[0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(out, vec![-0.5, 0.0, 0.5, 0.0, 0.0]);
        // T_2(0.3) = −0.82
        assert!((eval_series(1, &out, 0.3) + 0.82).abs() < 1e-15);
    }

    #[test]
    fn oversized_coefficient_rejected() {
        let a = ChebCoeffs::new(vec![1.0; 9]).unwrap();
        assert!(matches!(
            multiplication_operator(1, &a, 8),
            Err(Error::CoefficientTooRich { len: 9, n: 8 })
        ));
    }

    #[test]
    fn multiplication_by_one_and_x() {
        let one = ChebCoeffs::new(vec![1.0]).unwrap();
        assert_eq!(multiplication_operator(2, &one, 7).unwrap(), BandedOp::identity(7));
        let x = ChebCoeffs::new(vec![0.0, 1.0]).unwrap();
        let m = multiplication_operator(0, &x, 8).unwrap();
        for j in 1..7 {
            let mut e = vec![0.0; 8];
            e[j] = 1.0;
            let out = m.apply(&e).unwrap();
            assert_eq!(out[j - 1], 0.5);
            assert_eq!(out[j + 1], 0.5);
            assert_eq!(out.iter().filter(|v| **v != 0.0).count(), 2);
        }
    }
}

use gham::spectral::{
    cheb_points, conversion_chain, conversion_operator, diff_operator, eval_series,
    gegenbauer_eval, multiplication_operator, BandedOp, ChebCoeffs, ChebTransform,
};
use proptest::prelude::*;

fn coeff_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..=max_len)
}

fn dense_apply(op: &BandedOp, v: &[f64]) -> Vec<f64> {
    let d = op.to_dense();
    (0..d.nrows())
        .map(|i| (0..d.ncols()).map(|j| d[(i, j)] * v[j]).sum())
        .collect()
}

fn test_points() -> Vec<f64> {
    (0..32).map(|i| -1.0 + 2.0 * i as f64 / 31.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conversion_preserves_values(c in coeff_vec(24), lambda in 0usize..=3) {
        let n = c.len().max(2);
        let mut u = c.clone();
        u.resize(n, 0.0);
        let s = conversion_operator(lambda, n).unwrap().apply(&u).unwrap();
        for x in test_points() {
            let a = eval_series(lambda, &u, x);
            let b = eval_series(lambda + 1, &s, x);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "λ={} x={}: {} vs {}", lambda, x, a, b);
        }
    }

    #[test]
    fn multiplication_matches_pointwise_product(
        a in coeff_vec(6),
        u in coeff_vec(16),
        lambda in 0usize..=3,
    ) {
        let n = 24;
        let mut uu = u.clone();
        uu.resize(n, 0.0);
        // u given in the λ basis
        let m = multiplication_operator(lambda, &ChebCoeffs::new(a.clone()).unwrap(), n).unwrap();
        let out = m.apply(&uu).unwrap();
        for x in test_points() {
            let expect = eval_series(0, &a, x) * eval_series(lambda, &uu, x);
            let got = eval_series(lambda, &out, x);
            prop_assert!((got - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn multiplication_is_linear(a in coeff_vec(8), b in coeff_vec(8), lambda in 0usize..=3) {
        let n = 20;
        let ca = ChebCoeffs::new(a).unwrap();
        let cb = ChebCoeffs::new(b).unwrap();
        let sum = multiplication_operator(lambda, &ca.add(&cb), n).unwrap().to_dense();
        let parts = multiplication_operator(lambda, &ca, n).unwrap().to_dense()
            + multiplication_operator(lambda, &cb, n).unwrap().to_dense();
        let diff = (sum - parts).abs().max();
        prop_assert!(diff <= 1e-14 * 8.0, "{}", diff);
    }

    #[test]
    fn banded_apply_matches_dense(v in prop::collection::vec(-1.0f64..1.0, 30), k in 1usize..=4, a in coeff_vec(5)) {
        let n = 30;
        let ops = [
            diff_operator(k, n).unwrap(),
            conversion_operator(k - 1, n).unwrap(),
            conversion_chain(0, k, n).unwrap(),
            multiplication_operator(k, &ChebCoeffs::new(a).unwrap(), n).unwrap(),
        ];
        for op in &ops {
            let fast = op.apply(&v).unwrap();
            let slow = dense_apply(op, &v);
            let scale = op.to_dense().abs().max().max(1.0);
            for (x, y) in fast.iter().zip(&slow) {
                prop_assert!((x - y).abs() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn transform_round_trip(c in prop::collection::vec(-1.0f64..1.0, 2..80)) {
        let n = c.len();
        let t = ChebTransform::new(n).unwrap();
        let back = t.vals_to_coeffs(&t.coeffs_to_vals(&c));
        for (x, y) in back.iter().zip(&c) {
            prop_assert!((x - y).abs() <= 1e-13);
        }
    }

    #[test]
    fn transform_values_match_series(c in prop::collection::vec(-1.0f64..1.0, 2..40)) {
        let n = c.len();
        let vals = ChebTransform::new(n).unwrap().coeffs_to_vals(&c);
        for (v, x) in vals.iter().zip(cheb_points(n).unwrap()) {
            prop_assert!((v - eval_series(0, &c, x)).abs() <= 1e-13);
        }
    }
}

#[test]
fn least_squares_projection_recovers_t2() {
    // 2x² − 1 sampled on 9 points, fitted by least squares on the first 3 modes
    let x = cheb_points(9).unwrap();
    let a = nalgebra::DMatrix::from_fn(9, 3, |i, j| eval_series(0, &unit(j, 3), x[i]));
    let b = nalgebra::DVector::from_iterator(9, x.iter().map(|x| 2.0 * x * x - 1.0));
    let fit = a.svd(true, true).solve(&b, 1e-14).unwrap();
    let c = ChebTransform::new(9).unwrap().vals_to_coeffs(b.as_slice());
    for j in 0..3 {
        assert!((fit[j] - c[j]).abs() < 1e-14);
    }
    assert!((c[2] - 1.0).abs() < 1e-14);
    assert!(c.iter().enumerate().all(|(j, v)| j == 2 || v.abs() < 1e-14));
}

fn unit(j: usize, n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[j] = 1.0;
    e
}

#[test]
fn derivative_columns_match_repeated_differentiation() {
    // T_j^(k) = 2^{k−1}(k−1)! j C_{j−k}^(k)
    let n = 14;
    for k in 1..=4 {
        let d = diff_operator(k, n).unwrap();
        for j in k..n {
            let col = d.apply(&unit(j, n)).unwrap();
            let x = 0.37;
            let via_c = eval_series(k, &col, x);
            let direct = (0..k)
                .fold(ChebCoeffs::new(unit(j, n)).unwrap(), |c, _| c.derivative())
                .eval(x);
            assert!((col[j - k] * gegenbauer_eval(k, j - k, x) - via_c).abs() < 1e-12 * (1.0 + via_c.abs()));
            assert!((via_c - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }
}

#[test]
fn large_transform_round_trip() {
    for n in [17, 33, 257, 1025, 1000] {
        let t = ChebTransform::new(n).unwrap();
        let c: Vec<f64> = (0..n).map(|j| 1.0 / (1.0 + j as f64)).collect();
        let back = t.vals_to_coeffs(&t.coeffs_to_vals(&c));
        let err = back.iter().zip(&c).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-13, "n={n}: {err}");
    }
}

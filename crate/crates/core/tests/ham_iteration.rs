use gham::assembly::{assemble_system, BoundaryFunctional, Endpoint, LinearOperator};
use gham::ham::{expand_about, homogenize, optimize_hbar, GhamSolver, HbarSweep, Stop};
use gham::linsolve::{factorize, factorize_calls};
use gham::problem::{
    porous_wall, reference_solution, residual, AuxOperator, AuxTag, DefectEvaluator, NonlinearBvp,
    NonlinearTerm,
};
use gham::spectral::ChebCoeffs;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n).fold(0.0f64, |m, i| {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        m.max((x - y).abs())
    })
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn exact() -> ChebCoeffs {
    ChebCoeffs::from_fn(40, |x| 0.5 + 0.4 * (1.3 * x).sin() + 0.1 * x * x).unwrap()
}

/// Porous-wall operator and nonlinearity with data chosen so `exact()` solves it.
fn manufactured(re: f64) -> NonlinearBvp {
    let p = porous_wall(1.0, re);
    let u = exact();
    let zero_rhs = DefectEvaluator::new(&p, 64).unwrap();
    let n_u = zero_rhs.defect(u.as_slice());
    let psi = zero_rhs.grid().coeffs(&n_u).unwrap();
    let values = p.boundary().iter().map(|b| b.apply(u.as_slice())).collect();
    NonlinearBvp::new(
        p.linear().clone(),
        psi,
        p.boundary().to_vec(),
        values,
        p.terms().to_vec(),
    )
    .unwrap()
}

/// `u'' + α u' − u² = ψ`, Dirichlet data.
fn second_order_quadratic(alpha: f64) -> NonlinearBvp {
    NonlinearBvp::new(
        LinearOperator::constant(&[0.0, alpha, 1.0]).unwrap(),
        ChebCoeffs::constant(1.0),
        vec![
            BoundaryFunctional::new(Endpoint::Left, 0),
            BoundaryFunctional::new(Endpoint::Right, 0),
        ],
        vec![0.2, -0.1],
        vec![NonlinearTerm::constant(-1.0, &[0, 0]).unwrap()],
    )
    .unwrap()
}

fn tuned_run(p: &NonlinearBvp, tag: AuxTag, n: usize, iters: usize) -> gham::ham::HamRun {
    let aux = tag.resolve(p, n).unwrap();
    let solver = GhamSolver::new(p, &aux, n).unwrap();
    let (h, _) = optimize_hbar(&solver, &HbarSweep::default()).unwrap();
    solver.run(h, iters, 1e-13).unwrap()
}

#[test]
fn u0_carries_boundary_data() {
    let p = porous_wall(1.0, 10.0);
    for tag in AuxTag::ALL {
        let aux = tag.resolve(&p, 128).unwrap();
        let h = homogenize(&p, &aux, 128).unwrap();
        assert!(p.boundary_violation(h.u0.as_slice()) <= 1e-12, "{tag}");
    }
}

#[test]
fn expansion_reproduces_the_shifted_defect() {
    // N[v + u0] − ψ ≡ L_1[v] + N_1[v] − ψ_1 for any v
    let p = porous_wall(-2.0, 7.0);
    let u0 = reference_solution(&p, 64).unwrap();
    let hom = expand_about(&p, &u0, 64).unwrap();
    let shifted = NonlinearBvp::new(
        hom.l1.clone(),
        hom.psi1.clone(),
        p.boundary().to_vec(),
        vec![0.0; 4],
        hom.terms.clone(),
    )
    .unwrap();
    let v = ChebCoeffs::from_fn(24, |x| (0.7 * x).cos() - 0.3 * x * x * x).unwrap();
    let full = DefectEvaluator::new(&p, 96).unwrap().defect(v.add(&u0).as_slice());
    let split = DefectEvaluator::new(&shifted, 96).unwrap().defect(v.as_slice());
    assert!(max_diff(&full, &split) < 1e-11 * (1.0 + max_abs(&full)));
}

#[test]
fn zero_hbar_leaves_u0_unchanged() {
    let p = porous_wall(1.0, 10.0);
    let solver = GhamSolver::new(&p, &AuxOperator::L2, 64).unwrap();
    let run = solver.run(0.0, 5, 0.0).unwrap();
    assert_eq!(run.state.iterations_done, 5);
    for v in &run.state.history {
        assert!(v.is_zero());
    }
    assert!(max_diff(run.solution().as_slice(), solver.homogenized().u0.as_slice()) == 0.0);
}

#[test]
fn linear_problem_with_exact_operator_needs_one_step() {
    let p = NonlinearBvp::new(
        LinearOperator::constant(&[-1.0, 0.5, 2.0]).unwrap(),
        ChebCoeffs::from_fn(16, |x| x.exp()).unwrap(),
        vec![
            BoundaryFunctional::new(Endpoint::Left, 0),
            BoundaryFunctional::new(Endpoint::Right, 1),
        ],
        vec![1.0, -2.0],
        Vec::new(),
    )
    .unwrap();
    let solver = GhamSolver::new(&p, &AuxOperator::L2, 48).unwrap();
    let run = solver.run(-1.0, 3, 0.0).unwrap();
    assert!(run.state.residual_trace[0] < 1e-11, "{:?}", run.state.residual_trace);
    let direct = reference_solution(&p, 48).unwrap();
    let d = max_diff(run.solution().as_slice(), direct.as_slice());
    assert!(d < 1e-13, "{d:e}");
}

#[test]
fn linear_problem_converges_from_partial_operator() {
    // a(x)u'' + u' + u = ψ solved with only the top-order term as auxiliary
    let linear = LinearOperator::new(vec![
        ChebCoeffs::constant(1.0),
        ChebCoeffs::constant(1.0),
        ChebCoeffs::new(vec![8.0, 0.5]).unwrap(),
    ])
    .unwrap();
    let p = NonlinearBvp::new(
        linear,
        ChebCoeffs::from_fn(16, |x| (2.0 * x).sin()).unwrap(),
        vec![
            BoundaryFunctional::new(Endpoint::Left, 0),
            BoundaryFunctional::new(Endpoint::Right, 0),
        ],
        vec![0.3, 0.4],
        Vec::new(),
    )
    .unwrap();
    let solver = GhamSolver::new(&p, &AuxOperator::L1, 48).unwrap();
    let run = solver.run(-1.0, 200, 1e-13).unwrap();
    assert_eq!(run.stop, Stop::Converged);
    let direct = reference_solution(&p, 48).unwrap();
    assert!(max_diff(run.solution().as_slice(), direct.as_slice()) < 1e-12);
}

#[test]
fn iterates_satisfy_homogeneous_boundary_data() {
    let p = porous_wall(1.0, 10.0);
    for tag in AuxTag::ALL {
        let aux = tag.resolve(&p, 256).unwrap();
        let solver = GhamSolver::new(&p, &aux, 256).unwrap();
        let run = solver.run(-0.5, 30, 0.0).unwrap();
        for (m, v) in run.state.history.iter().enumerate() {
            for b in p.boundary() {
                let r = b.apply(v.as_slice());
                assert!(r.abs() <= 1e-12, "{tag} V_{m}: {r:e}");
            }
        }
        assert!(p.boundary_violation(run.solution().as_slice()) <= 1e-12);
    }
}

#[test]
fn partial_sum_matches_history() {
    let p = porous_wall(1.0, 10.0);
    let aux = AuxTag::L4.resolve(&p, 128).unwrap();
    let run = GhamSolver::new(&p, &aux, 128).unwrap().run(-1.1, 40, 0.0).unwrap();
    let again = run.state.recomputed_sum();
    assert!(max_diff(run.state.partial_sum.as_slice(), again.as_slice()) <= 1e-13);
}

#[test]
fn one_factorization_per_solver() {
    let p = porous_wall(1.0, 10.0);
    for tag in AuxTag::ALL {
        let aux = tag.resolve(&p, 128).unwrap();
        let before = factorize_calls();
        let solver = GhamSolver::new(&p, &aux, 128).unwrap();
        for h in [-0.3, -0.6, -1.0] {
            let run = solver.run(h, 20, 0.0).unwrap();
            assert_eq!(run.factorizations, 1);
        }
        assert_eq!(factorize_calls() - before, 1, "{tag}");
    }
}

#[test]
fn quadratic_pair_count_follows_floor_law() {
    let p = second_order_quadratic(0.0);
    let solver = GhamSolver::new(&p, &AuxOperator::L2, 32).unwrap();
    assert_eq!(solver.homogenized().terms.len(), 1);
    for m in [1usize, 2, 7, 12, 25] {
        let run = solver.run(-0.5, m, 0.0).unwrap();
        assert_eq!(run.state.iterations_done, m);
        assert_eq!(run.counter.pairs, m * m / 4, "M = {m}");
        assert_eq!(run.counter.squares, (m + 1) / 2);
    }
}

#[test]
fn residual_of_trivial_candidates() {
    let p = porous_wall(1.0, 10.0);
    let zero = ChebCoeffs::zeros(8);
    assert_eq!(residual(&zero, &p, 16).unwrap(), 0.0);
    assert_eq!(p.boundary_violation(zero.as_slice()), 1.0);

    let m = manufactured(10.0);
    assert!(residual(&exact(), &m, 64).unwrap() < 1e-12);
}

#[test]
fn aux_operators_solve_their_own_linear_problems() {
    let p = porous_wall(1.0, 10.0);
    let u = exact();
    for tag in AuxTag::ALL {
        let aux = tag.resolve(&p, 64).unwrap();
        let op = aux.operator(&p, 64).unwrap();
        let q = NonlinearBvp::new(op.clone(), ChebCoeffs::zeros(1), p.boundary().to_vec(), vec![0.0; 4], Vec::new())
            .unwrap();
        let f = DefectEvaluator::new(&q, 128).unwrap();
        let rhs = f.grid().coeffs(&f.defect(u.as_slice())).unwrap();
        let values = p.boundary().iter().map(|b| b.apply(u.as_slice())).collect();
        let bvp = gham::assembly::LinearBvp::new(op, rhs, p.boundary().to_vec(), values).unwrap();
        let (a, b) = assemble_system(&bvp.capped(64), 64).unwrap();
        let got = factorize(&a).unwrap().solve(&b).unwrap();
        assert!(max_diff(&got, u.as_slice()) < 1e-11, "{tag}");
    }
}

#[test]
fn manufactured_solution_recovered_with_every_operator() {
    let p = manufactured(4.0);
    for tag in AuxTag::ALL {
        let run = tuned_run(&p, tag, 64, 200);
        assert!(run.converged(), "{tag}: {:e}", run.best_residual());
        assert!(max_diff(run.solution().as_slice(), exact().as_slice()) < 1e-11, "{tag}");
    }
}

#[test]
fn operators_agree_on_the_porous_wall_solution() {
    let p = porous_wall(1.0, 10.0);
    let runs: Vec<_> = AuxTag::ALL.iter().map(|&t| tuned_run(&p, t, 64, 200)).collect();
    for r in &runs {
        assert!(r.converged());
    }
    for r in &runs[1..] {
        assert!(max_diff(r.solution().as_slice(), runs[0].solution().as_slice()) < 1e-8);
    }
}

#[test]
fn frozen_operator_converges_for_more_hbar() {
    let p = porous_wall(1.0, 10.0);
    let convergent = |tag: AuxTag| {
        let aux = tag.resolve(&p, 64).unwrap();
        let solver = GhamSolver::new(&p, &aux, 64).unwrap();
        HbarSweep::default()
            .points()
            .into_iter()
            .filter(|&h| {
                let r = solver.run(h, 25, 0.0).unwrap();
                !matches!(r.stop, Stop::Diverged { .. }) && r.final_residual() < 1.0
            })
            .count()
    };
    assert!(convergent(AuxTag::L4) > convergent(AuxTag::L1));
}

#[test]
fn residual_decreases_until_the_floor() {
    let p = porous_wall(1.0, 10.0);
    let run = tuned_run(&p, AuxTag::L4, 128, 40);
    let trace = &run.state.residual_trace;
    for w in trace.windows(2) {
        if w[0] > 1e-12 {
            assert!(w[1] < w[0], "{trace:?}");
        }
    }
}

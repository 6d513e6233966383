use std::f64::consts::PI;

use pmc_core::ambient::{
    ConformalFactor, CurvatureSample, EuclideanFactor, FSpec, InversePower, PrescribedCurvature,
    PsiSpec,
};
use pmc_core::geometry::ambient_mean_curvature;
use pmc_core::iteration::smooth_perturbation;
use pmc_core::penalized::{
    continuation_solve, jacobian, residual, select_parameters, solve_aux, solve_aux_from,
    zero_order_derivative, AuxProblem, NewtonConfig, PenaltyParams, Target,
};
use pmc_core::scenarios::{bundled, euclidean_radial};
use pmc_core::sphere::{divergence, gradient, Grid, SpherePoint};
use pmc_core::surface::SurfaceSpec;
use pmc_core::{build_grid, BarrierPair, PmcError, RadialGraph, Result};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_grid(dim: usize) -> Grid {
    if dim == 1 {
        build_grid(1, &[32]).unwrap()
    } else {
        build_grid(2, &[8, 16]).unwrap()
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    assert!(g(a) * g(b) < 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(a) * g(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Random log-radius: smooth low modes plus node noise around `base`.
fn random_state(rng: &mut ChaCha8Rng, grid: &Grid, base: f64) -> Vec<f64> {
    let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.15..0.15));
    grid.points()
        .iter()
        .map(|p| {
            let smooth = c[0] * p.theta.cos()
                + c[1] * (2.0 * p.theta).sin()
                + c[2] * p.lambda.cos() * p.theta.sin()
                + c[3] * p.lambda.sin();
            base.ln() + smooth + rng.gen_range(-0.03..0.03)
        })
        .collect()
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for dim in [1, 2] {
        let grid = small_grid(dim);
        let families: [(PsiSpec, FSpec, f64); 4] = [
            (PsiSpec::Euclidean, FSpec::InversePower { beta: dim as f64, power: 2.0 }, 1.0),
            (PsiSpec::PoincareBall, FSpec::PoincareProfile { n: dim, r0: 0.5 }, 0.5),
            (
                PsiSpec::LinearTilt { eps: 0.2 },
                FSpec::Manufactured {
                    surface: if dim == 1 {
                        SurfaceSpec::Cosine { base: 1.0, amp: 0.1, mode: 2 }
                    } else {
                        SurfaceSpec::Sectoral { base: 1.0, amp: 0.1 }
                    },
                    psi: PsiSpec::LinearTilt { eps: 0.2 },
                },
                1.0,
            ),
            (PsiSpec::Constant { value: 0.3 }, FSpec::Constant { value: 1.5 }, 1.0),
        ];
        for trial in 0..20 {
            let (psi_spec, f_spec, base) = &families[trial % families.len()];
            let psi = psi_spec.build(dim);
            let f = f_spec.build(dim);
            let upper = RadialGraph::constant(&grid, 1.2 * base).unwrap();
            let lower = RadialGraph::constant(&grid, 0.6 * base).unwrap();
            let params = PenaltyParams::new(50.0 / (base * base), 3.0 / base, 1.2 * base).unwrap();
            let problem =
                AuxProblem::new(f.as_ref(), psi.as_ref(), &upper, &lower, params).unwrap();
            let phi = random_state(&mut rng, &grid, *base);
            let jac = jacobian(&phi, &problem, &grid).unwrap().to_dense();
            let h = 1e-6;
            let n = grid.len();
            let (mut diff, mut norm) = (0.0, 0.0);
            for c in 0..n {
                let mut plus = phi.clone();
                let mut minus = phi.clone();
                plus[c] += h;
                minus[c] -= h;
                let rp = residual(&plus, &problem, &grid).unwrap();
                let rm = residual(&minus, &problem, &grid).unwrap();
                for r in 0..n {
                    let fd = (rp[r] - rm[r]) / (2.0 * h);
                    diff += (fd - jac[r][c]).powi(2);
                    norm += jac[r][c].powi(2);
                }
            }
            let rel = (diff / norm).sqrt();
            assert!(rel <= 1e-6, "dim {dim} trial {trial}: {rel}");
        }
    }
}

#[test]
fn flat_linearization_is_laplacian_plus_diagonal() {
    for dim in [1, 2] {
        let grid = small_grid(dim);
        let f = InversePower { beta: 2.0, power: 2.0 };
        let u0 = RadialGraph::constant(&grid, 1.3).unwrap();
        let lo = RadialGraph::constant(&grid, 0.5).unwrap();
        let params = PenaltyParams::new(50.0, 3.0, 1.3).unwrap();
        let problem = AuxProblem::new(&f, &EuclideanFactor, &u0, &lo, params).unwrap();
        let phi = vec![0.1; grid.len()];
        let jac = jacobian(&phi, &problem, &grid).unwrap();
        let d0 = zero_order_derivative(&phi, &problem, &grid).unwrap();
        let w: Vec<f64> = grid
            .points()
            .iter()
            .map(|p| (2.0 * p.theta).sin() + p.lambda.cos())
            .collect();
        let lap = divergence(&gradient(&w, &grid).unwrap().raise(&grid), &grid).unwrap();
        let jw = jac.mul_vec(&w);
        for i in 0..grid.len() {
            assert!((jw[i] - (-lap[i] + d0[i] * w[i])).abs() <= 1e-12 * (1.0 + jw[i].abs()));
        }
    }
}

#[test]
fn aux_root_matches_bisection() {
    let oracle = bisect(
        |u| 2.0 / u - 2.0 / (u * u) + 50.0 * (-3.0 * u).exp() * (u - 1.5),
        1.2,
        1.3,
    );
    assert!((oracle - 1.24097).abs() < 1e-5);
    for dim in [1, 2] {
        let grid = small_grid(dim);
        let f = InversePower { beta: dim as f64, power: 2.0 };
        let g = |u: f64| dim as f64 * (1.0 / u - 1.0 / (u * u)) + 50.0 * (-3.0 * u).exp() * (u - 1.5);
        let root = bisect(g, 1.0, 1.5);
        let u0 = RadialGraph::constant(&grid, 1.5).unwrap();
        let lo = RadialGraph::constant(&grid, 0.7).unwrap();
        let params = PenaltyParams::new(50.0, 3.0, 1.5).unwrap();
        let problem = AuxProblem::new(&f, &EuclideanFactor, &u0, &lo, params).unwrap();
        let res = solve_aux(&problem, &NewtonConfig::default(), &grid).unwrap();
        let u = res.graph().unwrap();
        assert!(u.u().iter().all(|x| (x - root).abs() <= 1e-9), "dim {dim}");
        assert!(res.residual_sup <= 1e-10);
        assert!(res.active_lower.is_empty() && res.active_upper.is_empty());
    }
}

#[test]
fn exact_supersolution_is_a_fixed_point() {
    for dim in [1, 2] {
        let grid = small_grid(dim);
        let f = InversePower { beta: dim as f64, power: 2.0 };
        let one = RadialGraph::constant(&grid, 1.0).unwrap();
        let lo = RadialGraph::constant(&grid, 0.7).unwrap();
        let params = PenaltyParams::new(50.0, 3.0, 1.0).unwrap();
        let problem = AuxProblem::new(&f, &EuclideanFactor, &one, &lo, params).unwrap();
        let res = solve_aux(&problem, &NewtonConfig::default(), &grid).unwrap();
        assert!(res.graph().unwrap().u().iter().all(|x| (x - 1.0).abs() <= 1e-12));
    }
}

#[test]
fn swapped_obstacles_are_rejected() {
    let grid = small_grid(1);
    let f = InversePower { beta: 1.0, power: 2.0 };
    let a = RadialGraph::constant(&grid, 0.7).unwrap();
    let b = RadialGraph::constant(&grid, 1.5).unwrap();
    let params = PenaltyParams::new(50.0, 3.0, 1.5).unwrap();
    let err = AuxProblem::new(&f, &EuclideanFactor, &a, &b, params).unwrap_err();
    assert!(matches!(err, PmcError::ObstaclesNotOrdered { .. }), "{err}");
}

#[test]
fn random_starts_agree_on_every_scenario() {
    let config = NewtonConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in bundled() {
        let grid = s.default_grid().unwrap();
        let inst = s.instantiate(&grid).unwrap();
        let problem = AuxProblem::new(
            inst.f.as_ref(),
            inst.psi.as_ref(),
            inst.barriers.upper(),
            inst.barriers.lower(),
            inst.params,
        )
        .unwrap();
        let reference = solve_aux(&problem, &config, &grid).unwrap();
        let lo = inst.barriers.lower().phi();
        let hi = inst.barriers.upper().phi();
        for _ in 0..10 {
            // smooth starts: white noise at the node scale drives |Dφ| into the
            // degenerate range of the operator, where Newton stalls
            let shape = smooth_perturbation(&mut rng, 1.0, &grid);
            let start: Vec<f64> = (0..grid.len())
                .map(|i| lo[i] + 0.5 * (1.0 + shape[i]) * (hi[i] - lo[i]))
                .collect();
            let other = solve_aux_from(&problem, &config, &grid, Some(&start)).unwrap();
            let gap = reference
                .phi
                .iter()
                .zip(other.phi.iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(gap <= 10.0 * config.tol, "{}: {gap}", s.name);
        }
    }
}

/// exp(-(1 - cos(θ - c))/w): a smooth periodic bump centred at c.
fn bump(theta: f64, centre: f64, width: f64) -> f64 {
    (-(1.0 - (theta - centre).cos()) / width).exp()
}

#[test]
fn complementarity_with_both_obstacles_active() {
    let grid = build_grid(1, &[64]).unwrap();
    let f = InversePower { beta: 1.0, power: 2.0 };
    let upper = RadialGraph::from_u(
        grid.points()
            .iter()
            .map(|p| 1.5 - 0.6 * bump(p.theta, 0.0, 0.05))
            .collect(),
    )
    .unwrap();
    let lower = RadialGraph::from_u(
        grid.points()
            .iter()
            .map(|p| 0.7 + 0.6 * bump(p.theta, PI, 0.05))
            .collect(),
    )
    .unwrap();
    let params = PenaltyParams::new(25.0, 3.0, 1.5).unwrap();
    let problem = AuxProblem::new(&f, &EuclideanFactor, &upper, &lower, params).unwrap();
    let config = NewtonConfig::default();
    let res = solve_aux(&problem, &config, &grid).unwrap();
    assert!(!res.active_lower.is_empty() && !res.active_upper.is_empty());
    let (lo, hi) = (lower.phi(), upper.phi());
    let tol = config.tol;
    for i in 0..grid.len() {
        let (phi, r) = (res.phi[i], res.residual[i]);
        assert!(phi >= lo[i] - 1e-12 && phi <= hi[i] + 1e-12);
        if res.active_lower.contains(&i) {
            assert_eq!(phi, lo[i]);
            assert!(r >= -tol, "node {i}: {r}");
        } else if res.active_upper.contains(&i) {
            assert_eq!(phi, hi[i]);
            assert!(r <= tol, "node {i}: {r}");
        } else {
            assert!(r.abs() <= tol, "node {i}: {r}");
        }
    }
}

#[test]
fn coincident_obstacles_freeze_nodes() {
    let grid = build_grid(1, &[32]).unwrap();
    let f = InversePower { beta: 1.0, power: 2.0 };
    let upper = RadialGraph::constant(&grid, 1.5).unwrap();
    let lower = RadialGraph::from_u(
        (0..32).map(|i| if i == 5 { 1.5 } else { 0.7 }).collect(),
    )
    .unwrap();
    let params = PenaltyParams::new(50.0, 3.0, 1.5).unwrap();
    let problem = AuxProblem::new(&f, &EuclideanFactor, &upper, &lower, params).unwrap();
    let res = solve_aux(&problem, &NewtonConfig::default(), &grid).unwrap();
    assert_eq!(res.frozen, vec![5]);
    assert_eq!(res.phi[5], 1.5f64.ln());
}

#[test]
fn continuation_endpoints() {
    for dim in [1, 2] {
        let grid = small_grid(dim);
        let s = euclidean_radial(dim, dim as f64).unwrap();
        let inst = s.instantiate(&grid).unwrap();
        let problem = AuxProblem::new(
            inst.f.as_ref(),
            inst.psi.as_ref(),
            inst.barriers.upper(),
            inst.barriers.lower(),
            inst.params,
        )
        .unwrap();
        let config = NewtonConfig::default();

        let f0 = ambient_mean_curvature(problem.upper, problem.psi, &grid).unwrap();
        let start = AuxProblem {
            target: Target::Blend { f: inst.f.as_ref(), f0: &f0, t: 0.0 },
            ..problem
        };
        let at_zero = solve_aux(&start, &config, &grid).unwrap();
        for (a, b) in at_zero.phi.iter().zip(problem.upper.phi().iter()) {
            assert!((a - b).abs() <= 1e-12);
        }

        let direct = solve_aux(&problem, &config, &grid).unwrap();
        let path = continuation_solve(&problem, inst.f.as_ref(), 4, &config, &grid).unwrap();
        for (a, b) in direct.phi.iter().zip(path.phi.iter()) {
            assert!((a - b).abs() <= 10.0 * config.tol);
        }
    }
    let grid = small_grid(1);
    let inst = euclidean_radial(1, 1.0).unwrap().instantiate(&grid).unwrap();
    let problem = AuxProblem::new(
        inst.f.as_ref(),
        inst.psi.as_ref(),
        inst.barriers.upper(),
        inst.barriers.lower(),
        inst.params,
    )
    .unwrap();
    assert!(continuation_solve(&problem, inst.f.as_ref(), 0, &NewtonConfig::default(), &grid).is_err());
}

#[test]
fn continuation_rescues_steep_target() {
    // f = r^-16 is steep at the solution; four Newton steps are not enough from
    // the supersolution but suffice for every leg of a five-step path
    let grid = build_grid(1, &[64]).unwrap();
    let f = InversePower { beta: 1.0, power: 16.0 };
    let upper = RadialGraph::from_u(
        grid.points()
            .iter()
            .map(|p| 1.5 * (1.0 + 0.1 * p.theta.cos()))
            .collect(),
    )
    .unwrap();
    let lower = RadialGraph::constant(&grid, 0.7).unwrap();
    let params = PenaltyParams::new(50.0, 2.0, 1.65).unwrap();
    let problem = AuxProblem::new(&f, &EuclideanFactor, &upper, &lower, params).unwrap();
    let tight = NewtonConfig { max_iter: 4, ..NewtonConfig::default() };
    let cold = solve_aux(&problem, &tight, &grid).unwrap_err();
    assert!(matches!(cold, PmcError::NewtonDidNotConverge(_)), "{cold}");
    let path = continuation_solve(&problem, &f, 5, &tight, &grid).unwrap();
    let reference = solve_aux(&problem, &NewtonConfig::default(), &grid).unwrap();
    for (a, b) in path.phi.iter().zip(reference.phi.iter()) {
        assert!((a - b).abs() <= 10.0 * tight.tol);
    }
}

#[test]
fn failed_leg_names_its_parameter() {
    // a weak penalty cannot dominate the radially constant f₀, so the first
    // interior leg is not monotone and stalls
    let grid = build_grid(2, &[8, 16]).unwrap();
    let f = InversePower { beta: 2.0, power: 8.0 };
    let upper = RadialGraph::constant(&grid, 1.65).unwrap();
    let lower = RadialGraph::constant(&grid, 0.7).unwrap();
    let params = PenaltyParams::new(50.0, 3.0, 1.65).unwrap();
    let problem = AuxProblem::new(&f, &EuclideanFactor, &upper, &lower, params).unwrap();
    match continuation_solve(&problem, &f, 5, &NewtonConfig::default(), &grid) {
        Err(PmcError::ContinuationFailed { t, .. }) => assert!(t > 0.0 && t < 1.0),
        other => panic!("expected a failed leg, got {other:?}"),
    }
}

/// f = a + b·r, so that sup|Df| = |b|.
#[derive(Debug)]
struct Affine {
    a: f64,
    b: f64,
}

impl PrescribedCurvature for Affine {
    fn eval(&self, _x: SpherePoint, r: f64) -> Result<CurvatureSample> {
        Ok(CurvatureSample {
            value: self.a + self.b * r,
            dr: self.b,
            tangential: [0.0; 2],
        })
    }
}

fn barriers(grid: &Grid, lo: f64, hi: f64) -> BarrierPair {
    BarrierPair::new(
        RadialGraph::constant(grid, lo).unwrap(),
        RadialGraph::constant(grid, hi).unwrap(),
    )
    .unwrap()
}

#[test]
fn parameter_heuristic_on_radial_slab() {
    let grid = small_grid(2);
    let f = InversePower { beta: 2.0, power: 2.0 };
    let choice = select_parameters(&f, &EuclideanFactor, &barriers(&grid, 0.7, 1.5), &grid).unwrap();
    assert!(choice.params.gamma.is_finite() && choice.params.gamma > 0.0);
    assert!(choice.params.mu >= 1.0);
    assert!((choice.params.mu - (2.0 * choice.c + 1.0)).abs() < 1e-12);
    assert!(choice.monotone && choice.realized_eps0 >= choice.params.eps0_floor);

    // a constant target: c = 1 + |f|
    let constant = Affine { a: 1.7, b: 0.0 };
    let choice =
        select_parameters(&constant, &EuclideanFactor, &barriers(&grid, 0.7, 1.5), &grid).unwrap();
    assert!((choice.c - 2.7).abs() < 1e-12);
    let expect = (4.0 * 2.7 * 2.7f64).ln() + choice.params.mu * 1.5 - 0.7f64.ln();
    assert!((choice.params.gamma.ln() - expect).abs() < 1e-9);
}

#[test]
fn heuristic_penalty_keeps_solves_monotone() {
    for dim in [1, 2] {
        let grid = small_grid(dim);
        let f = InversePower { beta: dim as f64, power: 2.0 };
        let pair = barriers(&grid, 0.7, 1.5);
        let choice = select_parameters(&f, &EuclideanFactor, &pair, &grid).unwrap();
        let problem =
            AuxProblem::new(&f, &EuclideanFactor, pair.upper(), pair.lower(), choice.params).unwrap();
        let res = solve_aux(&problem, &NewtonConfig::default(), &grid).unwrap();
        assert!(res.min_zero_order >= choice.params.eps0_floor, "dim {dim}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn doubling_df_never_lowers_gamma(a in -3.0f64..3.0, b in 0.0f64..4.0) {
        let grid = small_grid(1);
        let pair = barriers(&grid, 0.7, 1.5);
        let g1 = select_parameters(&Affine { a, b }, &EuclideanFactor, &pair, &grid);
        let g2 = select_parameters(&Affine { a, b: 2.0 * b }, &EuclideanFactor, &pair, &grid);
        match (g1, g2) {
            (Ok(x), Ok(y)) => prop_assert!(y.params.gamma >= x.params.gamma),
            // overflow can only move from the smaller to the larger derivative
            (Ok(_), Err(_)) | (Err(_), Err(_)) => {}
            (Err(_), Ok(_)) => prop_assert!(false, "smaller Df overflowed"),
        }
    }

    #[test]
    fn penalty_is_zero_at_contact_and_signed(
        gamma in 0.1f64..100.0,
        mu in 0.1f64..5.0,
        u in 0.1f64..2.0,
        u0 in 0.1f64..2.0,
    ) {
        let p = PenaltyParams::new(gamma, mu, 2.0).unwrap();
        prop_assert_eq!(p.penalty(u0, u0), 0.0);
        prop_assert!(p.penalty(u, u0) * (u - u0) >= 0.0);
        prop_assert!(p.eps0_floor > 0.0);
    }
}

#[test]
fn conformal_factor_is_object_safe() {
    let psi: Box<dyn ConformalFactor> = PsiSpec::PoincareBall.build(2);
    let s = psi.eval(small_grid(2).point(0), 0.5).unwrap();
    assert!((s.value - (2.0f64 / 0.75).ln()).abs() < 1e-14);
}

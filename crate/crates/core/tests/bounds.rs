use std::f64::consts::PI;
use std::sync::Arc;

use ocp_bounds::algorithms::golden_section;
use ocp_bounds::field::{for_each_point, PointFn, QuadPoint};
use ocp_bounds::ocp::{project, MajorantParts, BETA_MAX, BETA_MIN};
use ocp_bounds::problems::{
    err_sq_reference, majorant_unconstrained, solve_unconstrained_system, NuMode, ReferenceEvaluator,
};
use ocp_bounds::verify::{random_control, random_function};
use ocp_bounds::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mesh(n: usize) -> Arc<Mesh> {
    Arc::new(unit_square_mesh(n).unwrap())
}

fn sine() -> Analytic {
    Analytic::with_gradient(
        |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
        |x| [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()],
    )
}

fn sine_flux() -> AnalyticFlux {
    AnalyticFlux::new(
        |x| [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()],
        |x| -2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin(),
    )
}

fn sine_load() -> Analytic {
    Analytic::new(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin())
}

fn data(f: Analytic, y_d: Analytic, alpha: f64, set: AdmissibleSet) -> ProblemData {
    ProblemData::new(f, y_d, Analytic::zero(), alpha, set).unwrap()
}

fn problem(d: ProblemData, n: usize, p: usize) -> DiscreteProblem {
    DiscreteProblem::new(d, Discretization::new(mesh(n), p, Some(p)).unwrap()).unwrap()
}

fn box_problem(n: usize, p: usize) -> (ManufacturedCase, DiscreteProblem) {
    let case = build_case(ManufacturedParams::box_constrained()).unwrap();
    let prob = problem(case.problem_data().unwrap(), n, p);
    (case, prob)
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(17)
}

#[test]
fn zero_load_gives_zero_state() {
    let prob = problem(data(Analytic::zero(), Analytic::zero(), 1.0, AdmissibleSet::Unconstrained), 4, 2);
    let y = prob.solve_state(&prob.zero_control()).unwrap();
    assert!(y.coefficients().iter().all(|&c| c == 0.0));
}

#[test]
fn sine_state_energy() {
    let prob = problem(data(sine_load(), Analytic::zero(), 1.0, AdmissibleSet::Unconstrained), 50, 2);
    let y = prob.solve_state(&prob.zero_control()).unwrap();
    let g = prob.stiffness().quadratic_form(y.coefficients());
    assert!((g - PI * PI / 2.0).abs() < 1e-3, "{g}");
}

#[test]
fn manufactured_state_converges() {
    let case = build_case(ManufacturedParams::box_constrained()).unwrap();
    let mut errors = Vec::new();
    for n in [8, 16] {
        let prob = problem(case.problem_data().unwrap(), n, 1);
        let u = FeFunction::interpolate(prob.control_space(), &case.u_opt).unwrap();
        let y = prob.solve_state(&u).unwrap();
        let mut e = 0.0;
        for_each_point(prob.mesh(), prob.rule(), |p, w| {
            let (a, b) = (y.gradient_at(p), case.y_opt.eval_gradient(p.x));
            e += w * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
        });
        errors.push(e.sqrt());
    }
    assert!(errors[1] < 0.6 * errors[0], "{errors:?}");
}

#[test]
fn energy_of_galerkin_state() {
    let (_, prob) = box_problem(8, 2);
    let mut r = rng();
    let v = random_control(prob.control_space(), -3.0, 3.0, &mut r).unwrap();
    let y = prob.solve_state(&v).unwrap();
    let ey = prob.energy_discrete(&y, &v).unwrap();
    assert!((ey + prob.stiffness().quadratic_form(y.coefficients())).abs() < 1e-9);
    // quadrature path agrees with the algebraic one
    assert!((prob.energy(&y, &v) - ey).abs() < 1e-9);
    assert_eq!(prob.energy(&Analytic::zero(), &v), 0.0);
    for _ in 0..10 {
        let w = random_function(prob.state_space(), 0.5, &mut r).unwrap();
        assert!(ey <= prob.energy_discrete(&w, &v).unwrap());
    }
}

#[test]
fn minorant_properties() {
    let (case, prob) = box_problem(8, 1);
    let mut r = rng();
    let v = random_control(prob.control_space(), -3.0, 3.0, &mut r).unwrap();
    let y = prob.solve_state(&v).unwrap();
    assert!(prob.minorant_sq(&y, &y, &v).abs() < 1e-12);
    let z = random_function(prob.state_space(), 1.0, &mut r).unwrap();
    let m = prob.minorant_sq(&z, &y, &v);
    let d = prob.stiffness().quadratic_form(z.combine(1.0, &y, -1.0).coefficients());
    assert!((m - d).abs() < 1e-9 * (1.0 + d));

    // Against the exact state (refined P2 reference), any q gives a lower bound.
    let reference = ReferenceEvaluator::new(prob.data(), prob.mesh()).unwrap();
    let y_ref = reference.state(&v).unwrap();
    let fine = reference.fine_problem();
    let fine_v = ocp_bounds::problems::prolong_control(&v, fine.control_space()).unwrap();
    let exact = fine.minorant_sq(&case.y_d, &y_ref, &fine_v);
    for _ in 0..5 {
        let q = random_function(prob.state_space(), 1.0, &mut r).unwrap();
        assert!(prob.minorant_sq(&case.y_d, &q, &v) <= exact + 1e-9);
    }
}

#[test]
fn majorant_exact_flux_vanishes() {
    let prob = problem(data(sine_load(), sine(), 1.0, AdmissibleSet::Unconstrained), 4, 1);
    let zero = DiscreteProblem::zero_field();
    let m = prob.majorant_sq(&sine(), &sine_flux(), 0.7, &zero).unwrap();
    assert!(m.abs() < 1e-20, "{m}");
    // y = y_d and zero residual: the upper bound equals J(v) = 0 for any beta
    for beta in [1e-3, 1.0, 50.0] {
        assert!(prob.cost_upper(&zero, &sine_flux(), beta).unwrap().abs() < 1e-20);
    }
    assert!(prob.majorant_sq(&sine(), &sine_flux(), 0.0, &zero).is_err());
}

#[test]
fn majorant_dominates_minorant_and_is_efficient() {
    let (_, prob) = box_problem(16, 2);
    let mut r = rng();
    let v = random_control(prob.control_space(), -3.0, 3.0, &mut r).unwrap();
    let y = prob.solve_state(&v).unwrap();
    let reference = ReferenceEvaluator::new(prob.data(), prob.mesh()).unwrap();
    let fine = reference.fine_problem();
    let y_ref = reference.state(&v).unwrap();
    // |||y(v) - y_h|||^2 from the reference, through the energy identity
    let fine_v = ocp_bounds::problems::prolong_control(&v, fine.control_space()).unwrap();
    // (energies are domain integrals, so each is taken on its own mesh)
    let err = prob.energy(&y, &v) - fine.energy(&y_ref, &fine_v);

    let mut beta = 1.0;
    let mut tau = prob.tau_hat_for(&y, &v, beta).unwrap();
    for _ in 0..10 {
        beta = prob.majorant_parts_quadrature(&y, &tau, &v).beta_hat(prob.data().c_omega());
        tau = prob.tau_hat_for(&y, &v, beta).unwrap();
    }
    let maj = prob.majorant_sq(&y, &tau, beta, &v).unwrap();
    assert!(maj >= err, "{maj} < {err}");
    assert!(maj <= 10.0 * err, "{maj} vs {err}");

    for _ in 0..5 {
        let t = random_function(tau.space(), 1.0, &mut r).unwrap();
        let z = random_function(prob.state_space(), 1.0, &mut r).unwrap();
        assert!(prob.majorant_sq(&z, &t, 0.5, &v).unwrap() >= prob.minorant_sq(&z, &y, &v));
    }
}

#[test]
fn algebraic_and_quadrature_paths_agree() {
    let (_, prob) = box_problem(6, 2);
    let mut r = rng();
    let v = random_control(prob.control_space(), -3.0, 3.0, &mut r).unwrap();
    let q = random_function(prob.state_space(), 1.0, &mut r).unwrap();
    let a = prob.cost_lower_discrete(&v, &q).unwrap();
    assert!((a - prob.cost_lower(&v, &q)).abs() < 1e-9 * a.abs().max(1.0));
    let tau = random_function(prob.flux_space().unwrap(), 1.0, &mut r).unwrap();
    let b = prob.cost_upper_discrete(&v, &tau, 0.4).unwrap();
    assert!((b - prob.cost_upper(&v, &tau, 0.4).unwrap()).abs() < 1e-9 * b);
    assert!((prob.control_misfit_sq(&v) - prob.misfit_sq(&v)).abs() < 1e-10);
}

#[test]
fn cost_lower_cases() {
    let (case, prob) = box_problem(8, 1);
    assert!(prob.cost_lower(&case.u_d, &case.y_d).abs() < 1e-12);

    // With y_d = 0 the lower bound at the Galerkin state is the discrete cost.
    let p0 = problem(data(sine_load(), Analytic::zero(), 0.1, AdmissibleSet::Unconstrained), 8, 1);
    let mut r = rng();
    let v = random_control(p0.control_space(), -1.0, 1.0, &mut r).unwrap();
    let (j, y) = p0.j_h(&v).unwrap();
    let direct = p0.stiffness().quadratic_form(y.coefficients()) + 0.1 * p0.misfit_sq(&v);
    assert!((j - direct).abs() < 1e-10 * direct);
    for _ in 0..10 {
        let q = random_function(p0.state_space(), 0.3, &mut r).unwrap();
        assert!(p0.cost_lower_discrete(&v, &q).unwrap() <= j + 1e-12);
    }

    // J_lower(u, q) <= J(u) for any q.
    let jref = reference_cost(&case, 1000).unwrap().j_opt;
    let q = prob.solve_state(&FeFunction::interpolate(prob.control_space(), &case.u_opt).unwrap()).unwrap();
    assert!(prob.cost_lower(&case.u_opt, &q) <= jref);
}

#[test]
fn v_hat_lower_properties() {
    let p0 = problem(data(sine_load(), Analytic::zero(), 0.5, AdmissibleSet::constant_box(-1.0, 1.0).unwrap()), 6, 1);
    let zero_state = FeFunction::zeros(p0.state_space());
    let hat = p0.v_hat_lower(&zero_state).unwrap();
    assert!(hat.to_control().unwrap().coefficients().iter().all(|&c| c == 0.0));

    let (case, prob) = box_problem(6, 1);
    let unc = DiscreteProblem::new(
        prob.data().clone().with_admissible(AdmissibleSet::Unconstrained),
        prob.discretization().clone(),
    )
    .unwrap();
    let mut r = rng();
    let q = random_function(unc.state_space(), 1.0, &mut r).unwrap();
    let c = unc.v_hat_lower(&q).unwrap().to_control().unwrap();
    let m = unc.mesh();
    for t in 0..m.n_triangles() {
        for i in 0..3 {
            let mut bary = [0.0; 3];
            bary[i] = 1.0;
            let x = m.vertices()[m.triangles()[t][i]];
            let p = QuadPoint { cell: t, bary, x };
            let want = (case.y_d.eval(x) - q.value_at(&p)) / 0.05;
            assert!((c.coefficients()[3 * t + i] - want).abs() < 1e-9 * want.abs().max(1.0));
        }
    }

    let hat = prob.v_hat_lower(&q).unwrap();
    let best = prob.cost_lower(&hat, &q);
    for _ in 0..30 {
        let w = random_control(prob.control_space(), -3.0, 3.0, &mut r).unwrap();
        assert!(best <= prob.cost_lower(&w, &q));
    }
}

#[test]
fn v_hat_upper_and_ball() {
    let (_, prob) = box_problem(6, 1);
    let mut r = rng();
    let v = random_control(prob.control_space(), -3.0, 3.0, &mut r).unwrap();
    let tau = prob.tau_hat(&v, 0.5).unwrap();
    let hat = prob.v_hat_upper(&tau, 0.5).unwrap();
    let best = prob.cost_upper(&hat, &tau, 0.5).unwrap();
    for _ in 0..30 {
        let w = random_control(prob.control_space(), -3.0, 3.0, &mut r).unwrap();
        assert!(best <= prob.cost_upper(&w, &tau, 0.5).unwrap());
    }
    assert!(prob.v_hat_upper(&tau, 0.0).is_err());

    let ball = DiscreteProblem::new(
        prob.data().clone().with_admissible(AdmissibleSet::ball(0.2).unwrap()),
        prob.discretization().clone(),
    )
    .unwrap();
    let q = prob.solve_state(&v).unwrap();
    let hat = ball.v_hat_lower(&q).unwrap();
    assert!(hat.scale() < 1.0);
    assert!((ball.l2_norm(&hat) - 0.2).abs() < 1e-12);
    let best = ball.cost_lower(&hat, &q);
    for _ in 0..30 {
        let w = project(&random_control(ball.control_space(), -3.0, 3.0, &mut r).unwrap(), ball.data().admissible())
            .unwrap();
        assert!(best <= ball.cost_lower(&w, &q) + 1e-12);
    }
}

#[test]
fn tau_hat_cases() {
    let p0 = problem(data(Analytic::zero(), Analytic::zero(), 1.0, AdmissibleSet::Unconstrained), 4, 2);
    let tau = p0.tau_hat(&p0.zero_control(), 1.0).unwrap();
    assert!(tau.coefficients().iter().all(|c| c.abs() < 1e-14));
    assert!(p0.tau_hat(&p0.zero_control(), -1.0).is_err());

    let (_, prob) = box_problem(6, 1);
    let mut r = rng();
    let v = random_control(prob.control_space(), -3.0, 3.0, &mut r).unwrap();
    let tau = prob.tau_hat(&v, 2.0).unwrap();
    let best = prob.cost_upper_discrete(&v, &tau, 2.0).unwrap();
    for k in 0..30 {
        let d = random_function(tau.space(), 0.5f64.powi(k % 10), &mut r).unwrap();
        assert!(best <= prob.cost_upper_discrete(&v, &tau.combine(1.0, &d, 1.0), 2.0).unwrap());
    }
}

#[test]
fn beta_hat_cases() {
    let c = 0.3;
    let balanced = MajorantParts { flux_sq: 4.0 * c * c, residual_sq: 4.0 };
    assert!((balanced.beta_hat(c) - 1.0).abs() < 1e-15);
    assert_eq!(MajorantParts { flux_sq: 1.0, residual_sq: 0.0 }.beta_hat(c), BETA_MIN);
    assert_eq!(MajorantParts { flux_sq: 0.0, residual_sq: 1.0 }.beta_hat(c), BETA_MAX);
    assert_eq!(MajorantParts { flux_sq: 0.0, residual_sq: 0.0 }.beta_hat(c), 1.0);

    let (_, prob) = box_problem(6, 1);
    let v = prob.zero_control();
    let tau = prob.tau_hat(&v, 1.0).unwrap();
    let b = prob.beta_hat(&v, &tau).unwrap();
    let j = |beta: f64| prob.cost_upper_discrete(&v, &tau, beta).unwrap();
    for f in [0.1, 0.5, 2.0, 10.0] {
        assert!(j(b) <= j(b * f));
    }
    let g = golden_section(|t| j(t.max(1e-12)), 10.0 * b, 1e-8);
    assert!((g - b).abs() < 1e-5 * b, "{g} vs {b}");
}

#[test]
fn gradient_direction_cases() {
    let p0 = problem(data(Analytic::zero(), Analytic::zero(), 1.0, AdmissibleSet::Unconstrained), 4, 1);
    let v = p0.zero_control();
    let y = p0.solve_state(&v).unwrap();
    assert!(p0.gradient_direction(&v, &y).unwrap().coefficients().iter().all(|&c| c == 0.0));

    let (_, prob) = box_problem(6, 1);
    let mut r = rng();
    let v = random_control(prob.control_space(), -1.0, 1.0, &mut r).unwrap();
    let w = random_control(prob.control_space(), -1.0, 1.0, &mut r).unwrap();
    let (j0, y) = prob.j_h(&v).unwrap();
    let d = prob.gradient_direction(&v, &y).unwrap();
    let t = 1e-6;
    let jp = prob.j_h(&v.combine(1.0, &w, t)).unwrap().0;
    let jm = prob.j_h(&v.combine(1.0, &w, -t)).unwrap().0;
    let fd = (jp - jm) / (2.0 * t);
    let exact = -prob.control_inner(d.coefficients(), w.coefficients());
    assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
    let _ = j0;
}

#[test]
fn unconstrained_system() {
    let case = build_case(ManufacturedParams::box_constrained().unconstrained()).unwrap();
    let prob = problem(case.problem_data().unwrap(), 8, 1);
    let (y, u) = solve_unconstrained_system(&prob).unwrap();
    let y2 = prob.solve_state(&u).unwrap();
    let d = prob.gradient_direction(&u, &y2).unwrap();
    assert!(ocp_bounds::ocp::projection::dg_norm_sq(&d).sqrt() < 1e-8);
    let diff = y.combine(1.0, &y2, -1.0);
    assert!(diff.coefficients().iter().all(|c| c.abs() < 1e-10));

    let constrained = problem(build_case(ManufacturedParams::box_constrained()).unwrap().problem_data().unwrap(), 4, 1);
    assert!(solve_unconstrained_system(&constrained).is_err());

    // f + y_d / alpha + u_d = 0 gives a zero state.
    let alpha = 0.5;
    let f = Analytic::new(move |x| -(x[0] * x[1]) / alpha);
    let yd = Analytic::with_gradient(|x| x[0] * x[1], |x| [x[1], x[0]]);
    let p0 = problem(data(f, yd, alpha, AdmissibleSet::Unconstrained), 6, 1);
    let (y, _) = solve_unconstrained_system(&p0).unwrap();
    assert!(y.coefficients().iter().all(|c| c.abs() < 1e-12));

    // Large alpha: the state approaches the state of u_d = 0.
    let big = problem(data(sine_load(), sine(), 1e6, AdmissibleSet::Unconstrained), 8, 1);
    let (y, _) = solve_unconstrained_system(&big).unwrap();
    let y0 = big.solve_state(&big.zero_control()).unwrap();
    let e = y.combine(1.0, &y0, -1.0);
    assert!(e.coefficients().iter().all(|c| c.abs() < 1e-4));
}

#[test]
fn majorant_unconstrained_cases() {
    let alpha = 0.5;
    let f = Analytic::new(move |x| {
        let s = (PI * x[0]).sin() * (PI * x[1]).sin();
        2.0 * PI * PI * s + s / alpha
    });
    // y_d = 0, u_d = 0 and the exact state is the sine: R = 0 for tau = grad z.
    let p0 = problem(data(f, Analytic::zero(), alpha, AdmissibleSet::Unconstrained), 4, 1);
    let m = majorant_unconstrained(&p0, &sine(), &sine_flux(), 1.0, NuMode::Optimal).unwrap();
    assert!(m.abs() < 1e-18);
    assert!(majorant_unconstrained(&p0, &sine(), &sine_flux(), 1.0, NuMode::Constant(1.5)).is_err());

    let case = build_case(ManufacturedParams::box_constrained().unconstrained()).unwrap();
    let prob = problem(case.problem_data().unwrap(), 8, 1);
    let mut r = rng();
    let z = random_function(prob.state_space(), 0.2, &mut r).unwrap();
    let tau = random_function(prob.flux_space().unwrap(), 0.5, &mut r).unwrap();
    let opt = majorant_unconstrained(&prob, &z, &tau, 0.8, NuMode::Optimal).unwrap();
    for nu in [0.0, 0.25, 0.5, 0.75, 1.0] {
        assert!(opt <= majorant_unconstrained(&prob, &z, &tau, 0.8, NuMode::Constant(nu)).unwrap() + 1e-12);
    }
    // nu = 0 drops the Friedrichs term.
    let m0 = majorant_unconstrained(&prob, &z, &tau, 0.8, NuMode::Constant(0.0)).unwrap();
    let zero = DiscreteProblem::zero_field();
    let flux = prob.majorant_parts_quadrature(&z, &tau, &zero).flux_sq;
    assert!(m0 >= 1.8 * flux);

    // Bound property against the refined solution of the optimality system.
    let fine_mesh = Arc::new(refine_uniform(prob.mesh()).unwrap());
    let fine = DiscreteProblem::new(prob.data().clone(), Discretization::new(fine_mesh, 2, None).unwrap()).unwrap();
    let (y_ref, _) = solve_unconstrained_system(&fine).unwrap();
    let (y_h, _) = solve_unconstrained_system(&prob).unwrap();
    let mut err = 0.0;
    for_each_point(fine.mesh(), fine.rule(), |p, w| {
        let a = y_ref.gradient_at(p);
        // y_h lives on the coarse mesh: locate the parent through the refinement map.
        let parent = p.cell / 4;
        let g = prob.mesh().geometry(parent);
        let pb = g.barycentric(p.x);
        let cp = QuadPoint { cell: parent, bary: pb, x: p.x };
        let b = y_h.gradient_at(&cp);
        err += w
            * ((a[0] - b[0]).powi(2)
                + (a[1] - b[1]).powi(2)
                + (y_ref.value_at(p) - y_h.value_at(&cp)).powi(2) / alpha_of(&prob));
    });
    let mut beta = 1.0;
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let tau = prob.tau_hat_for(&y_h, &prob.zero_control(), beta).unwrap();
        best = best.min(majorant_unconstrained(&prob, &y_h, &tau, beta, NuMode::Optimal).unwrap());
        beta *= 0.5;
    }
    assert!(best >= err, "{best} < {err}");
}

fn alpha_of(p: &DiscreteProblem) -> f64 {
    p.data().alpha()
}

#[test]
fn manufactured_invariants() {
    for params in [
        ManufacturedParams::box_constrained(),
        ManufacturedParams { m1: 3, m2: 2, beta: 0.2, ..ManufacturedParams::box_constrained() },
    ] {
        let case = build_case(params).unwrap();
        let n = 101;
        for i in 0..n {
            for j in 0..n {
                let x = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
                let target = (case.u_d.eval(x) + (case.y_d.eval(x) - case.y_opt.eval(x)) / params.alpha)
                    .clamp(params.psi_minus, params.psi_plus);
                assert!((case.u_opt.eval(x) - target).abs() < 1e-12);
                let pde = case.neg_laplacian_y(x) - case.f.eval(x) - case.u_opt.eval(x);
                assert!(pde.abs() < 1e-10);
            }
        }
    }
    let flat = build_case(ManufacturedParams { beta: 0.0, ..ManufacturedParams::box_constrained() }).unwrap();
    assert_eq!(flat.u_opt.eval([0.3, 0.6]), 0.0);
    assert_eq!(flat.y_d.eval([0.3, 0.6]), flat.y_opt.eval([0.3, 0.6]));
    assert_eq!(reference_cost(&flat, 100).unwrap().j_opt, 0.0);
    assert!(build_case(ManufacturedParams { alpha: 0.0, ..ManufacturedParams::box_constrained() }).is_err());
    assert!(build_case(ManufacturedParams { psi_minus: 1.0, psi_plus: 1.0, ..ManufacturedParams::box_constrained() })
        .is_err());
}

#[test]
fn reference_cost_values() {
    let case = build_case(ManufacturedParams::box_constrained()).unwrap();
    let r = reference_cost(&case, 1000).unwrap();
    assert!((r.grad_term - 5.0 * PI * PI / 16.0).abs() < 1e-14);
    assert_eq!(r.j_opt, r.grad_term + r.control_term);
    // composite Gauss oracle for the control term (the clamp leaves kinks)
    let (gp, gw) = ocp_bounds::quadrature::gauss_legendre_unit(6);
    let cells = 300;
    let h = 1.0 / cells as f64;
    let pts: Vec<f64> = (0..cells).flat_map(|c| gp.iter().map(move |g| (c as f64 + g) * h)).collect();
    let wts: Vec<f64> = (0..cells).flat_map(|_| gw.iter().map(|w| w * h)).collect();
    let mut s = 0.0;
    for (x, wx) in pts.iter().zip(&wts) {
        for (y, wy) in pts.iter().zip(&wts) {
            s += wx * wy * case.u_opt.eval([*x, *y]).powi(2);
        }
    }
    assert!((r.control_term - 0.05 * s).abs() < 1e-6 * r.control_term, "{} {}", r.control_term, 0.05 * s);

    let p = ManufacturedParams { psi_minus: -100.0, psi_plus: 100.0, ..ManufacturedParams::box_constrained() };
    let r = reference_cost(&build_case(p).unwrap(), 200).unwrap();
    let want = p.alpha * (p.beta / p.alpha).powi(2) / 4.0;
    assert!((r.control_term - want).abs() < 1e-10 * want);
}

#[test]
fn err_sq_reference_oracle() {
    let case = build_case(ManufacturedParams::box_constrained()).unwrap();
    let d = case.problem_data().unwrap();
    let prob = problem(d.clone(), 8, 1);
    let u = FeFunction::interpolate(prob.control_space(), &case.u_opt).unwrap();
    let e_u = err_sq_reference(&u, &d, &case).unwrap();
    let mut r = rng();
    let v = random_control(prob.control_space(), -3.0, 3.0, &mut r).unwrap();
    let ev = ReferenceEvaluator::new(&d, prob.mesh()).unwrap();
    let e_v = ev.err_sq(&v, &case).unwrap();
    let j_v = ev.cost(&v).unwrap().value;
    let j_u = reference_cost(&case, 1000).unwrap().j_opt;
    assert!(e_u > -1e-6 && e_u < 0.05 * e_v, "{e_u} {e_v}");
    assert!((e_v - (j_v - j_u)).abs() < 1e-3 * e_v, "{e_v} vs {}", j_v - j_u);
}

#[test]
fn estimates_for_interpolated_optimum() {
    let (case, prob) = box_problem(16, 1);
    let u = project(&FeFunction::interpolate(prob.control_space(), &case.u_opt).unwrap(), prob.data().admissible())
        .unwrap();
    let b = generate_cost_estimates(&prob, &u, &AlgOneParams::default()).unwrap();
    let j = reference_cost(&case, 1000).unwrap().j_opt;
    assert!(b.j_lower_v <= j && j <= b.j_upper_v, "{b:?} {j}");
    assert!(b.j_lower_u <= j);

    let quick = generate_cost_estimates(&prob, &u, &AlgOneParams { i_max: 20, eps: 1.0 }).unwrap();
    assert_eq!(quick.iterations_used, 1);
    assert!(quick.j_lower_v <= quick.j_upper_v);
    for w in b.upper_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }

    let bad = FeFunction::from_coefficients(prob.control_space(), vec![5.0; prob.control_space().n_dofs()]).unwrap();
    assert!(matches!(
        generate_cost_estimates(&prob, &bad, &AlgOneParams::default()),
        Err(Error::InvalidControl { .. })
    ));
}

#[test]
fn projected_gradient_run() {
    let (case, prob) = box_problem(8, 1);
    let params = PgParams { eps_pg: 1e-14, ..PgParams::default() };
    let trace = projected_gradient(&prob, &prob.zero_control(), &params).unwrap();
    assert_eq!(trace.records.len(), 10);
    for (r, v) in trace.records.iter().zip(&trace.iterates) {
        assert!(r.j_lower_v <= r.j_upper_v);
        assert_eq!(project(v, prob.data().admissible()).unwrap().coefficients(), v.coefficients());
        assert!(r.j_next <= r.j_lower_v);
        let e = r.err.unwrap();
        assert!(e.err_sq_lower <= e.err_sq_upper);
    }
    for w in trace.records.windows(2) {
        assert!(w[1].j_lower_v <= w[0].j_lower_v);
    }
    assert!(trace.records.last().unwrap().err.unwrap().err_sq_upper >= 0.0);

    // Started at the interpolated optimum the method barely moves.
    let u = project(&FeFunction::interpolate(prob.control_space(), &case.u_opt).unwrap(), prob.data().admissible())
        .unwrap();
    let t = projected_gradient(&prob, &u, &PgParams { i_max_pg: 3, ..params }).unwrap();
    let j0 = t.records[0].j_lower_v;
    for r in &t.records {
        assert!(r.j_lower_v - r.j_next <= 1e-2 * j0);
    }

    let bad = PgParams { eps_pg: 0.0, ..PgParams::default() };
    let fail = projected_gradient(&prob, &prob.zero_control(), &bad).unwrap_err();
    assert!(fail.trace.records.is_empty());
}

#[test]
fn update_rule_cases() {
    let (_, prob) = box_problem(4, 1);
    let mut r = rng();
    let v = random_control(prob.control_space(), -3.0, 3.0, &mut r).unwrap();
    let d = random_control(prob.control_space(), -10.0, 10.0, &mut r).unwrap();
    let set = prob.data().admissible();
    assert_eq!(update_rule(&v, &d, 0.0, set).unwrap().coefficients(), v.coefficients());
    let stepped = update_rule(&v, &d, 1.0, set).unwrap();
    assert!(stepped.coefficients().iter().all(|c| (-3.0..=3.0).contains(c)));
    let free = update_rule(&v, &d, 0.5, &AdmissibleSet::Unconstrained).unwrap();
    assert_eq!(free.coefficients(), v.combine(1.0, &d, 0.5).coefficients());
    let _ = PointFn(|_: &QuadPoint| 0.0);
}

//! Acceptance checks on the manufactured example. Runs as a plain binary so
//! that every verdict line is printed.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use ocp_bounds::field::Analytic;
use ocp_bounds::ocp::project;
use ocp_bounds::ocp::projection::dg_norm_sq;
use ocp_bounds::problems::{solve_unconstrained_system, ReferenceCost, ReferenceEvaluator};
use ocp_bounds::verify::{random_control, random_function};
use ocp_bounds::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = std::result::Result<String, String>;

struct Fixture {
    case: ManufacturedCase,
    p1: DiscreteProblem,
    p2: DiscreteProblem,
    reference: ReferenceEvaluator,
    run1: PgTrace,
    run2: PgTrace,
    /// Reference costs of the iterates of both runs.
    ref1: Vec<ReferenceCost>,
    ref2: Vec<ReferenceCost>,
}

const N: usize = 50;

fn pg_params() -> PgParams {
    // A tiny threshold keeps all ten iterations.
    PgParams { eps_pg: 1e-14, ..PgParams::default() }
}

fn fixture() -> Fixture {
    let case = build_case(ManufacturedParams::box_constrained()).unwrap();
    let data = case.problem_data().unwrap();
    let mesh = Arc::new(unit_square_mesh(N).unwrap());
    let make = |p| DiscreteProblem::new(data.clone(), Discretization::new(mesh.clone(), p, Some(p)).unwrap()).unwrap();
    let (p1, p2) = (make(1), make(2));
    let reference = ReferenceEvaluator::new(&data, &mesh).unwrap();
    let run1 = projected_gradient(&p1, &p1.zero_control(), &pg_params()).unwrap();
    let run2 = projected_gradient(&p2, &p2.zero_control(), &pg_params()).unwrap();
    let refs = |t: &PgTrace| t.iterates.iter().map(|v| reference.cost(v).unwrap()).collect();
    let (ref1, ref2) = (refs(&run1), refs(&run2));
    Fixture { case, p1, p2, reference, run1, run2, ref1, ref2 }
}

fn dofs() -> Verdict {
    let start = Instant::now();
    let mesh = Arc::new(unit_square_mesh(N).unwrap());
    let dim = |f, p| build_space(&mesh, f, p).unwrap().n_dofs();
    let got = [
        dim(Family::Discontinuous, 1),
        dim(Family::Lagrange, 1),
        dim(Family::RaviartThomas, 1),
        dim(Family::Lagrange, 2),
        dim(Family::RaviartThomas, 2),
    ];
    let elapsed = start.elapsed().as_secs_f64();
    let want = [15000, 2601, 7600, 10201, 25200];
    let msg = format!("dims {got:?} in {elapsed:.3} s");
    if got == want && elapsed < 1.0 {
        Ok(msg)
    } else {
        Err(format!("{msg}, want {want:?} under 1 s"))
    }
}

fn bracket(fx: &Fixture) -> Verdict {
    let mut worst_rel = 0.0f64;
    let mut worst_order = f64::NEG_INFINITY;
    let mut rows = 0;
    for (run, refs) in [(&fx.run1, &fx.ref1), (&fx.run2, &fx.ref2)] {
        if run.records.len() != 10 {
            return Err(format!("run has {} iterations", run.records.len()));
        }
        for (r, c) in run.records.iter().zip(refs) {
            let width = r.j_upper_v - r.j_lower_v;
            // J_lower and J_ref are Galerkin costs on nested spaces, equal up to rounding at worst.
            worst_order = worst_order.max(r.j_lower_v - c.value - 1e-10 * c.value).max(c.value - r.j_upper_v);
            worst_rel = worst_rel.max(c.error_estimate / width);
            rows += 1;
        }
    }
    let msg =
        format!("{rows} iterates, max ordering defect {worst_order:.2e}, max reference error / width {worst_rel:.2e}");
    if worst_order <= 0.0 && worst_rel < 0.01 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err_bracket(fx: &Fixture) -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_rel = 0.0f64;
    for run in [&fx.run1, &fx.run2] {
        for (r, v) in run.records.iter().zip(&run.iterates) {
            let e = r.err.unwrap();
            let oracle = fx.reference.err_sq(v, &fx.case).unwrap();
            let est = fx.reference.cost(v).unwrap().error_estimate;
            worst = worst.max(e.err_sq_lower - oracle).max(oracle - e.err_sq_upper);
            worst_rel = worst_rel.max(est / (e.err_sq_upper - e.err_sq_lower));
        }
    }
    let msg = format!("max violation {worst:.2e}, reference error / width {worst_rel:.2e}");
    if worst <= 0.0 && worst_rel < 0.01 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn width_ratio(fx: &Fixture) -> Verdict {
    let (mut w1, mut w2) = (0.0, 0.0);
    for (r, v) in fx.run1.records.iter().zip(&fx.run1.iterates) {
        let same = FeFunction::from_coefficients(fx.p2.control_space(), v.coefficients().to_vec()).unwrap();
        let b = generate_cost_estimates(&fx.p2, &same, &AlgOneParams::default()).unwrap();
        w1 += r.j_upper_v - r.j_lower_v;
        w2 += b.j_upper_v - b.j_lower_v;
    }
    let n = fx.run1.records.len() as f64;
    let ratio = w2 / w1;
    let msg = format!("mean width {:.4e} (order 1) vs {:.4e} (order 2), ratio {ratio:.3}", w1 / n, w2 / n);
    if ratio < 0.5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn mikhlin(fx: &Fixture) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    let mut largest = 0.0f64;
    let data = fx.p1.data().clone();
    for n in [4, 8, 16] {
        let mesh = Arc::new(unit_square_mesh(n).unwrap());
        for p in [1, 2] {
            let prob = DiscreteProblem::new(data.clone(), Discretization::new(mesh.clone(), p, None).unwrap()).unwrap();
            let v = random_control(prob.control_space(), -3.0, 3.0, &mut rng).unwrap();
            let y = prob.solve_state(&v).unwrap();
            let ey = prob.energy(&y, &v);
            for _ in 0..20 {
                let z = random_function(prob.state_space(), 1.0, &mut rng).unwrap();
                let k = prob.stiffness();
                let gz = k.quadratic_form(z.coefficients());
                let gap = k.quadratic_form(z.combine(1.0, &y, -1.0).coefficients());
                let defect = (prob.energy(&z, &v) - ey - gap).abs();
                worst = worst.max(defect - 1e-9 * (1.0 + gz));
                largest = largest.max(defect / (1.0 + gz));
            }
        }
    }
    let msg = format!("n in {{4, 8, 16}}, orders 1 and 2, 20 samples each, max scaled defect {largest:.2e}");
    if worst <= 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn minimizers() -> Verdict {
    let case = build_case(ManufacturedParams::box_constrained()).unwrap();
    let mesh = Arc::new(unit_square_mesh(8).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = Vec::new();
    for p in [1, 2] {
        let prob =
            DiscreteProblem::new(case.problem_data().unwrap(), Discretization::new(mesh.clone(), p, Some(p)).unwrap())
                .unwrap();
        let set = prob.data().admissible().clone();
        let v = random_control(prob.control_space(), -3.0, 3.0, &mut rng).unwrap();
        let y = prob.solve_state(&v).unwrap();
        let beta = 0.2;
        let tau = prob.tau_hat(&v, beta).unwrap();
        let lower = prob.v_hat_lower(&y).unwrap();
        let upper = prob.v_hat_upper(&tau, beta).unwrap();
        let best = [
            prob.cost_lower(&lower, &y),
            prob.cost_upper(&upper, &tau, beta).unwrap(),
            prob.cost_upper_discrete(&v, &tau, beta).unwrap(),
        ];
        let beta_hat = prob.beta_hat(&v, &tau).unwrap();
        let best_beta = prob.cost_upper_discrete(&v, &tau, beta_hat).unwrap();
        let near = [lower.to_control().unwrap(), upper.to_control().unwrap()];
        let mut beats = |name: &str, best: f64, other: f64| {
            if other < best - 1e-12 * best.abs() {
                violations.push(format!("{name} (order {p}): {other} < {best}"));
            }
        };
        for i in 0..100 {
            let competitor = |k: usize, rng: &mut ChaCha8Rng| {
                if i % 2 == 0 {
                    random_control(prob.control_space(), -3.0, 3.0, rng).unwrap()
                } else {
                    let noise = random_control(prob.control_space(), -0.05, 0.05, rng).unwrap();
                    project(&near[k].combine(1.0, &noise, 1.0), &set).unwrap()
                }
            };
            let w = competitor(0, &mut rng);
            beats("v_hat_lower", best[0], prob.cost_lower(&w, &y));
            let w = competitor(1, &mut rng);
            beats("v_hat_upper", best[1], prob.cost_upper(&w, &tau, beta).unwrap());
            let d = random_function(tau.space(), 0.5f64.powi(i % 12), &mut rng).unwrap();
            beats("tau_hat", best[2], prob.cost_upper_discrete(&v, &tau.combine(1.0, &d, 1.0), beta).unwrap());
            let b = beta_hat * 10f64.powf(rng.random_range(-2.0..=2.0));
            beats("beta_hat", best_beta, prob.cost_upper_discrete(&v, &tau, b).unwrap());
        }
    }
    if violations.is_empty() {
        Ok("100 competitors per minimizer, orders 1 and 2, no violations".into())
    } else {
        Err(format!("{} violations, first: {}", violations.len(), violations[0]))
    }
}

fn gradient(fx: &Fixture) -> Verdict {
    let prob = &fx.p1;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v = &fx.run1.iterates[1];
    let (j0, y) = prob.j_h(v).unwrap();
    let d = prob.gradient_direction(v, &y).unwrap();
    let mut ratios = Vec::new();
    let mut worst_rel = 0.0f64;
    for _ in 0..5 {
        let w = random_control(prob.control_space(), -1.0, 1.0, &mut rng).unwrap();
        let exact = -prob.control_inner(d.coefficients(), w.coefficients());
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&t| ((prob.j_h(&v.combine(1.0, &w, t)).unwrap().0 - j0) / t - exact).abs())
            .collect();
        worst_rel = worst_rel.max(errs[2] / exact.abs().max(1e-12));
        ratios.push(errs[0] / errs[1]);
        ratios.push(errs[1] / errs[2]);
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let msg = format!("error ratios per decade in [{lo:.3}, {hi:.3}], relative error at t = 1e-4 {worst_rel:.2e}");
    if lo > 9.0 && hi < 11.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn unconstrained() -> Verdict {
    let case = build_case(ManufacturedParams::box_constrained().unconstrained()).unwrap();
    let mesh = Arc::new(unit_square_mesh(32).unwrap());
    let prob =
        DiscreteProblem::new(case.problem_data().unwrap(), Discretization::new(mesh, 1, Some(1)).unwrap()).unwrap();
    let (_, u) = solve_unconstrained_system(&prob).unwrap();
    let y = prob.solve_state(&u).unwrap();
    let d = prob.gradient_direction(&u, &y).unwrap();
    let (dn, un) = (dg_norm_sq(&d).sqrt(), dg_norm_sq(&u).sqrt());
    let trace = projected_gradient(&prob, &u, &PgParams { i_max_pg: 3, eps_pg: 1e-14, ..PgParams::default() }).unwrap();
    let change = trace.records.iter().map(|r| (r.j_lower_v - r.j_next).abs() / r.j_lower_v).fold(0.0, f64::max);
    let msg = format!("||d|| = {dn:.2e} (limit {:.2e}), max relative change {change:.2e}", 1e-6 * (1.0 + un));
    if dn <= 1e-6 * (1.0 + un) && change < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn monotonicity(fx: &Fixture) -> Verdict {
    let mut violations = 0;
    let mut worst = 0.0f64;
    let mut check = |a: f64, b: f64| {
        // b follows a; exact ties and rounding below 1e-12 relative are fine
        let excess = (b - a) / a.abs().max(1e-300);
        if excess > 1e-12 {
            violations += 1;
        }
        worst = worst.max(excess);
    };
    let mut runs = vec![&fx.run1, &fx.run2];
    let extra = projected_gradient(&fx.p1, &fx.run1.iterates[3], &pg_params()).unwrap();
    runs.push(&extra);
    let mut sequences = 0;
    for run in runs {
        for r in &run.records {
            r.upper_history.windows(2).for_each(|w| check(w[0], w[1]));
            check(r.j_lower_v, r.j_next);
            sequences += 1;
        }
        run.records.windows(2).for_each(|w| check(w[0].j_lower_v, w[1].j_lower_v));
    }
    let msg = format!(
        "{sequences} bound sequences and 3 descent runs, {violations} violations, max relative increase {worst:.2e}"
    );
    if violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn projections(fx: &Fixture) -> Verdict {
    let space = fx.p1.control_space();
    let sets = [
        ("unconstrained", AdmissibleSet::Unconstrained),
        ("box", AdmissibleSet::constant_box(-3.0, 3.0).unwrap()),
        (
            "varying box",
            AdmissibleSet::Box { lower: Analytic::new(|x| -1.0 - x[0]), upper: Analytic::new(|x| 0.5 + x[0] * x[1]) },
        ),
        ("ball", AdmissibleSet::ball(1.5).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let alpha = fx.p1.data().alpha();
    let norm = |x: &FeFunction| (alpha * dg_norm_sq(x)).sqrt();
    let mut violations = 0;
    let mut worst = 0.0f64;
    for (_, set) in &sets {
        for _ in 0..1000 {
            let scale = 10f64.powf(rng.random_range(-1.0..=1.0));
            let a = random_control(space, -5.0 * scale, 5.0 * scale, &mut rng).unwrap();
            let b = random_control(space, -5.0, 5.0, &mut rng).unwrap();
            let (pa, pb) = (project(&a, set).unwrap(), project(&b, set).unwrap());
            let idem = norm(&project(&pa, set).unwrap().combine(1.0, &pa, -1.0));
            let expand = norm(&pa.combine(1.0, &pb, -1.0)) - norm(&a.combine(1.0, &b, -1.0));
            for e in [idem, expand] {
                worst = worst.max(e);
                if e > 1e-12 {
                    violations += 1;
                }
            }
        }
    }
    let msg = format!("{} sets x 1000 pairs, {violations} violations, worst {worst:.2e}", sets.len());
    if violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, v: Verdict| match v {
        Ok(m) => println!("PASS criterion {n} ({name}): {m}"),
        Err(m) => {
            failed += 1;
            println!("FAIL criterion {n} ({name}): {m}");
        }
    };
    report(1, "degrees of freedom", dofs());
    let start = Instant::now();
    let fx = fixture();
    eprintln!("fixture built in {:.1} s", start.elapsed().as_secs_f64());
    report(2, "guaranteed bracket", bracket(&fx));
    report(3, "error bracket", err_bracket(&fx));
    report(4, "width ratio", width_ratio(&fx));
    report(5, "Mikhlin identity", mikhlin(&fx));
    report(6, "minimizer optimality", minimizers());
    report(7, "gradient check", gradient(&fx));
    report(8, "unconstrained consistency", unconstrained());
    report(9, "monotonicity", monotonicity(&fx));
    report(10, "projection contract", projections(&fx));
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

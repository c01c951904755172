//! Self-check suite of cross-module invariants on small meshes.
//!
//! Each check is deterministic (seeded sampling) and reports a name, a
//! verdict and the worst observed defect.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algorithms::{generate_cost_estimates, AlgOneParams};
use crate::error::Result;
use crate::fem::{FeFunction, FeSpace};
use crate::field::Analytic;
use crate::mesh::{unit_square_mesh, Mesh};
use crate::ocp::projection::{dg_norm_sq, project};
use crate::ocp::{AdmissibleSet, DiscreteProblem, Discretization, ProblemData};
use crate::problems::{build_case, ManufacturedCase, ManufacturedParams, ReferenceEvaluator};

/// Deliberate defects used to confirm that the suite detects errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flips the sign of the residual term of the majorant.
    MajorantSign,
}

/// Result of one named check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Largest defect found; a check passes when it is within tolerance.
    pub worst: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, worst: f64, tol: f64, detail: String) -> Self {
        Self { name, passed: worst <= tol, worst, detail }
    }
}

const SEED: u64 = 0x5eed;

fn box_case() -> Result<ManufacturedCase> {
    build_case(ManufacturedParams::box_constrained())
}

fn problem(data: &ProblemData, mesh: &Arc<Mesh>, p: usize) -> Result<DiscreteProblem> {
    DiscreteProblem::new(data.clone(), Discretization::new(mesh.clone(), p, Some(p))?)
}

/// Random control with nodal values uniform in `[lo, hi]`.
pub fn random_control(space: &Arc<FeSpace>, lo: f64, hi: f64, rng: &mut impl Rng) -> Result<FeFunction> {
    FeFunction::from_coefficients(space, (0..space.n_dofs()).map(|_| rng.random_range(lo..=hi)).collect())
}

/// Random function of a Lagrange or Raviart-Thomas space (boundary values
/// zeroed for Lagrange).
pub fn random_function(space: &Arc<FeSpace>, scale: f64, rng: &mut impl Rng) -> Result<FeFunction> {
    FeFunction::from_coefficients_masked(
        space,
        (0..space.n_dofs()).map(|_| scale * rng.random_range(-1.0..=1.0)).collect(),
    )
}

/// `E(z) - E(y_h) = ||grad(z - y_h)||^2` for random discrete `z`.
pub fn mikhlin_identity(meshes: &[usize], samples: usize) -> Result<CheckOutcome> {
    let case = box_case()?;
    let data = case.problem_data()?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for &n in meshes {
        let mesh = Arc::new(unit_square_mesh(n)?);
        for p in [1, 2] {
            let prob = DiscreteProblem::new(data.clone(), Discretization::new(mesh.clone(), p, None)?)?;
            let v = random_control(prob.control_space(), -3.0, 3.0, &mut rng)?;
            let y = prob.solve_state(&v)?;
            let ey = prob.energy_discrete(&y, &v)?;
            for _ in 0..samples {
                let z = random_function(prob.state_space(), 1.0, &mut rng)?;
                let diff = z.combine(1.0, &y, -1.0);
                let gz = prob.stiffness().quadratic_form(z.coefficients());
                let lhs = prob.energy_discrete(&z, &v)? - ey;
                let rhs = prob.stiffness().quadratic_form(diff.coefficients());
                worst = worst.max((lhs - rhs).abs() / (1.0 + gz));
            }
        }
    }
    Ok(CheckOutcome::new("mikhlin_identity", worst, 1e-9, format!("meshes {meshes:?}, {samples} samples each")))
}

/// Upper bound after the flux/weight iteration, optionally with the fault.
fn upper_bound(prob: &DiscreteProblem, v: &FeFunction, beta: f64, fault: Option<Fault>) -> Result<f64> {
    let tau = prob.tau_hat(v, beta)?;
    let c = prob.data().c_omega();
    let parts = prob.majorant_parts(v, &tau)?;
    let majorant = match fault {
        None => parts.value(beta, c),
        Some(Fault::MajorantSign) => (1.0 + beta) * parts.flux_sq - (1.0 + beta) / beta * c * c * parts.residual_sq,
    };
    Ok(majorant + prob.data().alpha() * prob.control_misfit_sq(v))
}

/// `J_lower(v) <= J_ref(v) <= J_upper(v)` for several controls, with a
/// refined-mesh reference.
pub fn bracket_ordering(n: usize, fault: Option<Fault>) -> Result<CheckOutcome> {
    let case = box_case()?;
    let data = case.problem_data()?;
    let mesh = Arc::new(unit_square_mesh(n)?);
    let reference = ReferenceEvaluator::new(&data, &mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst = f64::NEG_INFINITY;
    for p in [1, 2] {
        let prob = problem(&data, &mesh, p)?;
        let mut controls = vec![prob.zero_control()];
        controls.push(project(&FeFunction::interpolate(prob.control_space(), &case.u_opt)?, prob.data().admissible())?);
        controls.push(random_control(prob.control_space(), -3.0, 3.0, &mut rng)?);
        for v in &controls {
            let b = generate_cost_estimates(&prob, v, &AlgOneParams::default())?;
            let upper = upper_bound(&prob, v, b.beta_final, fault)?;
            let r = reference.cost(v)?;
            worst = worst.max(b.j_lower_v - (r.value + r.error_estimate)).max(r.value - upper);
        }
    }
    Ok(CheckOutcome::new("bracket_ordering", worst, 0.0, format!("n = {n}, orders 1 and 2, 3 controls")))
}

/// The closed-form minimizers beat random admissible competitors.
pub fn minimizer_optimality(n: usize, competitors: usize) -> Result<CheckOutcome> {
    let case = box_case()?;
    let data = case.problem_data()?;
    let mesh = Arc::new(unit_square_mesh(n)?);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let prob = problem(&data, &mesh, 1)?;
    let set = prob.data().admissible().clone();
    let v = random_control(prob.control_space(), -3.0, 3.0, &mut rng)?;
    let y = prob.solve_state(&v)?;
    let beta = 0.3;
    let tau = prob.tau_hat(&v, beta)?;

    let lower_hat = prob.v_hat_lower(&y)?;
    let upper_hat = prob.v_hat_upper(&tau, beta)?;
    let best_lower = prob.cost_lower(&lower_hat, &y);
    let best_upper = prob.cost_upper(&upper_hat, &tau, beta)?;
    let best_tau = prob.cost_upper_discrete(&v, &tau, beta)?;
    let beta_hat = prob.beta_hat(&v, &tau)?;
    let best_beta = prob.cost_upper_discrete(&v, &tau, beta_hat)?;
    let near_lower = lower_hat.to_control()?;
    let near_upper = upper_hat.to_control()?;

    // Positive when a competitor wins, relative to the objective.
    let mut worst = f64::NEG_INFINITY;
    let mut record = |best: f64, other: f64| worst = worst.max((best - other) / best.abs().max(1.0) - 1e-12);
    for i in 0..competitors {
        let w = if i % 2 == 0 {
            random_control(prob.control_space(), -3.0, 3.0, &mut rng)?
        } else {
            let noise = random_control(prob.control_space(), -0.1, 0.1, &mut rng)?;
            let base = if i % 4 == 1 { &near_lower } else { &near_upper };
            project(&base.combine(1.0, &noise, 1.0), &set)?
        };
        record(best_lower, prob.cost_lower(&w, &y));
        record(best_upper, prob.cost_upper(&w, &tau, beta)?);
        let dt = random_function(tau.space(), 0.5f64.powi((i % 8) as i32), &mut rng)?;
        record(best_tau, prob.cost_upper_discrete(&v, &tau.combine(1.0, &dt, 1.0), beta)?);
        let b = beta_hat * 10f64.powf(rng.random_range(-2.0..=2.0));
        record(best_beta, prob.cost_upper_discrete(&v, &tau, b)?);
    }
    Ok(CheckOutcome::new(
        "minimizer_optimality",
        worst.max(0.0),
        0.0,
        format!("n = {n}, {competitors} competitors per minimizer"),
    ))
}

/// Forward differences of `J_h` against the returned direction; reports the
/// worst relative defect of first-order decay.
pub fn gradient_check(n: usize, directions: usize) -> Result<CheckOutcome> {
    let case = box_case()?;
    let data = case.problem_data()?.with_admissible(AdmissibleSet::Unconstrained);
    let mesh = Arc::new(unit_square_mesh(n)?);
    let prob = DiscreteProblem::new(data, Discretization::new(mesh, 1, None)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let v = random_control(prob.control_space(), -1.0, 1.0, &mut rng)?;
    let (j0, y) = prob.j_h(&v)?;
    let d = prob.gradient_direction(&v, &y)?;
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let w = random_control(prob.control_space(), -1.0, 1.0, &mut rng)?;
        let exact = -prob.control_inner(d.coefficients(), w.coefficients());
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&t| Ok((prob.j_h(&v.combine(1.0, &w, t))?.0 - j0) / t - exact))
            .collect::<Result<_>>()?;
        // J_h is quadratic, so each error is t times the curvature.
        for pair in errs.windows(2) {
            worst = worst.max((pair[0] / pair[1] / 10.0 - 1.0).abs());
        }
    }
    Ok(CheckOutcome::new("gradient_check", worst, 1e-3, format!("n = {n}, {directions} directions")))
}

/// Idempotence and non-expansiveness of all three projections.
pub fn projection_properties(n: usize, pairs: usize) -> Result<CheckOutcome> {
    let mesh = Arc::new(unit_square_mesh(n)?);
    let space = crate::fem::build_space(&mesh, crate::fem::Family::Discontinuous, 1)?;
    let sets = [
        AdmissibleSet::Unconstrained,
        AdmissibleSet::Box { lower: Analytic::new(|x| -1.0 + 0.5 * x[0]), upper: Analytic::new(|x| 0.5 + x[1] * x[1]) },
        AdmissibleSet::ball(0.7)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let mut worst = 0.0f64;
    for set in &sets {
        for _ in 0..pairs {
            let a = random_control(&space, -3.0, 3.0, &mut rng)?;
            let b = random_control(&space, -3.0, 3.0, &mut rng)?;
            let (pa, pb) = (project(&a, set)?, project(&b, set)?);
            let ppa = project(&pa, set)?;
            worst = worst.max(dg_norm_sq(&ppa.combine(1.0, &pa, -1.0)).sqrt());
            let before = dg_norm_sq(&a.combine(1.0, &b, -1.0)).sqrt();
            let after = dg_norm_sq(&pa.combine(1.0, &pb, -1.0)).sqrt();
            worst = worst.max(after - before);
        }
    }
    Ok(CheckOutcome::new("projection_properties", worst, 1e-12, format!("n = {n}, {pairs} pairs per set")))
}

/// Runs every check with the default sizes.
pub fn run_suite(fault: Option<Fault>) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        mikhlin_identity(&[4, 8], 5)?,
        bracket_ordering(8, fault)?,
        minimizer_optimality(6, 40)?,
        gradient_check(6, 3)?,
        projection_properties(6, 200)?,
    ])
}

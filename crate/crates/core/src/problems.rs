//! Manufactured test problems with known optimal control, reference
//! evaluation of the cost on refined meshes, and the unconstrained
//! optimality system.
//!
//! The manufactured family on the unit square:
//!
//! ```text
//! y   = sin(k1 pi x1) sin(k2 pi x2)
//! y_d = y + beta sin(m1 pi x1) sin(m2 pi x2)
//! u_d = 0
//! u   = clamp(beta / alpha sin(m1 pi x1) sin(m2 pi x2), psi_minus, psi_plus)
//! f   = pi^2 (k1^2 + k2^2) y - u
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{Family, FeFunction, FeSpace};
use crate::field::{Analytic, FluxField, GradientField, QuadPoint, ScalarField};
use crate::mesh::{refine_uniform, Mesh, CHILD_BARYCENTRICS};
use crate::ocp::{AdmissibleSet, DiscreteProblem, Discretization, ProblemData};

/// Parameters of the manufactured family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ManufacturedParams {
    pub k1: u32,
    pub k2: u32,
    pub m1: u32,
    pub m2: u32,
    pub beta: f64,
    pub alpha: f64,
    pub psi_minus: f64,
    pub psi_plus: f64,
}

impl ManufacturedParams {
    /// `k = (1, 1)`, `m = (2, 1)`, `beta = 0.5`, `alpha = 0.05`,
    /// `psi = -3, 3`.
    pub fn box_constrained() -> Self {
        Self { k1: 1, k2: 1, m1: 2, m2: 1, beta: 0.5, alpha: 0.05, psi_minus: -3.0, psi_plus: 3.0 }
    }

    /// Same fields without control constraints.
    pub fn unconstrained(self) -> Self {
        Self { psi_minus: f64::NEG_INFINITY, psi_plus: f64::INFINITY, ..self }
    }

    pub fn is_unconstrained(&self) -> bool {
        self.psi_minus == f64::NEG_INFINITY && self.psi_plus == f64::INFINITY
    }
}

/// A manufactured problem with closed-form optimum.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub params: ManufacturedParams,
    pub y_opt: Analytic,
    pub y_d: Analytic,
    pub u_d: Analytic,
    pub u_opt: Analytic,
    pub f: Analytic,
}

fn sine(a: u32, b: u32) -> impl Fn([f64; 2]) -> f64 + Copy {
    let (a, b) = (a as f64 * PI, b as f64 * PI);
    move |x: [f64; 2]| (a * x[0]).sin() * (b * x[1]).sin()
}

fn sine_gradient(a: u32, b: u32) -> impl Fn([f64; 2]) -> [f64; 2] + Copy {
    let (a, b) = (a as f64 * PI, b as f64 * PI);
    move |x: [f64; 2]| [a * (a * x[0]).cos() * (b * x[1]).sin(), b * (a * x[0]).sin() * (b * x[1]).cos()]
}

/// Wires the closed-form fields of the manufactured family.
pub fn build_case(params: ManufacturedParams) -> Result<ManufacturedCase> {
    let ManufacturedParams { k1, k2, m1, m2, beta, alpha, psi_minus, psi_plus } = params;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if !(psi_minus < psi_plus) {
        return Err(Error::InvalidArgument(format!("need psi_minus < psi_plus, got {psi_minus}, {psi_plus}")));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidArgument("beta must be finite".into()));
    }
    let (y, gy) = (sine(k1, k2), sine_gradient(k1, k2));
    let (s, gs) = (sine(m1, m2), sine_gradient(m1, m2));
    let u = move |x: [f64; 2]| (beta / alpha * s(x)).clamp(psi_minus, psi_plus);
    let lap = PI * PI * (k1 * k1 + k2 * k2) as f64;
    Ok(ManufacturedCase {
        params,
        y_opt: Analytic::with_gradient(y, gy),
        y_d: Analytic::with_gradient(
            move |x| y(x) + beta * s(x),
            move |x| {
                let (a, b) = (gy(x), gs(x));
                [a[0] + beta * b[0], a[1] + beta * b[1]]
            },
        ),
        u_d: Analytic::zero(),
        u_opt: Analytic::new(u),
        f: Analytic::new(move |x| lap * y(x) - u(x)),
    })
}

impl ManufacturedCase {
    pub fn admissible(&self) -> AdmissibleSet {
        if self.params.is_unconstrained() {
            AdmissibleSet::Unconstrained
        } else {
            AdmissibleSet::Box {
                lower: Analytic::constant(self.params.psi_minus),
                upper: Analytic::constant(self.params.psi_plus),
            }
        }
    }

    pub fn problem_data(&self) -> Result<ProblemData> {
        ProblemData::new(self.f.clone(), self.y_d.clone(), self.u_d.clone(), self.params.alpha, self.admissible())
    }

    /// `-Laplace y_opt` in closed form.
    pub fn neg_laplacian_y(&self, x: [f64; 2]) -> f64 {
        let p = &self.params;
        PI * PI * (p.k1 * p.k1 + p.k2 * p.k2) as f64 * self.y_opt.eval(x)
    }
}

/// Optimal cost split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceValues {
    pub j_opt: f64,
    pub grad_term: f64,
    pub control_term: f64,
    /// Points per direction of the midpoint rule for the control term.
    pub resolution: usize,
}

fn midpoint_control_sq(case: &ManufacturedCase, n: usize) -> f64 {
    let p = case.params;
    let h = 1.0 / n as f64;
    let sx: Vec<f64> = (0..n).map(|i| (p.m1 as f64 * PI * (i as f64 + 0.5) * h).sin()).collect();
    let sy: Vec<f64> = (0..n).map(|j| (p.m2 as f64 * PI * (j as f64 + 0.5) * h).sin()).collect();
    let c = p.beta / p.alpha;
    let mut total = 0.0;
    for &a in &sx {
        let mut row = 0.0;
        for &b in &sy {
            row += (c * a * b).clamp(p.psi_minus, p.psi_plus).powi(2);
        }
        total += row;
    }
    total * h * h
}

/// `J(u) = beta^2 pi^2 (m1^2 + m2^2) / 4 + alpha ||u||^2`, the second term by
/// a tensor midpoint rule checked against twice the resolution.
pub fn reference_cost(case: &ManufacturedCase, resolution: usize) -> Result<ReferenceValues> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let p = case.params;
    let grad_term = p.beta * p.beta * PI * PI * (p.m1 * p.m1 + p.m2 * p.m2) as f64 / 4.0;
    let coarse = midpoint_control_sq(case, resolution);
    let fine = midpoint_control_sq(case, 2 * resolution);
    if (fine - coarse).abs() > 1e-6 * fine.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Precision(format!(
            "control term changed from {coarse} to {fine} between resolutions {resolution} and {}",
            2 * resolution
        )));
    }
    let control_term = p.alpha * fine;
    Ok(ReferenceValues { j_opt: grad_term + control_term, grad_term, control_term, resolution })
}

/// Solves the unconstrained optimality system and returns the state and the
/// recovered control `u_d + (y_d - y) / alpha` (projected onto the control
/// space).
pub fn solve_unconstrained_system(problem: &DiscreteProblem) -> Result<(FeFunction, FeFunction)> {
    if !matches!(problem.data().admissible(), AdmissibleSet::Unconstrained) {
        return Err(Error::InvalidArgument("the optimality system needs an unconstrained problem".into()));
    }
    problem.solve_unconstrained()
}

/// Choice of the splitting weight in [`majorant_unconstrained`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuMode {
    /// `nu = alpha / (alpha + c^2 (1 + beta) / beta)`.
    Optimal,
    Constant(f64),
}

/// Error majorant of an approximation `z` of the unconstrained optimal state
/// in the norm `||grad e||^2 + ||e||^2 / alpha`:
/// `(1+beta)||grad z - tau||^2 + (1+beta)/beta c^2 ||nu R||^2 + alpha ||(1-nu) R||^2`
/// with `R = div tau - z/alpha + f + y_d/alpha + u_d`.
pub fn majorant_unconstrained(
    problem: &DiscreteProblem,
    z: &dyn GradientField,
    tau: &dyn FluxField,
    beta: f64,
    nu_mode: NuMode,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let d = problem.data();
    let alpha = d.alpha();
    let a = (1.0 + beta) / beta * d.c_omega().powi(2);
    let nu = match nu_mode {
        NuMode::Optimal => alpha / (alpha + a),
        NuMode::Constant(nu) if (0.0..=1.0).contains(&nu) => nu,
        NuMode::Constant(nu) => return Err(Error::InvalidArgument(format!("nu must lie in [0, 1], got {nu}"))),
    };
    let (mut flux, mut res) = (0.0, 0.0);
    crate::field::for_each_point(problem.mesh(), problem.rule(), |p, w| {
        let g = z.gradient(p);
        let t = tau.flux(p);
        let r =
            tau.divergence(p) - z.value(p) / alpha + d.f().eval(p.x) + d.y_d().eval(p.x) / alpha + d.u_d().eval(p.x);
        flux += w * ((g[0] - t[0]).powi(2) + (g[1] - t[1]).powi(2));
        res += w * r * r;
    });
    Ok((1.0 + beta) * flux + a * nu * nu * res + alpha * (1.0 - nu).powi(2) * res)
}

/// Maps a discontinuous P1 function to the uniformly refined mesh.
pub fn prolong_control(v: &FeFunction, fine: &Arc<FeSpace>) -> Result<FeFunction> {
    v.space().expect_family(Family::Discontinuous)?;
    fine.expect_family(Family::Discontinuous)?;
    let nt = v.space().mesh().n_triangles();
    if fine.mesh().n_triangles() != 4 * nt {
        return Err(Error::DimensionMismatch { expected: 4 * nt, found: fine.mesh().n_triangles() });
    }
    let c = v.coefficients();
    let mut out = Vec::with_capacity(12 * nt);
    for t in 0..nt {
        for child in &CHILD_BARYCENTRICS {
            for b in child {
                out.push(b[0] * c[3 * t] + b[1] * c[3 * t + 1] + b[2] * c[3 * t + 2]);
            }
        }
    }
    FeFunction::from_coefficients(fine, out)
}

/// Reference value of `J(v)` with its estimated error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceCost {
    /// Discrete cost with quadratic elements on the refined mesh. It never
    /// exceeds `J(v)`.
    pub value: f64,
    /// Richardson estimate of `J(v) - value`, from the quadratic-element
    /// cost on the unrefined mesh.
    pub error_estimate: f64,
}

/// Evaluates `J(v)` for controls on a coarse mesh by solving the state
/// equation with quadratic elements on the once-refined mesh.
pub struct ReferenceEvaluator {
    fine: DiscreteProblem,
    coarse: DiscreteProblem,
    coarse_mesh: Arc<Mesh>,
}

impl ReferenceEvaluator {
    pub fn new(data: &ProblemData, coarse_mesh: &Arc<Mesh>) -> Result<Self> {
        let fine_mesh = Arc::new(refine_uniform(coarse_mesh)?);
        let fine = DiscreteProblem::new(data.clone(), Discretization::new(fine_mesh, 2, None)?)?;
        let coarse = DiscreteProblem::new(data.clone(), Discretization::new(coarse_mesh.clone(), 2, None)?)?;
        Ok(Self { fine, coarse, coarse_mesh: coarse_mesh.clone() })
    }

    pub fn fine_problem(&self) -> &DiscreteProblem {
        &self.fine
    }

    fn lift(&self, v: &FeFunction) -> Result<(FeFunction, FeFunction)> {
        if !Arc::ptr_eq(v.space().mesh(), &self.coarse_mesh) {
            return Err(Error::InvalidArgument("control lives on a different mesh".into()));
        }
        let coarse = FeFunction::from_coefficients(self.coarse.control_space(), v.coefficients().to_vec())?;
        let fine = prolong_control(&coarse, self.fine.control_space())?;
        Ok((coarse, fine))
    }

    pub fn cost(&self, v: &FeFunction) -> Result<ReferenceCost> {
        let (coarse, fine) = self.lift(v)?;
        let (jf, _) = self.fine.j_h(&fine)?;
        let (jc, _) = self.coarse.j_h(&coarse)?;
        Ok(ReferenceCost { value: jf, error_estimate: ((jf - jc) / 3.0).max(0.0) })
    }

    /// Refined-mesh state for `v`.
    pub fn state(&self, v: &FeFunction) -> Result<FeFunction> {
        let (_, fine) = self.lift(v)?;
        self.fine.solve_state(&fine)
    }

    /// `err^2(v) = |||y(v) - y(u)|||^2 + alpha ||v - u||^2 + <J'(u), v - u>`
    /// with the refined-mesh state for `y(v)` and the closed-form optimum.
    pub fn err_sq(&self, v: &FeFunction, case: &ManufacturedCase) -> Result<f64> {
        let (_, fine_v) = self.lift(v)?;
        let y = self.fine.solve_state(&fine_v)?;
        let alpha = case.params.alpha;
        let mut s = 0.0;
        crate::field::for_each_point(self.fine.mesh(), self.fine.rule(), |p: &QuadPoint, w| {
            let gy = y.gradient_at(p);
            let go = case.y_opt.eval_gradient(p.x);
            let u = case.u_opt.eval(p.x);
            let dv = fine_v.value(p) - u;
            let adj = case.y_opt.eval(p.x) - case.y_d.eval(p.x) + alpha * (u - case.u_d.eval(p.x));
            s += w * ((gy[0] - go[0]).powi(2) + (gy[1] - go[1]).powi(2) + alpha * dv * dv + 2.0 * adj * dv);
        });
        Ok(s)
    }
}

/// `err^2(v)` for a control on `v`'s mesh; builds a [`ReferenceEvaluator`].
pub fn err_sq_reference(v: &FeFunction, data: &ProblemData, case: &ManufacturedCase) -> Result<f64> {
    ReferenceEvaluator::new(data, v.space().mesh())?.err_sq(v, case)
}

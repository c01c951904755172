use std::sync::{Arc, Mutex};

use super::bounds::HatControl;
use super::projection::violation;
use super::{AdmissibleSet, ProblemData};
use crate::error::{Error, Result};
use crate::fem::element::dg1_mass_inverse;
use crate::fem::{
    assemble_coupling, assemble_load, assemble_rt_forms, assemble_rt_load, assemble_stiffness, build_space, dot,
    Family, FeFunction, FeSpace, SparseOperator, SpdSolver,
};
use crate::field::{for_each_point, FluxField, GradientField, PointFn, QuadPoint, ScalarField};
use crate::mesh::Mesh;
use crate::quadrature::{quadrature, QuadratureRule};

/// Degree of the rule used for all integrals involving problem data
/// (121 points per triangle).
pub const DATA_RULE_DEGREE: usize = 20;
/// Lower clamp for the majorant weight.
pub const BETA_MIN: f64 = 1e-8;
/// Upper clamp for the majorant weight.
pub const BETA_MAX: f64 = 1e8;

/// State, flux and control spaces on one mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub state: Arc<FeSpace>,
    pub flux: Option<Arc<FeSpace>>,
    pub control: Arc<FeSpace>,
}

impl Discretization {
    /// Lagrange state space of order `p_state`, optional Raviart-Thomas flux
    /// space of order `p_flux`, discontinuous P1 controls.
    pub fn new(mesh: Arc<Mesh>, p_state: usize, p_flux: Option<usize>) -> Result<Self> {
        let state = build_space(&mesh, Family::Lagrange, p_state)?;
        let flux = p_flux.map(|p| build_space(&mesh, Family::RaviartThomas, p)).transpose()?;
        let control = build_space(&mesh, Family::Discontinuous, 1)?;
        Ok(Self { mesh, state, flux, control })
    }
}

/// Squared norms entering the majorant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorantParts {
    /// `||tau - grad z||^2`.
    pub flux_sq: f64,
    /// `||div tau + f + v||^2`.
    pub residual_sq: f64,
}

impl MajorantParts {
    /// `(1 + beta) a + (1 + beta) / beta c^2 b`.
    pub fn value(&self, beta: f64, c_omega: f64) -> f64 {
        (1.0 + beta) * self.flux_sq + (1.0 + beta) / beta * c_omega * c_omega * self.residual_sq
    }

    /// Closed-form minimizer over `beta > 0`, clamped to
    /// `[BETA_MIN, BETA_MAX]`; 1 when both parts vanish.
    pub fn beta_hat(&self, c_omega: f64) -> f64 {
        let num = c_omega * self.residual_sq.sqrt();
        let den = self.flux_sq.sqrt();
        if num == 0.0 && den == 0.0 {
            return 1.0;
        }
        if den == 0.0 {
            return BETA_MAX;
        }
        (num / den).clamp(BETA_MIN, BETA_MAX)
    }
}

struct FluxData {
    mass: SparseOperator,
    divdiv: SparseOperator,
    /// Nodal values of `div tau` in the control space.
    div_nodal: SparseOperator,
    /// `(div xi_j, psi_i)`, control rows.
    div_pair: SparseOperator,
    /// `(grad y_d, xi)`.
    grad_yd: Vec<f64>,
    /// `(f, div xi)`.
    f_div: Vec<f64>,
    solver: Mutex<(f64, SpdSolver)>,
}

/// A control problem discretized on a fixed set of spaces, with all
/// control-independent quantities precomputed.
///
/// Two evaluation paths are provided: algebraic formulas for discrete
/// controls (used by the algorithms) and quadrature with the data rule for
/// arbitrary fields (used for pointwise minimizers and as a cross-check).
pub struct DiscreteProblem {
    data: ProblemData,
    disc: Discretization,
    rule: QuadratureRule,
    areas: Vec<f64>,
    stiffness: SparseOperator,
    state_solver: SpdSolver,
    mask: Vec<bool>,
    coupling: SparseOperator,
    load_f: Vec<f64>,
    yd_dg: Vec<f64>,
    ud_dg: Vec<f64>,
    f_dg: Vec<f64>,
    f_yd: f64,
    grad_yd_sq: f64,
    ud_sq: f64,
    f_defect: f64,
    flux: Option<FluxData>,
}

impl std::fmt::Debug for DiscreteProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteProblem")
            .field("state_dofs", &self.disc.state.n_dofs())
            .field("flux_dofs", &self.disc.flux.as_ref().map(|q| q.n_dofs()))
            .field("control_dofs", &self.disc.control.n_dofs())
            .finish()
    }
}

impl DiscreteProblem {
    pub fn new(data: ProblemData, disc: Discretization) -> Result<Self> {
        Self::with_rule(data, disc, quadrature(DATA_RULE_DEGREE)?)
    }

    pub fn with_rule(data: ProblemData, disc: Discretization, rule: QuadratureRule) -> Result<Self> {
        let mesh = disc.mesh.clone();
        if !Arc::ptr_eq(disc.state.mesh(), &mesh) || !Arc::ptr_eq(disc.control.mesh(), &mesh) {
            return Err(Error::InvalidArgument("all spaces must share the mesh".into()));
        }
        disc.state.expect_family(Family::Lagrange)?;
        disc.control.expect_family(Family::Discontinuous)?;
        if let AdmissibleSet::Box { lower, upper } = data.admissible() {
            let mut bad = false;
            for_each_point(&mesh, &rule, |p, _| bad |= lower.eval(p.x) > upper.eval(p.x));
            for v in mesh.vertices() {
                bad |= lower.eval(*v) > upper.eval(*v);
            }
            if bad {
                return Err(Error::InvalidArgument("box bounds cross".into()));
            }
        }

        let areas: Vec<f64> = (0..mesh.n_triangles()).map(|t| mesh.geometry(t).area).collect();
        let mask = disc.state.dirichlet_mask().expect("Lagrange space").to_vec();
        let mut stiffness = assemble_stiffness(&disc.state)?;
        stiffness.eliminate(&mask);
        let state_solver = SpdSolver::new(stiffness.clone())?;
        let coupling = assemble_coupling(&disc.control, &disc.state)?;

        let mut load_f = assemble_load(&disc.state, data.f(), &rule)?;
        for (b, &m) in load_f.iter_mut().zip(&mask) {
            if m {
                *b = 0.0;
            }
        }
        let yd_dg = assemble_load(&disc.control, data.y_d(), &rule)?;
        let ud_dg = assemble_load(&disc.control, data.u_d(), &rule)?;
        let f_dg = assemble_load(&disc.control, data.f(), &rule)?;

        let (mut f_yd, mut grad_yd_sq, mut ud_sq, mut f_sq) = (0.0, 0.0, 0.0, 0.0);
        for_each_point(&mesh, &rule, |p, w| {
            let f = data.f().eval(p.x);
            let g = data.y_d().eval_gradient(p.x);
            let ud = data.u_d().eval(p.x);
            f_yd += w * f * data.y_d().eval(p.x);
            grad_yd_sq += w * (g[0] * g[0] + g[1] * g[1]);
            ud_sq += w * ud * ud;
            f_sq += w * f * f;
        });

        let mut problem = Self {
            data,
            disc,
            rule,
            areas,
            stiffness,
            state_solver,
            mask,
            coupling,
            load_f,
            yd_dg,
            ud_dg,
            f_dg,
            f_yd,
            grad_yd_sq,
            ud_sq,
            f_defect: 0.0,
            flux: None,
        };
        let pf = problem.mass_inv_apply(&problem.f_dg);
        problem.f_defect = (f_sq - dot(&pf, &problem.f_dg)).max(0.0);
        if let Some(q) = problem.disc.flux.clone() {
            problem.flux = Some(problem.build_flux_data(&q)?);
        }
        Ok(problem)
    }

    fn build_flux_data(&self, q: &Arc<FeSpace>) -> Result<FluxData> {
        if !Arc::ptr_eq(q.mesh(), &self.disc.mesh) {
            return Err(Error::InvalidArgument("all spaces must share the mesh".into()));
        }
        let forms = assemble_rt_forms(q, &self.disc.control)?;
        let mesh = &self.disc.mesh;
        let mut triplets = Vec::with_capacity(3 * mesh.n_triangles() * q.n_local());
        for t in 0..mesh.n_triangles() {
            let g = mesh.geometry(t);
            for i in 0..3 {
                let mut bary = [0.0; 3];
                bary[i] = 1.0;
                let p = QuadPoint { cell: t, bary, x: g.point(&bary) };
                let (_, d) = q.rt_basis(&p);
                for (j, &dof) in q.dofs(t).iter().enumerate() {
                    triplets.push((3 * t + i, dof, d[j]));
                }
            }
        }
        let div_nodal = SparseOperator::from_triplets(3 * mesh.n_triangles(), q.n_dofs(), triplets);
        let data = &self.data;
        let grad_yd = assemble_rt_load(q, &self.rule, |p| (data.y_d().eval_gradient(p.x), 0.0))?;
        let f_div = assemble_rt_load(q, &self.rule, |p| ([0.0, 0.0], data.f().eval(p.x)))?;
        let c2 = data.c_omega().powi(2);
        let solver = SpdSolver::new(forms.mass.linear_combination(1.0, &forms.divdiv, c2))?;
        Ok(FluxData {
            mass: forms.mass,
            divdiv: forms.divdiv,
            div_nodal,
            div_pair: forms.div_to_scalar,
            grad_yd,
            f_div,
            solver: Mutex::new((1.0, solver)),
        })
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.disc.mesh
    }

    pub fn state_space(&self) -> &Arc<FeSpace> {
        &self.disc.state
    }

    pub fn control_space(&self) -> &Arc<FeSpace> {
        &self.disc.control
    }

    pub fn flux_space(&self) -> Result<&Arc<FeSpace>> {
        self.disc.flux.as_ref().ok_or_else(|| Error::InvalidArgument("no flux space in this discretization".into()))
    }

    fn flux_data(&self) -> Result<&FluxData> {
        self.flux.as_ref().ok_or_else(|| Error::InvalidArgument("no flux space in this discretization".into()))
    }

    /// State stiffness matrix with Dirichlet rows and columns eliminated.
    pub fn stiffness(&self) -> &SparseOperator {
        &self.stiffness
    }

    pub fn zero_control(&self) -> FeFunction {
        FeFunction::zeros(&self.disc.control)
    }

    fn check_control(&self, v: &FeFunction) -> Result<()> {
        if !Arc::ptr_eq(v.space(), &self.disc.control) {
            return Err(Error::InvalidArgument("control does not belong to this problem".into()));
        }
        Ok(())
    }

    fn check_state(&self, z: &FeFunction) -> Result<()> {
        if !Arc::ptr_eq(z.space(), &self.disc.state) {
            return Err(Error::InvalidArgument("state does not belong to this problem".into()));
        }
        Ok(())
    }

    /// Fails with [`Error::InvalidControl`] if `v` violates the constraints
    /// by more than `1e-10`.
    pub fn check_admissible(&self, v: &FeFunction) -> Result<()> {
        self.check_control(v)?;
        let violation = violation(v, self.data.admissible());
        if violation > 1e-10 {
            return Err(Error::InvalidControl { violation });
        }
        Ok(())
    }

    /// Control-space mass matrix times `x`.
    pub fn mass_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (t, &a) in self.areas.iter().enumerate() {
            let v = &x[3 * t..3 * t + 3];
            let s: f64 = v.iter().sum();
            for i in 0..3 {
                out[3 * t + i] = a / 12.0 * (v[i] + s);
            }
        }
        out
    }

    /// Inverse control-space mass matrix times `x`.
    pub fn mass_inv_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (t, &a) in self.areas.iter().enumerate() {
            let m = dg1_mass_inverse(a);
            for i in 0..3 {
                out[3 * t + i] = (0..3).map(|j| m[i][j] * x[3 * t + j]).sum();
            }
        }
        out
    }

    /// `L2` inner product of two control coefficient vectors.
    pub fn control_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.mass_apply(b))
    }

    /// Galerkin state: `(grad y, grad z) = (f + v, z)` on the state space.
    pub fn solve_state(&self, v: &FeFunction) -> Result<FeFunction> {
        self.check_control(v)?;
        let mut rhs = self.coupling.apply_transpose(v.coefficients());
        for ((r, &b), &m) in rhs.iter_mut().zip(&self.load_f).zip(&self.mask) {
            *r = if m { 0.0 } else { *r + b };
        }
        let y = self.state_solver.solve(&rhs)?;
        FeFunction::from_coefficients_masked(&self.disc.state, y)
    }

    /// `E(z) = ||grad z||^2 - 2 (f + v, z)` for a discrete state `z`.
    pub fn energy_discrete(&self, z: &FeFunction, v: &FeFunction) -> Result<f64> {
        self.check_state(z)?;
        self.check_control(v)?;
        let c = z.coefficients();
        let cz = self.coupling.apply(c);
        Ok(self.stiffness.quadratic_form(c) - 2.0 * (dot(&self.load_f, c) + dot(v.coefficients(), &cz)))
    }

    /// `E(y_d)` for a discrete control.
    pub fn energy_desired(&self, v: &FeFunction) -> f64 {
        self.grad_yd_sq - 2.0 * (self.f_yd + dot(v.coefficients(), &self.yd_dg))
    }

    /// `||v - u_d||^2` for a discrete control.
    pub fn control_misfit_sq(&self, v: &FeFunction) -> f64 {
        let c = v.coefficients();
        (self.control_inner(c, c) - 2.0 * dot(c, &self.ud_dg) + self.ud_sq).max(0.0)
    }

    /// Lower cost bound `E(y_d) - E(q) + alpha ||v - u_d||^2` for discrete
    /// `v` and `q`.
    pub fn cost_lower_discrete(&self, v: &FeFunction, q: &FeFunction) -> Result<f64> {
        Ok(self.energy_desired(v) - self.energy_discrete(q, v)? + self.data.alpha() * self.control_misfit_sq(v))
    }

    /// Discrete cost `J_h(v)`, the lower bound at the Galerkin state, and
    /// that state.
    pub fn j_h(&self, v: &FeFunction) -> Result<(f64, FeFunction)> {
        let y = self.solve_state(v)?;
        Ok((self.cost_lower_discrete(v, &y)?, y))
    }

    /// Negative gradient of `J_h` in the control space:
    /// `2 (P(y_d - y) + alpha (P u_d - v))` with `P` the `L2` projection.
    pub fn gradient_direction(&self, v: &FeFunction, y: &FeFunction) -> Result<FeFunction> {
        self.check_control(v)?;
        self.check_state(y)?;
        let cy = self.coupling.apply(y.coefficients());
        let alpha = self.data.alpha();
        let rhs: Vec<f64> = self.yd_dg.iter().zip(&cy).zip(&self.ud_dg).map(|((a, b), u)| a - b + alpha * u).collect();
        let p = self.mass_inv_apply(&rhs);
        let d = p.iter().zip(v.coefficients()).map(|(pi, vi)| 2.0 * (pi - alpha * vi)).collect();
        FeFunction::from_coefficients(&self.disc.control, d)
    }

    /// Minimizer of the majorant over the flux space for fixed `beta`:
    /// `beta (tau, xi) + c^2 (div tau, div xi) = beta (grad y_d, xi) - c^2 (f + v, div xi)`.
    pub fn tau_hat(&self, v: &FeFunction, beta: f64) -> Result<FeFunction> {
        self.check_control(v)?;
        check_beta(beta)?;
        let fd = self.flux_data()?;
        self.solve_flux(v, beta, &fd.grad_yd)
    }

    /// Like [`DiscreteProblem::tau_hat`] with `grad z` in place of `grad y_d`
    /// for a discrete state `z`.
    pub fn tau_hat_for(&self, z: &FeFunction, v: &FeFunction, beta: f64) -> Result<FeFunction> {
        self.check_state(z)?;
        self.check_control(v)?;
        check_beta(beta)?;
        let q = self.flux_space()?;
        let grad_z = assemble_rt_load(q, &self.rule, |p| (z.gradient_at(p), 0.0))?;
        self.solve_flux(v, beta, &grad_z)
    }

    fn solve_flux(&self, v: &FeFunction, beta: f64, grad: &[f64]) -> Result<FeFunction> {
        let fd = self.flux_data()?;
        let c2 = self.data.c_omega().powi(2);
        let vdiv = fd.div_pair.apply_transpose(v.coefficients());
        let rhs: Vec<f64> = grad.iter().zip(&fd.f_div).zip(&vdiv).map(|((g, f), w)| beta * g - c2 * (f + w)).collect();
        let mut guard = fd.solver.lock().unwrap_or_else(|e| e.into_inner());
        if guard.0 != beta {
            guard.1.refactor(fd.mass.linear_combination(beta, &fd.divdiv, c2))?;
            guard.0 = beta;
        }
        let tau = guard.1.solve(&rhs)?;
        FeFunction::from_coefficients(self.flux_space()?, tau)
    }

    /// Majorant parts with `z = y_d` for discrete `v` and `tau`.
    pub fn majorant_parts(&self, v: &FeFunction, tau: &FeFunction) -> Result<MajorantParts> {
        self.check_control(v)?;
        let fd = self.flux_data()?;
        if !Arc::ptr_eq(tau.space(), self.flux_space()?) {
            return Err(Error::InvalidArgument("flux does not belong to this problem".into()));
        }
        let t = tau.coefficients();
        let flux_sq = (fd.mass.quadratic_form(t) - 2.0 * dot(t, &fd.grad_yd) + self.grad_yd_sq).max(0.0);
        // div tau + v + P f lies in the control space; f - P f is orthogonal to it.
        let pf = self.mass_inv_apply(&self.f_dg);
        let w: Vec<f64> =
            fd.div_nodal.apply(t).iter().zip(v.coefficients()).zip(&pf).map(|((d, v), p)| d + v + p).collect();
        let residual_sq = self.control_inner(&w, &w) + self.f_defect;
        Ok(MajorantParts { flux_sq, residual_sq })
    }

    pub fn beta_hat(&self, v: &FeFunction, tau: &FeFunction) -> Result<f64> {
        Ok(self.majorant_parts(v, tau)?.beta_hat(self.data.c_omega()))
    }

    /// Upper cost bound for discrete `v` and `tau`.
    pub fn cost_upper_discrete(&self, v: &FeFunction, tau: &FeFunction, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        let parts = self.majorant_parts(v, tau)?;
        Ok(parts.value(beta, self.data.c_omega()) + self.data.alpha() * self.control_misfit_sq(v))
    }

    /// `E(z) = ||grad z||^2 - 2 (f + v, z)` by quadrature.
    pub fn energy(&self, z: &dyn GradientField, v: &dyn ScalarField) -> f64 {
        let mut s = 0.0;
        for_each_point(&self.disc.mesh, &self.rule, |p, w| {
            let g = z.gradient(p);
            let f = self.data.f().eval(p.x) + v.value(p);
            s += w * (g[0] * g[0] + g[1] * g[1] - 2.0 * f * z.value(p));
        });
        s
    }

    /// `E(z) - E(q)`.
    pub fn minorant_sq(&self, z: &dyn GradientField, q: &dyn GradientField, v: &dyn ScalarField) -> f64 {
        self.energy(z, v) - self.energy(q, v)
    }

    /// `(1 + beta) ||tau - grad z||^2 + (1 + beta)/beta c^2 ||div tau + f + v||^2`.
    pub fn majorant_sq(
        &self,
        z: &dyn GradientField,
        tau: &dyn FluxField,
        beta: f64,
        v: &dyn ScalarField,
    ) -> Result<f64> {
        check_beta(beta)?;
        Ok(self.majorant_parts_quadrature(z, tau, v).value(beta, self.data.c_omega()))
    }

    pub fn majorant_parts_quadrature(
        &self,
        z: &dyn GradientField,
        tau: &dyn FluxField,
        v: &dyn ScalarField,
    ) -> MajorantParts {
        let (mut a, mut b) = (0.0, 0.0);
        for_each_point(&self.disc.mesh, &self.rule, |p, w| {
            let g = z.gradient(p);
            let t = tau.flux(p);
            let r = tau.divergence(p) + self.data.f().eval(p.x) + v.value(p);
            a += w * ((t[0] - g[0]).powi(2) + (t[1] - g[1]).powi(2));
            b += w * r * r;
        });
        MajorantParts { flux_sq: a, residual_sq: b }
    }

    /// `||v - u_d||^2` by quadrature.
    pub fn misfit_sq(&self, v: &dyn ScalarField) -> f64 {
        let mut s = 0.0;
        for_each_point(&self.disc.mesh, &self.rule, |p, w| {
            s += w * (v.value(p) - self.data.u_d().eval(p.x)).powi(2);
        });
        s
    }

    /// `E(y_d) - E(q) + alpha ||v - u_d||^2` by quadrature.
    pub fn cost_lower(&self, v: &dyn ScalarField, q: &dyn GradientField) -> f64 {
        self.minorant_sq(self.data.y_d(), q, v) + self.data.alpha() * self.misfit_sq(v)
    }

    /// Majorant at `z = y_d` plus `alpha ||v - u_d||^2`, by quadrature.
    pub fn cost_upper(&self, v: &dyn ScalarField, tau: &dyn FluxField, beta: f64) -> Result<f64> {
        Ok(self.majorant_sq(self.data.y_d(), tau, beta, v)? + self.data.alpha() * self.misfit_sq(v))
    }

    /// Pointwise minimizer of the lower bound over the admissible set:
    /// `Pi(u_d + (y_d - q) / alpha)`.
    pub fn v_hat_lower<'a>(&'a self, q: &'a FeFunction) -> Result<HatControl<'a>> {
        self.check_state(q)?;
        Ok(HatControl::lower(self, q))
    }

    /// Pointwise minimizer of the upper bound over the admissible set for
    /// fixed `tau` and `beta`.
    pub fn v_hat_upper<'a>(&'a self, tau: &'a FeFunction, beta: f64) -> Result<HatControl<'a>> {
        check_beta(beta)?;
        tau.space().expect_family(Family::RaviartThomas)?;
        Ok(HatControl::upper(self, tau, beta))
    }

    /// `min_v J_lower(v, q)`, a guaranteed lower bound of the optimal cost.
    pub fn optimal_cost_lower(&self, q: &FeFunction) -> Result<f64> {
        let v = self.v_hat_lower(q)?;
        Ok(self.cost_lower(&v, q))
    }

    /// Solves the optimality system of the unconstrained problem,
    /// `(grad y, grad z) + (P y, P z) / alpha = (f, z) + (P(u_d + y_d / alpha), z)`,
    /// returning the state and the control `P(u_d + (y_d - y) / alpha)`.
    pub fn solve_unconstrained(&self) -> Result<(FeFunction, FeFunction)> {
        let alpha = self.data.alpha();
        let mesh = &self.disc.mesh;
        let state = &self.disc.state;
        let mut triplets = Vec::new();
        for i in 0..self.stiffness.nrows() {
            for (j, a) in self.stiffness.row(i) {
                triplets.push((i, j, a));
            }
        }
        for t in 0..mesh.n_triangles() {
            let dofs = state.dofs(t);
            let minv = dg1_mass_inverse(self.areas[t]);
            let c: Vec<[f64; 3]> =
                dofs.iter().map(|&d| std::array::from_fn(|i| self.coupling.get(3 * t + i, d))).collect();
            for (a, &da) in dofs.iter().enumerate() {
                for (b, &db) in dofs.iter().enumerate() {
                    let mut s = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            s += c[a][i] * minv[i][j] * c[b][j];
                        }
                    }
                    triplets.push((da, db, s / alpha));
                }
            }
        }
        let mut op = SparseOperator::from_triplets(state.n_dofs(), state.n_dofs(), triplets);
        op.eliminate(&self.mask);
        let src: Vec<f64> = self.ud_dg.iter().zip(&self.yd_dg).map(|(u, y)| u + y / alpha).collect();
        let mut rhs = self.coupling.apply_transpose(&self.mass_inv_apply(&src));
        for ((r, &b), &m) in rhs.iter_mut().zip(&self.load_f).zip(&self.mask) {
            *r = if m { 0.0 } else { *r + b };
        }
        let y = FeFunction::from_coefficients_masked(state, SpdSolver::new(op)?.solve(&rhs)?)?;
        let cy = self.coupling.apply(y.coefficients());
        let w: Vec<f64> = self.ud_dg.iter().zip(&self.yd_dg).zip(&cy).map(|((u, d), c)| u + (d - c) / alpha).collect();
        let u = FeFunction::from_coefficients(&self.disc.control, self.mass_inv_apply(&w))?;
        Ok((y, u))
    }

    /// Evaluates `f` at the data-rule points of triangle `cell`, weighted by
    /// the absolute quadrature weights.
    pub(crate) fn for_each_point(&self, f: impl FnMut(&QuadPoint, f64)) {
        for_each_point(&self.disc.mesh, &self.rule, f)
    }

    /// Quadrature `L2` norm of a scalar field.
    pub fn l2_norm(&self, v: &dyn ScalarField) -> f64 {
        let mut s = 0.0;
        self.for_each_point(|p, w| s += w * v.value(p).powi(2));
        s.sqrt()
    }

    /// The constant zero field.
    pub fn zero_field() -> PointFn<fn(&QuadPoint) -> f64> {
        PointFn(|_| 0.0)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

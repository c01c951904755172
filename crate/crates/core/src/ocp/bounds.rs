use serde::Serialize;

use super::projection::project;
use super::{AdmissibleSet, DiscreteProblem};
use crate::error::Result;
use crate::fem::FeFunction;
use crate::field::{QuadPoint, ScalarField};

/// Output of the bound generation for one control.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBounds {
    /// Lower bound of `J(v)` (also the discrete cost `J_h(v)`).
    pub j_lower_v: f64,
    /// Upper bound of `J(v)`.
    pub j_upper_v: f64,
    /// Lower bound of the optimal cost `J(u)`.
    pub j_lower_u: f64,
    pub beta_final: f64,
    pub iterations_used: usize,
    /// Upper bound after every half step of the alternating minimization,
    /// starting with the value at the first flux and `beta = 1`.
    pub upper_history: Vec<f64>,
}

/// Two-sided bounds of `err^2(v) = J(v) - J(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrBounds {
    pub err_sq_lower: f64,
    pub err_sq_upper: f64,
}

/// `err^2(v_k)` lies between `J_lower(v_k) - J_upper(v_N)` and
/// `J_upper(v_k) - J_lower(u)`.
pub fn err_bounds(j_lower_vk: f64, j_upper_vk: f64, j_upper_vn: f64, j_lower_u: f64) -> ErrBounds {
    ErrBounds { err_sq_lower: j_lower_vk - j_upper_vn, err_sq_upper: j_upper_vk - j_lower_u }
}

enum Source<'a> {
    Lower(&'a FeFunction),
    Upper { tau: &'a FeFunction, beta: f64 },
}

/// Pointwise minimizer of one of the cost bounds over the admissible set,
/// evaluated lazily at any point of the mesh.
pub struct HatControl<'a> {
    problem: &'a DiscreteProblem,
    source: Source<'a>,
    scale: f64,
}

impl<'a> HatControl<'a> {
    pub(crate) fn lower(problem: &'a DiscreteProblem, q: &'a FeFunction) -> Self {
        Self::finish(problem, Source::Lower(q))
    }

    pub(crate) fn upper(problem: &'a DiscreteProblem, tau: &'a FeFunction, beta: f64) -> Self {
        Self::finish(problem, Source::Upper { tau, beta })
    }

    fn finish(problem: &'a DiscreteProblem, source: Source<'a>) -> Self {
        let mut hat = Self { problem, source, scale: 1.0 };
        if let AdmissibleSet::L2Ball { radius } = problem.data().admissible() {
            let mut s = 0.0;
            problem.for_each_point(|p, w| s += w * hat.raw(p).powi(2));
            let n = s.sqrt();
            if n > *radius {
                hat.scale = radius / n;
            }
        }
        hat
    }

    /// The unprojected minimizer.
    pub fn raw(&self, p: &QuadPoint) -> f64 {
        let d = self.problem.data();
        let alpha = d.alpha();
        let ud = d.u_d().eval(p.x);
        match &self.source {
            Source::Lower(q) => ud + (d.y_d().eval(p.x) - q.value_at(p)) / alpha,
            Source::Upper { tau, beta } => {
                let a = (1.0 + beta) / beta * d.c_omega().powi(2);
                let (_, div) = tau.flux_at(p);
                (alpha * ud - a * (div + d.f().eval(p.x))) / (alpha + a)
            }
        }
    }

    /// Factor applied by the ball projection (1 otherwise).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Interpolates the unprojected minimizer at the control nodes and
    /// projects the result onto the discrete admissible set.
    pub fn to_control(&self) -> Result<FeFunction> {
        let space = self.problem.control_space();
        let mesh = space.mesh();
        let mut c = Vec::with_capacity(space.n_dofs());
        for t in 0..mesh.n_triangles() {
            let g = mesh.geometry(t);
            for i in 0..3 {
                let mut bary = [0.0; 3];
                bary[i] = 1.0;
                c.push(self.raw(&QuadPoint { cell: t, bary, x: g.point(&bary) }));
            }
        }
        project(&FeFunction::from_coefficients(space, c)?, self.problem.data().admissible())
    }
}

impl ScalarField for HatControl<'_> {
    fn value(&self, p: &QuadPoint) -> f64 {
        let w = self.raw(p);
        match self.problem.data().admissible() {
            AdmissibleSet::L2Ball { .. } => self.scale * w,
            set => set.clamp_at(p.x, w),
        }
    }
}

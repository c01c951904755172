//! Finite element spaces, functions, assembly and linear solves.

mod assembly;
pub mod element;
mod sparse;

use std::sync::Arc;

pub use assembly::{
    assemble_coupling, assemble_load, assemble_mass, assemble_rt_forms, assemble_rt_load, assemble_stiffness, RtForms,
};
pub use sparse::{conjugate_gradient, dot, norm, solve_spd, SparseOperator, SpdSolver, SOLVE_TOLERANCE};

use crate::error::{Error, Result};
use crate::field::{for_each_point, Analytic};
use crate::field::{AnalyticFlux, FluxField, GradientField, QuadPoint, ScalarField};
use crate::mesh::Mesh;
use crate::quadrature::{gauss_legendre_unit, quadrature, QuadratureRule};
use element::{edge_frame, lagrange_gradients, lagrange_values, rt_edge_weights, rt_local_dim, RtBasis, MAX_LOCAL};

/// Element family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Lagrange,
    RaviartThomas,
    Discontinuous,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Lagrange => "lagrange",
            Family::RaviartThomas => "raviart_thomas",
            Family::Discontinuous => "discontinuous",
        })
    }
}

/// A finite element space on a mesh.
///
/// Lagrange spaces carry homogeneous Dirichlet conditions on the whole
/// boundary: the boundary dofs exist in the numbering but are masked.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    family: Family,
    order: usize,
    n_local: usize,
    dof_map: Vec<usize>,
    n_dofs: usize,
    dirichlet: Option<Vec<bool>>,
    rt: Option<RtBasis>,
}

/// Builds the space of `family` and `order` on `mesh`.
pub fn build_space(mesh: &Arc<Mesh>, family: Family, order: usize) -> Result<Arc<FeSpace>> {
    let nt = mesh.n_triangles();
    let nv = mesh.n_vertices();
    let ne = mesh.n_edges();
    let unsupported = || Error::UnsupportedElement { family: family.to_string(), order };
    let (n_local, n_dofs) = match (family, order) {
        (Family::Lagrange, 1) => (3, nv),
        (Family::Lagrange, 2) => (6, nv + ne),
        (Family::RaviartThomas, 1) => (3, ne),
        (Family::RaviartThomas, 2) => (8, 2 * ne + 2 * nt),
        (Family::Discontinuous, 1) => (3, 3 * nt),
        _ => return Err(unsupported()),
    };
    let mut dof_map = Vec::with_capacity(nt * n_local);
    for t in 0..nt {
        let tri = mesh.triangles()[t];
        let te = mesh.triangle_edges()[t];
        match (family, order) {
            (Family::Lagrange, _) => {
                dof_map.extend_from_slice(&tri);
                if order == 2 {
                    dof_map.extend(te.iter().map(|&e| nv + e));
                }
            }
            (Family::RaviartThomas, 1) => dof_map.extend_from_slice(&te),
            (Family::RaviartThomas, _) => {
                for &e in &te {
                    dof_map.push(2 * e);
                    dof_map.push(2 * e + 1);
                }
                dof_map.push(2 * ne + 2 * t);
                dof_map.push(2 * ne + 2 * t + 1);
            }
            (Family::Discontinuous, _) => dof_map.extend([3 * t, 3 * t + 1, 3 * t + 2]),
        }
    }
    let dirichlet = (family == Family::Lagrange).then(|| {
        let mut mask = mesh.boundary_vertex_flags().to_vec();
        if order == 2 {
            mask.extend_from_slice(mesh.boundary_edge_flags());
        }
        mask
    });
    let rt = (family == Family::RaviartThomas).then(|| RtBasis::new(mesh, order));
    Ok(Arc::new(FeSpace { mesh: mesh.clone(), family, order, n_local, dof_map, n_dofs, dirichlet, rt }))
}

impl FeSpace {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    /// Global dofs of triangle `cell`, in local order.
    pub fn dofs(&self, cell: usize) -> &[usize] {
        &self.dof_map[cell * self.n_local..(cell + 1) * self.n_local]
    }

    pub fn dirichlet_mask(&self) -> Option<&[bool]> {
        self.dirichlet.as_deref()
    }

    /// Number of dofs not fixed by the boundary condition.
    pub fn n_free_dofs(&self) -> usize {
        match &self.dirichlet {
            Some(m) => m.iter().filter(|&&b| !b).count(),
            None => self.n_dofs,
        }
    }

    pub(crate) fn expect_family(&self, expected: Family) -> Result<()> {
        if self.family != expected {
            return Err(Error::FamilyMismatch { expected: expected.to_string(), found: self.family.to_string() });
        }
        Ok(())
    }

    pub(crate) fn expect_scalar(&self) -> Result<()> {
        if self.family == Family::RaviartThomas {
            return Err(Error::FamilyMismatch { expected: "scalar".into(), found: self.family.to_string() });
        }
        Ok(())
    }

    /// Values of the local scalar basis at a point.
    pub fn scalar_basis(&self, p: &QuadPoint) -> [f64; MAX_LOCAL] {
        match self.family {
            Family::Lagrange => lagrange_values(self.order, &p.bary),
            Family::Discontinuous => lagrange_values(1, &p.bary),
            Family::RaviartThomas => panic!("scalar basis requested from a Raviart-Thomas space"),
        }
    }

    /// Physical gradients of the local scalar basis at a point.
    pub fn scalar_gradients(&self, p: &QuadPoint) -> [[f64; 2]; MAX_LOCAL] {
        let g = self.mesh.geometry(p.cell);
        match self.family {
            Family::Lagrange => lagrange_gradients(self.order, &g, &p.bary),
            Family::Discontinuous => lagrange_gradients(1, &g, &p.bary),
            Family::RaviartThomas => panic!("scalar basis requested from a Raviart-Thomas space"),
        }
    }

    /// Values and divergences of the local Raviart-Thomas basis at a point.
    pub fn rt_basis(&self, p: &QuadPoint) -> ([[f64; 2]; MAX_LOCAL], [f64; MAX_LOCAL]) {
        self.rt.as_ref().expect("not a Raviart-Thomas space").eval(p.cell, p.x)
    }

    /// Interpolation nodes of triangle `cell` (barycentric), scalar families only.
    fn scalar_nodes(&self) -> &'static [[f64; 3]] {
        const P1: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        const P2: [[f64; 3]; 6] =
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];
        if self.family == Family::Lagrange && self.order == 2 {
            &P2
        } else {
            &P1
        }
    }
}

/// A coefficient vector in a finite element space.
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coefficients: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        Self { space: space.clone(), coefficients: vec![0.0; space.n_dofs()] }
    }

    /// Wraps `coefficients`, checking the length and that Dirichlet dofs
    /// vanish.
    pub fn from_coefficients(space: &Arc<FeSpace>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.n_dofs() {
            return Err(Error::DimensionMismatch { expected: space.n_dofs(), found: coefficients.len() });
        }
        if let Some(mask) = space.dirichlet_mask() {
            if let Some(i) = mask.iter().zip(&coefficients).position(|(&m, &c)| m && c != 0.0) {
                return Err(Error::InvalidArgument(format!("Dirichlet dof {i} is nonzero")));
            }
        }
        Ok(Self { space: space.clone(), coefficients })
    }

    /// Like [`FeFunction::from_coefficients`] but zeroes Dirichlet dofs.
    pub fn from_coefficients_masked(space: &Arc<FeSpace>, mut coefficients: Vec<f64>) -> Result<Self> {
        if let Some(mask) = space.dirichlet_mask() {
            if coefficients.len() == mask.len() {
                for (c, &m) in coefficients.iter_mut().zip(mask) {
                    if m {
                        *c = 0.0;
                    }
                }
            }
        }
        Self::from_coefficients(space, coefficients)
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// `a * self + b * other`, both in the same space.
    pub fn combine(&self, a: f64, other: &FeFunction, b: f64) -> FeFunction {
        assert!(Arc::ptr_eq(&self.space, &other.space), "functions live in different spaces");
        let c = self.coefficients.iter().zip(&other.coefficients).map(|(x, y)| a * x + b * y).collect();
        FeFunction { space: self.space.clone(), coefficients: c }
    }

    fn local(&self, cell: usize) -> [f64; MAX_LOCAL] {
        let mut out = [0.0; MAX_LOCAL];
        for (o, &d) in out.iter_mut().zip(self.space.dofs(cell)) {
            *o = self.coefficients[d];
        }
        out
    }

    /// Nodal interpolant of a closed-form scalar field. Lagrange Dirichlet
    /// dofs are set to zero.
    pub fn interpolate(space: &Arc<FeSpace>, f: &Analytic) -> Result<Self> {
        space.expect_scalar()?;
        let mesh = space.mesh();
        let mut c = vec![0.0; space.n_dofs()];
        for t in 0..mesh.n_triangles() {
            let g = mesh.geometry(t);
            for (node, &d) in space.scalar_nodes().iter().zip(space.dofs(t)) {
                c[d] = f.eval(g.point(node));
            }
        }
        Self::from_coefficients_masked(space, c)
    }

    /// Canonical Raviart-Thomas interpolant (edge normal moments and, for
    /// order 2, interior moments).
    pub fn interpolate_flux(space: &Arc<FeSpace>, tau: &AnalyticFlux) -> Result<Self> {
        space.expect_family(Family::RaviartThomas)?;
        let mesh = space.mesh();
        let order = space.order();
        let ne = mesh.n_edges();
        let mut c = vec![0.0; space.n_dofs()];
        let (gs, gw) = gauss_legendre_unit(8);
        for e in 0..ne {
            let (p, q, n, len) = edge_frame(mesh, e);
            for (&s, &w) in gs.iter().zip(&gw) {
                let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                let v = (tau.flux)(x);
                let vn = v[0] * n[0] + v[1] * n[1];
                let wt = rt_edge_weights(order, s);
                if order == 1 {
                    c[e] += w * len * vn;
                } else {
                    c[2 * e] += w * len * wt[0] * vn;
                    c[2 * e + 1] += w * len * wt[1] * vn;
                }
            }
        }
        if order == 2 {
            let rule = quadrature(14)?;
            for t in 0..mesh.n_triangles() {
                let g = mesh.geometry(t);
                for (bary, w) in rule.iter() {
                    let v = (tau.flux)(g.point(bary));
                    c[2 * ne + 2 * t] += w * v[0];
                    c[2 * ne + 2 * t + 1] += w * v[1];
                }
            }
        }
        Self::from_coefficients(space, c)
    }

    /// Scalar value at a point of the space's mesh.
    pub fn value_at(&self, p: &QuadPoint) -> f64 {
        let phi = self.space.scalar_basis(p);
        let c = self.local(p.cell);
        (0..self.space.n_local).map(|i| c[i] * phi[i]).sum()
    }

    pub fn gradient_at(&self, p: &QuadPoint) -> [f64; 2] {
        let g = self.space.scalar_gradients(p);
        let c = self.local(p.cell);
        let mut out = [0.0; 2];
        for i in 0..self.space.n_local {
            out[0] += c[i] * g[i][0];
            out[1] += c[i] * g[i][1];
        }
        out
    }

    /// Flux value and divergence at a point (Raviart-Thomas only).
    pub fn flux_at(&self, p: &QuadPoint) -> ([f64; 2], f64) {
        let (v, d) = self.space.rt_basis(p);
        let c = self.local(p.cell);
        let mut out = [0.0; 2];
        let mut div = 0.0;
        for i in 0..self.space.n_local {
            out[0] += c[i] * v[i][0];
            out[1] += c[i] * v[i][1];
            div += c[i] * d[i];
        }
        (out, div)
    }
}

impl ScalarField for FeFunction {
    fn value(&self, p: &QuadPoint) -> f64 {
        self.value_at(p)
    }
}

impl GradientField for FeFunction {
    fn gradient(&self, p: &QuadPoint) -> [f64; 2] {
        self.gradient_at(p)
    }
}

impl FluxField for FeFunction {
    fn flux(&self, p: &QuadPoint) -> [f64; 2] {
        self.flux_at(p).0
    }
    fn divergence(&self, p: &QuadPoint) -> f64 {
        self.flux_at(p).1
    }
}

/// `sum_T |T| sum_q w_q f(x_q)`.
pub fn integrate(f: &dyn ScalarField, mesh: &Mesh, rule: &QuadratureRule) -> f64 {
    let mut s = 0.0;
    for_each_point(mesh, rule, |p, w| s += w * f.value(p));
    s
}

/// Number of local functions of a space description, without a mesh.
pub fn local_dim(family: Family, order: usize) -> Option<usize> {
    match (family, order) {
        (Family::Lagrange, 1) | (Family::Discontinuous, 1) => Some(3),
        (Family::Lagrange, 2) => Some(6),
        (Family::RaviartThomas, 1 | 2) => Some(rt_local_dim(order)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PointFn;
    use crate::mesh::unit_square_mesh;
    use std::f64::consts::PI;

    fn mesh(n: usize) -> Arc<Mesh> {
        Arc::new(unit_square_mesh(n).unwrap())
    }

    #[test]
    fn reference_dof_counts() {
        let m = mesh(50);
        let dims: Vec<usize> = [
            (Family::Discontinuous, 1),
            (Family::Lagrange, 1),
            (Family::RaviartThomas, 1),
            (Family::Lagrange, 2),
            (Family::RaviartThomas, 2),
        ]
        .iter()
        .map(|&(f, o)| build_space(&m, f, o).unwrap().n_dofs())
        .collect();
        assert_eq!(dims, vec![15000, 2601, 7600, 10201, 25200]);
    }

    #[test]
    fn unsupported_elements() {
        let m = mesh(2);
        for (f, o) in [(Family::Lagrange, 3), (Family::RaviartThomas, 0), (Family::Discontinuous, 2)] {
            assert!(matches!(build_space(&m, f, o), Err(Error::UnsupportedElement { .. })));
        }
    }

    #[test]
    fn dof_maps_in_range_and_shared() {
        let m = mesh(3);
        for (f, o) in
            [(Family::Lagrange, 1), (Family::Lagrange, 2), (Family::RaviartThomas, 1), (Family::RaviartThomas, 2)]
        {
            let s = build_space(&m, f, o).unwrap();
            let mut seen = vec![0usize; s.n_dofs()];
            for t in 0..m.n_triangles() {
                for &d in s.dofs(t) {
                    assert!(d < s.n_dofs());
                    seen[d] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c >= 1), "{f} {o}: unused dof");
        }
    }

    #[test]
    fn rt_normal_continuity() {
        let m = mesh(3);
        for order in 1..=2 {
            let q = build_space(&m, Family::RaviartThomas, order).unwrap();
            let coeffs: Vec<f64> = (0..q.n_dofs()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
            let tau = FeFunction::from_coefficients(&q, coeffs).unwrap();
            for e in 0..m.n_edges() {
                let [Some(t0), Some(t1)] = m.edge_triangles()[e] else { continue };
                let (p, qq, n, _) = edge_frame(&m, e);
                for s in [0.1, 0.5, 0.8] {
                    let x = [p[0] + s * (qq[0] - p[0]), p[1] + s * (qq[1] - p[1])];
                    let eval = |t: usize| {
                        let g = m.geometry(t);
                        let qp = QuadPoint { cell: t, bary: g.barycentric(x), x };
                        let v = tau.flux(&qp);
                        v[0] * n[0] + v[1] * n[1]
                    };
                    assert!((eval(t0) - eval(t1)).abs() < 1e-10, "order {order} edge {e}");
                }
            }
        }
    }

    #[test]
    fn rt_interpolation_reproduces_linear_fields() {
        let m = mesh(4);
        for order in 1..=2 {
            let q = build_space(&m, Family::RaviartThomas, order).unwrap();
            let tau = FeFunction::interpolate_flux(&q, &AnalyticFlux::new(|x| x, |_| 2.0)).unwrap();
            let rule = quadrature(4).unwrap();
            for_each_point(&m, &rule, |p, _| {
                let (v, d) = tau.flux_at(p);
                assert!((v[0] - p.x[0]).abs() < 1e-12 && (v[1] - p.x[1]).abs() < 1e-12);
                assert!((d - 2.0).abs() < 1e-10);
            });
        }
    }

    #[test]
    fn rt2_reproduces_quadratic_part() {
        let m = mesh(3);
        let q = build_space(&m, Family::RaviartThomas, 2).unwrap();
        let field = AnalyticFlux::new(|x| [x[0] * x[0] + x[1], x[0] * x[1] - 2.0 * x[0]], |x| 3.0 * x[0]);
        let tau = FeFunction::interpolate_flux(&q, &field).unwrap();
        let rule = quadrature(4).unwrap();
        for_each_point(&m, &rule, |p, _| {
            let (v, d) = tau.flux_at(p);
            let e = (field.flux)(p.x);
            assert!((v[0] - e[0]).abs() < 1e-11 && (v[1] - e[1]).abs() < 1e-11);
            assert!((d - 3.0 * p.x[0]).abs() < 1e-9);
        });
    }

    #[test]
    fn interpolation_zeroes_boundary() {
        let m = mesh(4);
        let v = build_space(&m, Family::Lagrange, 2).unwrap();
        let f = FeFunction::interpolate(&v, &Analytic::constant(1.0)).unwrap();
        let mask = v.dirichlet_mask().unwrap();
        for (c, &b) in f.coefficients().iter().zip(mask) {
            assert_eq!(*c, if b { 0.0 } else { 1.0 });
        }
        assert!(FeFunction::from_coefficients(&v, vec![1.0; v.n_dofs()]).is_err());
        assert!(matches!(FeFunction::from_coefficients(&v, vec![0.0; 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn integrate_constants_and_sines() {
        let m = unit_square_mesh(8).unwrap();
        let rule = quadrature(20).unwrap();
        assert!((integrate(&Analytic::constant(1.0), &m, &rule) - 1.0).abs() < 1e-12);
        let f = Analytic::new(|x| ((PI * x[0]).sin() * (PI * x[1]).sin()).powi(2));
        assert!((integrate(&f, &m, &rule) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn integrate_clamped_field_against_midpoint_oracle() {
        let g = |x: [f64; 2]| (10.0 * (2.0 * PI * x[0]).sin() * (PI * x[1]).sin()).clamp(-3.0, 3.0).powi(2);
        let n = 2000;
        let h = 1.0 / n as f64;
        let mut oracle = 0.0;
        for i in 0..n {
            for j in 0..n {
                oracle += g([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
            }
        }
        oracle *= h * h;
        let m = unit_square_mesh(64).unwrap();
        let rule = quadrature(20).unwrap();
        let val = integrate(&PointFn(|p: &QuadPoint| g(p.x)), &m, &rule);
        assert!((val - oracle).abs() < 1e-5 * oracle, "{val} vs {oracle}");
    }
}

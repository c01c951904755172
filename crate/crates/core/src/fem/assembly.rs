//! Global assembly of bilinear forms and load vectors.

use super::element::MAX_LOCAL;
use super::{Family, FeSpace, SparseOperator};
use crate::error::Result;
use crate::field::{for_each_point, QuadPoint, ScalarField};
use crate::quadrature::{quadrature, QuadratureRule};

type Local = [[f64; MAX_LOCAL]; MAX_LOCAL];

fn assemble_bilinear(
    rows: &FeSpace,
    cols: &FeSpace,
    rule: &QuadratureRule,
    mut kernel: impl FnMut(&QuadPoint, f64, &mut Local),
) -> SparseOperator {
    let mesh = rows.mesh();
    let (nr, nc) = (rows.n_local(), cols.n_local());
    let mut triplets = Vec::with_capacity(mesh.n_triangles() * nr * nc);
    for cell in 0..mesh.n_triangles() {
        let g = mesh.geometry(cell);
        let mut local = [[0.0; MAX_LOCAL]; MAX_LOCAL];
        for (bary, w) in rule.iter() {
            let p = QuadPoint { cell, bary: *bary, x: g.point(bary) };
            kernel(&p, w * g.area, &mut local);
        }
        for (i, &gi) in rows.dofs(cell).iter().enumerate() {
            for (j, &gj) in cols.dofs(cell).iter().enumerate() {
                triplets.push((gi, gj, local[i][j]));
            }
        }
    }
    SparseOperator::from_triplets(rows.n_dofs(), cols.n_dofs(), triplets)
}

fn default_rule(order: usize) -> QuadratureRule {
    quadrature(2 * order + 2).expect("tabulated degree")
}

/// `K_ij = (grad phi_j, grad phi_i)` on a Lagrange space, before any
/// boundary elimination.
pub fn assemble_stiffness(v: &FeSpace) -> Result<SparseOperator> {
    v.expect_family(Family::Lagrange)?;
    let n = v.n_local();
    Ok(assemble_bilinear(v, v, &default_rule(v.order()), |p, w, loc| {
        let g = v.scalar_gradients(p);
        for i in 0..n {
            for j in 0..n {
                loc[i][j] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }))
}

/// `M_ij = (phi_j, phi_i)` on a scalar space.
pub fn assemble_mass(v: &FeSpace) -> Result<SparseOperator> {
    assemble_coupling(v, v)
}

/// `C_ij = (phi_j, psi_i)` with `psi` from `rows` and `phi` from `cols`,
/// both scalar spaces on the same mesh.
pub fn assemble_coupling(rows: &FeSpace, cols: &FeSpace) -> Result<SparseOperator> {
    rows.expect_scalar()?;
    cols.expect_scalar()?;
    let (nr, nc) = (rows.n_local(), cols.n_local());
    let rule = default_rule(rows.order().max(cols.order()));
    Ok(assemble_bilinear(rows, cols, &rule, |p, w, loc| {
        let a = rows.scalar_basis(p);
        let b = cols.scalar_basis(p);
        for i in 0..nr {
            for j in 0..nc {
                loc[i][j] += w * a[i] * b[j];
            }
        }
    }))
}

/// Bilinear forms of a Raviart-Thomas space.
#[derive(Debug, Clone)]
pub struct RtForms {
    /// `(tau, xi)`.
    pub mass: SparseOperator,
    /// `(div tau, div xi)`.
    pub divdiv: SparseOperator,
    /// `(div tau, psi)` with rows indexed by the scalar space.
    pub div_to_scalar: SparseOperator,
}

/// Assembles the flux mass, the div-div form and the divergence coupling
/// against the scalar space `s`.
pub fn assemble_rt_forms(q: &FeSpace, s: &FeSpace) -> Result<RtForms> {
    q.expect_family(Family::RaviartThomas)?;
    s.expect_scalar()?;
    let n = q.n_local();
    let rule = default_rule(q.order().max(s.order()));
    let mass = assemble_bilinear(q, q, &rule, |p, w, loc| {
        let (v, _) = q.rt_basis(p);
        for i in 0..n {
            for j in 0..n {
                loc[i][j] += w * (v[i][0] * v[j][0] + v[i][1] * v[j][1]);
            }
        }
    });
    let divdiv = assemble_bilinear(q, q, &rule, |p, w, loc| {
        let (_, d) = q.rt_basis(p);
        for i in 0..n {
            for j in 0..n {
                loc[i][j] += w * d[i] * d[j];
            }
        }
    });
    let ns = s.n_local();
    let div_to_scalar = assemble_bilinear(s, q, &rule, |p, w, loc| {
        let (_, d) = q.rt_basis(p);
        let psi = s.scalar_basis(p);
        for i in 0..ns {
            for j in 0..n {
                loc[i][j] += w * psi[i] * d[j];
            }
        }
    });
    Ok(RtForms { mass, divdiv, div_to_scalar })
}

/// `b_i = (f, phi_i)` on a scalar space with the given rule. Dirichlet
/// entries are included; callers eliminate them.
pub fn assemble_load(v: &FeSpace, f: &dyn ScalarField, rule: &QuadratureRule) -> Result<Vec<f64>> {
    v.expect_scalar()?;
    let mut b = vec![0.0; v.n_dofs()];
    let n = v.n_local();
    for_each_point(v.mesh(), rule, |p, w| {
        let fv = w * f.value(p);
        if fv != 0.0 {
            let phi = v.scalar_basis(p);
            for (i, &d) in v.dofs(p.cell).iter().enumerate().take(n) {
                b[d] += fv * phi[i];
            }
        }
    });
    Ok(b)
}

/// `b_i = (g, xi_i) + (h, div xi_i)` where `data(p)` returns `(g, h)`.
pub fn assemble_rt_load(
    q: &FeSpace,
    rule: &QuadratureRule,
    data: impl Fn(&QuadPoint) -> ([f64; 2], f64),
) -> Result<Vec<f64>> {
    q.expect_family(Family::RaviartThomas)?;
    let mut b = vec![0.0; q.n_dofs()];
    for_each_point(q.mesh(), rule, |p, w| {
        let (g, h) = data(p);
        let (v, d) = q.rt_basis(p);
        for (i, &dof) in q.dofs(p.cell).iter().enumerate() {
            b[dof] += w * (g[0] * v[i][0] + g[1] * v[i][1] + h * d[i]);
        }
    });
    Ok(b)
}

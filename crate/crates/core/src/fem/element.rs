//! Local shape functions.
//!
//! Lagrange and discontinuous bases are written in barycentric coordinates and
//! are the same on every triangle. Raviart-Thomas bases are built per triangle
//! in physical coordinates: a raw polynomial basis of the local space is
//! combined so that the global degrees of freedom (normal moments on edges,
//! with the global edge orientation, and interior moments) are unisolvent.
//! Neighbouring triangles therefore agree on the normal trace of every shared
//! basis function without any sign bookkeeping.

use crate::mesh::{CellGeometry, Mesh};
use crate::quadrature::{gauss_legendre_unit, quadrature};

/// Maximum number of local shape functions of any supported element.
pub const MAX_LOCAL: usize = 8;

/// Values of the scalar Lagrange basis of `order` at barycentric `l`.
///
/// Order 2 ordering: the three vertex functions, then the edge function of
/// local edge `k` (opposite vertex `k`).
pub fn lagrange_values(order: usize, l: &[f64; 3]) -> [f64; MAX_LOCAL] {
    let mut out = [0.0; MAX_LOCAL];
    match order {
        1 => out[..3].copy_from_slice(l),
        2 => {
            for i in 0..3 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
                out[3 + i] = 4.0 * l[(i + 1) % 3] * l[(i + 2) % 3];
            }
        }
        _ => unreachable!("unsupported Lagrange order {order}"),
    }
    out
}

/// Physical gradients of the scalar Lagrange basis of `order`.
pub fn lagrange_gradients(order: usize, geom: &CellGeometry, l: &[f64; 3]) -> [[f64; 2]; MAX_LOCAL] {
    let g = &geom.grad_bary;
    let mut out = [[0.0; 2]; MAX_LOCAL];
    match order {
        1 => out[..3].copy_from_slice(g),
        2 => {
            for i in 0..3 {
                let s = 4.0 * l[i] - 1.0;
                out[i] = [s * g[i][0], s * g[i][1]];
                let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                out[3 + i] = [4.0 * (l[a] * g[b][0] + l[b] * g[a][0]), 4.0 * (l[a] * g[b][1] + l[b] * g[a][1])];
            }
        }
        _ => unreachable!("unsupported Lagrange order {order}"),
    }
    out
}

/// Number of local functions of the Raviart-Thomas element of `order`
/// (order 1 is the lowest-order element with one normal moment per edge).
pub fn rt_local_dim(order: usize) -> usize {
    match order {
        1 => 3,
        2 => 8,
        _ => unreachable!("unsupported Raviart-Thomas order {order}"),
    }
}

/// Raw polynomial basis of the local Raviart-Thomas space in the scaled
/// coordinates `xi = (x - center) / scale`, with divergences.
fn rt_raw(order: usize, center: [f64; 2], scale: f64, x: [f64; 2]) -> ([[f64; 2]; MAX_LOCAL], [f64; MAX_LOCAL]) {
    let a = (x[0] - center[0]) / scale;
    let b = (x[1] - center[1]) / scale;
    let mut v = [[0.0; 2]; MAX_LOCAL];
    let mut d = [0.0; MAX_LOCAL];
    match order {
        1 => {
            v[0] = [1.0, 0.0];
            v[1] = [0.0, 1.0];
            v[2] = [a, b];
            d[2] = 2.0 / scale;
        }
        2 => {
            v[0] = [1.0, 0.0];
            v[1] = [0.0, 1.0];
            v[2] = [a, 0.0];
            v[3] = [b, 0.0];
            v[4] = [0.0, a];
            v[5] = [0.0, b];
            v[6] = [a * a, a * b];
            v[7] = [a * b, b * b];
            d[2] = 1.0 / scale;
            d[5] = 1.0 / scale;
            d[6] = 3.0 * a / scale;
            d[7] = 3.0 * b / scale;
        }
        _ => unreachable!("unsupported Raviart-Thomas order {order}"),
    }
    (v, d)
}

/// Global orientation data of an edge: start point, end point and unit normal
/// (the tangent from the lower to the higher vertex index rotated clockwise).
pub fn edge_frame(mesh: &Mesh, edge: usize) -> ([f64; 2], [f64; 2], [f64; 2], f64) {
    let [lo, hi] = mesh.edges()[edge];
    let p = mesh.vertices()[lo];
    let q = mesh.vertices()[hi];
    let t = [q[0] - p[0], q[1] - p[1]];
    let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
    (p, q, [t[1] / len, -t[0] / len], len)
}

/// Edge weight functions for the normal moments, in the global edge
/// parameter `s` in `[0, 1]`.
pub fn rt_edge_weights(order: usize, s: f64) -> [f64; 2] {
    match order {
        1 => [1.0, 0.0],
        _ => [1.0, 2.0 * s - 1.0],
    }
}

/// Per-triangle Raviart-Thomas basis data.
#[derive(Debug, Clone)]
pub struct RtBasis {
    order: usize,
    centers: Vec<[f64; 2]>,
    scales: Vec<f64>,
    /// Row-major `n_local x n_local` coefficient matrices; column `j` holds
    /// the raw-basis coefficients of local function `j`.
    coeffs: Vec<f64>,
}

impl RtBasis {
    pub fn new(mesh: &Mesh, order: usize) -> Self {
        let n = rt_local_dim(order);
        let (gs, gw) = gauss_legendre_unit(4);
        let cell_rule = quadrature(4).expect("tabulated");
        let mut centers = Vec::with_capacity(mesh.n_triangles());
        let mut scales = Vec::with_capacity(mesh.n_triangles());
        let mut coeffs = Vec::with_capacity(mesh.n_triangles() * n * n);
        for t in 0..mesh.n_triangles() {
            let geom = mesh.geometry(t);
            let center = geom.centroid();
            let scale = (2.0 * geom.area).sqrt();
            // dofs[i][r] = dof_i(raw_r)
            let mut dofs = vec![0.0; n * n];
            for k in 0..3 {
                let e = mesh.triangle_edges()[t][k];
                let (p, q, normal, len) = edge_frame(mesh, e);
                for (&s, &w) in gs.iter().zip(&gw) {
                    let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                    let (raw, _) = rt_raw(order, center, scale, x);
                    let weights = rt_edge_weights(order, s);
                    let moments = if order == 1 { 1 } else { 2 };
                    for m in 0..moments {
                        let row = moments * k + m;
                        for r in 0..n {
                            let vn = raw[r][0] * normal[0] + raw[r][1] * normal[1];
                            dofs[row * n + r] += w * len * weights[m] * vn;
                        }
                    }
                }
            }
            if order == 2 {
                for (bary, w) in cell_rule.iter() {
                    let (raw, _) = rt_raw(order, center, scale, geom.point(bary));
                    for r in 0..n {
                        dofs[6 * n + r] += w * raw[r][0];
                        dofs[7 * n + r] += w * raw[r][1];
                    }
                }
            }
            coeffs.extend(invert(&dofs, n));
            centers.push(center);
            scales.push(scale);
        }
        Self { order, centers, scales, coeffs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Values and divergences of the local basis of `cell` at `x`.
    pub fn eval(&self, cell: usize, x: [f64; 2]) -> ([[f64; 2]; MAX_LOCAL], [f64; MAX_LOCAL]) {
        let n = rt_local_dim(self.order);
        let (raw, raw_div) = rt_raw(self.order, self.centers[cell], self.scales[cell], x);
        let c = &self.coeffs[cell * n * n..(cell + 1) * n * n];
        let mut v = [[0.0; 2]; MAX_LOCAL];
        let mut d = [0.0; MAX_LOCAL];
        for r in 0..n {
            for j in 0..n {
                let cr = c[r * n + j];
                if cr != 0.0 {
                    v[j][0] += cr * raw[r][0];
                    v[j][1] += cr * raw[r][1];
                    d[j] += cr * raw_div[r];
                }
            }
        }
        (v, d)
    }
}

/// Inverse of a small dense row-major matrix by Gauss-Jordan elimination with
/// partial pivoting.
pub(crate) fn invert(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs())).unwrap();
        assert!(m[pivot * n + col].abs() > 1e-300, "singular local matrix");
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let p = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[i * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        m[i * n + k] -= f * m[col * n + k];
                        inv[i * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    inv
}

/// Inverse of the local DG1 mass matrix `|T|/12 (I + 11^T)`.
pub fn dg1_mass_inverse(area: f64) -> [[f64; 3]; 3] {
    let s = 12.0 / area;
    let mut m = [[-0.25 * s; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += s;
    }
    m
}

//! Structured triangulations of the unit square.

use std::io::{self, Write};

use crate::error::{Error, Result};

/// A conforming triangulation with edge topology and boundary markers.
///
/// Triangles are stored counter-clockwise. Local edge `k` of a triangle is the
/// edge opposite its local vertex `k`. Edges are stored as `[lo, hi]` with
/// `lo < hi`, sorted lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_triangles: Vec<[Option<usize>; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    boundary_vertices: Vec<bool>,
    boundary_edges: Vec<bool>,
}

/// Affine geometry of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_bary: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn point(&self, bary: &[f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
            bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        ]
    }

    pub fn centroid(&self) -> [f64; 2] {
        self.point(&[1.0 / 3.0; 3])
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, x: [f64; 2]) -> [f64; 3] {
        let v = &self.vertices;
        let l1 = self.grad_bary[1][0] * (x[0] - v[0][0]) + self.grad_bary[1][1] * (x[1] - v[0][1]);
        let l2 = self.grad_bary[2][0] * (x[0] - v[0][0]) + self.grad_bary[2][1] * (x[1] - v[0][1]);
        [1.0 - l1 - l2, l1, l2]
    }
}

impl Mesh {
    /// Builds the edge topology for a set of counter-clockwise triangles.
    pub fn from_triangles(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!("triangle {t} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if det <= 0.0 {
                return Err(Error::InvalidArgument(format!("triangle {t} is not counter-clockwise")));
            }
        }

        let mut half: Vec<([usize; 2], usize, usize)> = Vec::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                half.push(([a.min(b), a.max(b)], t, k));
            }
        }
        half.sort_unstable();

        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_triangles: Vec<[Option<usize>; 2]> = Vec::new();
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (key, t, k) in half {
            if edges.last() != Some(&key) {
                edges.push(key);
                edge_triangles.push([Some(t), None]);
            } else {
                let slot = edge_triangles.last_mut().unwrap();
                if slot[1].is_some() {
                    return Err(Error::InvalidArgument(format!("edge {key:?} is shared by more than two triangles")));
                }
                slot[1] = Some(t);
            }
            triangle_edges[t][k] = edges.len() - 1;
        }

        let boundary_edges: Vec<bool> = edge_triangles.iter().map(|s| s[1].is_none()).collect();
        let mut boundary_vertices = vec![false; vertices.len()];
        for (e, &b) in edges.iter().zip(&boundary_edges) {
            if b {
                boundary_vertices[e[0]] = true;
                boundary_vertices[e[1]] = true;
            }
        }

        Ok(Self { vertices, triangles, edges, edge_triangles, triangle_edges, boundary_vertices, boundary_edges })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Triangles adjacent to each edge; the second slot is `None` on the boundary.
    pub fn edge_triangles(&self) -> &[[Option<usize>; 2]] {
        &self.edge_triangles
    }

    /// Global edge index of each local edge (local edge `k` is opposite vertex `k`).
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn boundary_vertex_flags(&self) -> &[bool] {
        &self.boundary_vertices
    }

    pub fn boundary_edge_flags(&self) -> &[bool] {
        &self.boundary_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn geometry(&self, t: usize) -> CellGeometry {
        let v = self.triangles[t].map(|i| self.vertices[i]);
        let e1 = [v[1][0] - v[0][0], v[1][1] - v[0][1]];
        let e2 = [v[2][0] - v[0][0], v[2][1] - v[0][1]];
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        // Rows of the inverse Jacobian are the gradients of lambda_1 and lambda_2.
        let g1 = [e2[1] / det, -e2[0] / det];
        let g2 = [-e1[1] / det, e1[0] / det];
        CellGeometry { vertices: v, area: 0.5 * det, grad_bary: [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2] }
    }

    /// Sum of all triangle areas.
    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.geometry(t).area).sum()
    }

    /// Writes `nv nt`, the vertex coordinates and the 0-based triangles.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {}", self.n_vertices(), self.n_triangles())?;
        for v in &self.vertices {
            writeln!(out, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Uniform `n x n` mesh of the unit square, every cell split along its
/// lower-left to upper-right diagonal.
pub fn unit_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("mesh resolution must be positive".into()));
    }
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // Exact endpoints keep boundary coordinates at 0 and 1.
            let x = if i == n { 1.0 } else { i as f64 * h };
            let y = if j == n { 1.0 } else { j as f64 * h };
            vertices.push([x, y]);
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_triangles(vertices, triangles)
}

/// Red refinement: every triangle is split into four congruent children
/// through its edge midpoints.
///
/// The children of triangle `t` are `4t..4t+4`, ordered as the corner children
/// at local vertices 0, 1, 2 followed by the middle child; see
/// [`CHILD_BARYCENTRICS`].
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(mesh.edges.iter().map(|&[a, b]| {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }));
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for (tri, te) in mesh.triangles.iter().zip(&mesh.triangle_edges) {
        let [a, b, c] = *tri;
        let [ma, mb, mc] = te.map(|e| nv + e);
        triangles.push([a, mc, mb]);
        triangles.push([mc, b, ma]);
        triangles.push([mb, ma, c]);
        triangles.push([ma, mb, mc]);
    }
    Mesh::from_triangles(vertices, triangles)
}

/// Barycentric coordinates, in the parent, of the vertices of each child
/// produced by [`refine_uniform`].
pub const CHILD_BARYCENTRICS: [[[f64; 3]; 3]; 4] = [
    [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]],
    [[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5]],
    [[0.5, 0.0, 0.5], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]],
    [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
];

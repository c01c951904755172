//! Projections onto the admissible control set in the discontinuous P1
//! control space.
//!
//! All projections are orthogonal in the `L2` inner product of the control
//! space, so they are non-expansive in any constant multiple of that norm.

use super::AdmissibleSet;
use crate::error::Result;
use crate::fem::{Family, FeFunction};

/// Tolerance up to which a control is treated as already admissible.
pub const ADMISSIBLE_TOLERANCE: f64 = 1e-12;

/// Nodal bounds of a box constraint on the control space (triangle-major,
/// node-minor, like the coefficients).
pub(crate) fn nodal_bounds(x: &FeFunction, set: &AdmissibleSet) -> Option<(Vec<f64>, Vec<f64>)> {
    let AdmissibleSet::Box { lower, upper } = set else { return None };
    let mesh = x.space().mesh();
    let mut lo = Vec::with_capacity(x.coefficients().len());
    let mut hi = Vec::with_capacity(x.coefficients().len());
    for tri in mesh.triangles() {
        for &v in tri {
            let p = mesh.vertices()[v];
            lo.push(lower.eval(p));
            hi.push(upper.eval(p));
        }
    }
    Some((lo, hi))
}

/// Squared `L2` norm of a discontinuous P1 function.
pub fn dg_norm_sq(x: &FeFunction) -> f64 {
    let mesh = x.space().mesh();
    let c = x.coefficients();
    (0..mesh.n_triangles())
        .map(|t| {
            let a = mesh.geometry(t).area;
            let v = &c[3 * t..3 * t + 3];
            let s: f64 = v.iter().sum();
            a / 12.0 * (v.iter().map(|x| x * x).sum::<f64>() + s * s)
        })
        .sum()
}

/// Largest constraint violation of a control (zero when admissible).
pub fn violation(x: &FeFunction, set: &AdmissibleSet) -> f64 {
    match set {
        AdmissibleSet::Unconstrained => 0.0,
        AdmissibleSet::Box { .. } => {
            let (lo, hi) = nodal_bounds(x, set).unwrap();
            x.coefficients()
                .iter()
                .zip(lo.iter().zip(&hi))
                .map(|(&c, (&l, &h))| (l - c).max(c - h).max(0.0))
                .fold(0.0, f64::max)
        }
        AdmissibleSet::L2Ball { radius } => (dg_norm_sq(x).sqrt() - radius).max(0.0),
    }
}

/// Orthogonal projection onto the admissible set.
pub fn project(x: &FeFunction, set: &AdmissibleSet) -> Result<FeFunction> {
    x.space().expect_family(Family::Discontinuous)?;
    match set {
        AdmissibleSet::Unconstrained => Ok(x.clone()),
        AdmissibleSet::L2Ball { radius } => {
            let n = dg_norm_sq(x).sqrt();
            if n <= radius * (1.0 + ADMISSIBLE_TOLERANCE) {
                return Ok(x.clone());
            }
            let s = radius / n;
            FeFunction::from_coefficients(x.space(), x.coefficients().iter().map(|c| s * c).collect())
        }
        AdmissibleSet::Box { .. } => {
            let (lo, hi) = nodal_bounds(x, set).unwrap();
            let c = x.coefficients();
            let mut out = Vec::with_capacity(c.len());
            for t in 0..c.len() / 3 {
                let r = 3 * t..3 * t + 3;
                let y = project_triangle(
                    c[r.clone()].try_into().unwrap(),
                    lo[r.clone()].try_into().unwrap(),
                    hi[r].try_into().unwrap(),
                );
                out.extend_from_slice(&y);
            }
            FeFunction::from_coefficients(x.space(), out)
        }
    }
}

/// Metric of the local mass matrix up to the factor `|T|/12`.
fn local_form(d: &[f64; 3]) -> f64 {
    let s: f64 = d.iter().sum();
    d.iter().map(|v| v * v).sum::<f64>() + s * s
}

/// Projection of the nodal values `x` of a linear function onto the box
/// `lo <= y <= hi` in the local mass metric `I + 11^T`.
///
/// The problem is a three-variable convex QP; every active set is tried and
/// the best feasible candidate is kept.
pub fn project_triangle(x: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> [f64; 3] {
    if (0..3).all(|i| x[i] >= lo[i] && x[i] <= hi[i]) {
        return x;
    }
    let mut best = None::<([f64; 3], f64)>;
    for code in 0..27usize {
        // 0 free, 1 at lower bound, 2 at upper bound.
        let state = [code % 3, (code / 3) % 3, code / 9];
        let mut y = [0.0; 3];
        let free: Vec<usize> = (0..3).filter(|&i| state[i] == 0).collect();
        for i in 0..3 {
            y[i] = match state[i] {
                1 => lo[i],
                2 => hi[i],
                _ => 0.0,
            };
        }
        // Stationarity on the free set: ((I + 11^T)(y - x))_i = 0, i.e.
        // y_i - x_i + S = 0 with S the sum of all differences.
        if !free.is_empty() {
            let fixed_sum: f64 = (0..3).filter(|i| state[*i] != 0).map(|i| y[i] - x[i]).sum();
            let s = fixed_sum / (1.0 + free.len() as f64);
            for &i in &free {
                y[i] = x[i] - s;
            }
        }
        let tol = 1e-14 * (1.0 + x.iter().chain(&lo).chain(&hi).fold(0.0f64, |m, v| m.max(v.abs())));
        if (0..3).any(|i| y[i] < lo[i] - tol || y[i] > hi[i] + tol) {
            continue;
        }
        for i in 0..3 {
            y[i] = y[i].clamp(lo[i], hi[i]);
        }
        let d = [y[0] - x[0], y[1] - x[1], y[2] - x[2]];
        let obj = local_form(&d);
        if best.is_none_or(|(_, b)| obj < b) {
            best = Some((y, obj));
        }
    }
    best.expect("the all-bounds active set is always feasible").0
}

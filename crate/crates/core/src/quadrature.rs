//! Quadrature rules on the reference triangle.
//!
//! Points are stored in barycentric coordinates and weights are normalized so
//! that they sum to one; the integral over a physical triangle `T` is
//! `|T| * sum_q w_q g(x_q)`.
//!
//! Degrees 1 and 2 use the classical symmetric rules. Higher degrees use a
//! collapsed (Duffy) tensor product of Gauss-Legendre rules: with `m` points
//! per direction the rule has `m*m` points and is exact up to total degree
//! `2m - 2`. The degree-20 rule therefore has 121 points.

use crate::error::{Error, Result};

/// Highest total degree for which a rule is tabulated.
pub const MAX_DEGREE: usize = 40;

/// A quadrature rule on the reference triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    degree: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Barycentric coordinates of the points.
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Weights, summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Returns a rule exact for all bivariate polynomials of total degree `degree`.
pub fn quadrature(degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree { degree, max: MAX_DEGREE });
    }
    let rule = match degree {
        0 | 1 => QuadratureRule { degree: 1, points: vec![[1.0 / 3.0; 3]], weights: vec![1.0] },
        2 => {
            let a = 2.0 / 3.0;
            let b = 1.0 / 6.0;
            QuadratureRule { degree: 2, points: vec![[a, b, b], [b, a, b], [b, b, a]], weights: vec![1.0 / 3.0; 3] }
        }
        _ => collapsed_gauss((degree + 3) / 2),
    };
    Ok(rule)
}

/// Collapsed Gauss-Legendre rule with `m` points per direction.
fn collapsed_gauss(m: usize) -> QuadratureRule {
    let (nodes, gw) = gauss_legendre_unit(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for (&eta, &w_eta) in nodes.iter().zip(&gw) {
        for (&xi, &w_xi) in nodes.iter().zip(&gw) {
            let x = xi * (1.0 - eta);
            let y = eta;
            points.push([1.0 - x - y, x, y]);
            // Reference area is 1/2; normalize to a unit total weight.
            weights.push(2.0 * w_xi * w_eta * (1.0 - eta));
        }
    }
    QuadratureRule { degree: 2 * m - 2, points, weights }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, t);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[i] = -t;
        nodes[m - 1 - i] = t;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_m(t)` and its derivative.
fn legendre(m: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

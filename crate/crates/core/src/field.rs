//! Pointwise field evaluation at quadrature points.

use std::fmt;
use std::sync::Arc;

use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;

/// A closed-form scalar function of the physical coordinates.
pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
/// A closed-form vector function of the physical coordinates.
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Location of an evaluation point: the containing triangle, barycentric
/// coordinates within it and the physical position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub cell: usize,
    pub bary: [f64; 3],
    pub x: [f64; 2],
}

pub trait ScalarField: Sync {
    fn value(&self, p: &QuadPoint) -> f64;
}

pub trait GradientField: ScalarField {
    fn gradient(&self, p: &QuadPoint) -> [f64; 2];
}

/// A vector field with a divergence, e.g. an `H(div)` flux.
pub trait FluxField: Sync {
    fn flux(&self, p: &QuadPoint) -> [f64; 2];
    fn divergence(&self, p: &QuadPoint) -> f64;
}

/// Wraps a closure over [`QuadPoint`] as a [`ScalarField`].
pub struct PointFn<F>(pub F);

impl<F: Fn(&QuadPoint) -> f64 + Sync> ScalarField for PointFn<F> {
    fn value(&self, p: &QuadPoint) -> f64 {
        (self.0)(p)
    }
}

/// A closed-form scalar field, optionally with its gradient.
#[derive(Clone)]
pub struct Analytic {
    value: ScalarFn,
    gradient: Option<VectorFn>,
}

impl Analytic {
    pub fn new(value: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self { value: Arc::new(value), gradient: None }
    }

    pub fn with_gradient(
        value: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self { value: Arc::new(value), gradient: Some(Arc::new(gradient)) }
    }

    pub fn constant(c: f64) -> Self {
        Self::with_gradient(move |_| c, |_| [0.0, 0.0])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        (self.value)(x)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Gradient at `x`.
    ///
    /// Panics if the field was built without a gradient.
    pub fn eval_gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let g = self.gradient.as_ref().expect("field has no closed-form gradient");
        g(x)
    }

    pub fn value_fn(&self) -> ScalarFn {
        self.value.clone()
    }
}

impl fmt::Debug for Analytic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analytic").field("has_gradient", &self.gradient.is_some()).finish()
    }
}

impl ScalarField for Analytic {
    fn value(&self, p: &QuadPoint) -> f64 {
        (self.value)(p.x)
    }
}

impl GradientField for Analytic {
    fn gradient(&self, p: &QuadPoint) -> [f64; 2] {
        self.eval_gradient(p.x)
    }
}

/// A closed-form vector field with its divergence.
#[derive(Clone)]
pub struct AnalyticFlux {
    pub flux: VectorFn,
    pub divergence: ScalarFn,
}

impl AnalyticFlux {
    pub fn new(
        flux: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
        divergence: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { flux: Arc::new(flux), divergence: Arc::new(divergence) }
    }
}

impl FluxField for AnalyticFlux {
    fn flux(&self, p: &QuadPoint) -> [f64; 2] {
        (self.flux)(p.x)
    }
    fn divergence(&self, p: &QuadPoint) -> f64 {
        (self.divergence)(p.x)
    }
}

/// Calls `f(point, weight)` for every quadrature point of every triangle,
/// with the weight scaled by the triangle area.
pub fn for_each_point(mesh: &Mesh, rule: &QuadratureRule, mut f: impl FnMut(&QuadPoint, f64)) {
    for cell in 0..mesh.n_triangles() {
        let g = mesh.geometry(cell);
        for (bary, w) in rule.iter() {
            let p = QuadPoint { cell, bary: *bary, x: g.point(bary) };
            f(&p, w * g.area);
        }
    }
}

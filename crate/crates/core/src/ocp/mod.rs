//! Cost functional bounds for the distributed control problem
//!
//! ```text
//! minimize J(v) = ||grad(y(v) - y_d)||^2 + alpha ||v - u_d||^2
//! subject to -Laplace y = f + v in the unit square, y = 0 on the boundary,
//!            v in C_ad.
//! ```

mod bounds;
mod problem;
pub mod projection;

pub use bounds::{err_bounds, CostBounds, ErrBounds, HatControl};
pub use problem::{DiscreteProblem, Discretization, MajorantParts, BETA_MAX, BETA_MIN, DATA_RULE_DEGREE};
pub use projection::{project, violation};

use crate::error::{Error, Result};
use crate::field::Analytic;

/// Friedrichs constant of the unit square, `1 / (sqrt(2) pi)`.
pub const UNIT_SQUARE_FRIEDRICHS: f64 = 1.0 / (std::f64::consts::SQRT_2 * std::f64::consts::PI);

/// Convex closed set of admissible controls.
#[derive(Debug, Clone)]
pub enum AdmissibleSet {
    Unconstrained,
    /// Pointwise bounds `lower <= v <= upper`.
    Box {
        lower: Analytic,
        upper: Analytic,
    },
    /// `||v|| <= radius` in `L2`.
    L2Ball {
        radius: f64,
    },
}

impl AdmissibleSet {
    /// Box with constant bounds.
    pub fn constant_box(lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::InvalidArgument(format!("empty box [{lower}, {upper}]")));
        }
        Ok(Self::Box { lower: Analytic::constant(lower), upper: Analytic::constant(upper) })
    }

    pub fn ball(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self::L2Ball { radius })
    }

    /// Pointwise projection of a value at `x`. Not defined for the ball,
    /// whose projection is global.
    pub(crate) fn clamp_at(&self, x: [f64; 2], v: f64) -> f64 {
        match self {
            Self::Box { lower, upper } => v.clamp(lower.eval(x), upper.eval(x)),
            _ => v,
        }
    }
}

/// Data of the control problem.
#[derive(Debug, Clone)]
pub struct ProblemData {
    f: Analytic,
    y_d: Analytic,
    u_d: Analytic,
    alpha: f64,
    c_omega: f64,
    admissible: AdmissibleSet,
}

impl ProblemData {
    /// `y_d` must carry its gradient. The Friedrichs constant defaults to
    /// the unit-square value.
    pub fn new(f: Analytic, y_d: Analytic, u_d: Analytic, alpha: f64, admissible: AdmissibleSet) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        if !y_d.has_gradient() {
            return Err(Error::InvalidArgument("the desired state needs a closed-form gradient".into()));
        }
        if let AdmissibleSet::L2Ball { radius } = admissible {
            AdmissibleSet::ball(radius)?;
        }
        Ok(Self { f, y_d, u_d, alpha, c_omega: UNIT_SQUARE_FRIEDRICHS, admissible })
    }

    /// Overrides the Friedrichs constant. Values below the unit-square
    /// constant would void the upper bound and are rejected.
    pub fn with_c_omega(mut self, c_omega: f64) -> Result<Self> {
        if !c_omega.is_finite() || c_omega < UNIT_SQUARE_FRIEDRICHS {
            return Err(Error::InvalidArgument(format!(
                "c_omega = {c_omega} is below the Friedrichs constant {UNIT_SQUARE_FRIEDRICHS}"
            )));
        }
        self.c_omega = c_omega;
        Ok(self)
    }

    pub fn with_admissible(mut self, admissible: AdmissibleSet) -> Self {
        self.admissible = admissible;
        self
    }

    pub fn f(&self) -> &Analytic {
        &self.f
    }

    pub fn y_d(&self) -> &Analytic {
        &self.y_d
    }

    pub fn u_d(&self) -> &Analytic {
        &self.u_d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_omega(&self) -> f64 {
        self.c_omega
    }

    pub fn admissible(&self) -> &AdmissibleSet {
        &self.admissible
    }
}

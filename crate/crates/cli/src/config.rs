use std::path::{Path, PathBuf};

use ocp_bounds::ocp::UNIT_SQUARE_FRIEDRICHS;
use ocp_bounds::{AdmissibleSet, AlgOneParams, ManufacturedParams, PgParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub alg1: AlgOneParams,
    #[serde(default)]
    pub pg: PgSection,
    #[serde(default)]
    pub c_omega: Option<f64>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub k1: u32,
    pub k2: u32,
    pub m1: u32,
    pub m2: u32,
    pub beta: f64,
    pub alpha: f64,
    #[serde(default = "default_psi_minus")]
    pub psi_minus: f64,
    #[serde(default = "default_psi_plus")]
    pub psi_plus: f64,
    /// Drops the box constraint.
    #[serde(default)]
    pub unconstrained: bool,
    /// Replaces the box by an `L2` ball of this radius.
    #[serde(default)]
    pub ball_radius: Option<f64>,
}

fn default_psi_minus() -> f64 {
    -3.0
}

fn default_psi_plus() -> f64 {
    3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub n: usize,
    pub p_state: usize,
    pub p_flux: usize,
    #[serde(default = "one")]
    pub p_control: usize,
}

fn one() -> usize {
    1
}

/// Projected gradient parameters; the bound-generation parameters live in
/// their own section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgSection {
    pub i_max_pg: usize,
    pub eps_pg: f64,
    pub lambda_max: f64,
    pub golden_tol: f64,
}

impl Default for PgSection {
    fn default() -> Self {
        let d = PgParams::default();
        Self { i_max_pg: d.i_max_pg, eps_pg: d.eps_pg, lambda_max: d.lambda_max, golden_tol: d.golden_tol }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        let d = &self.discretization;
        if d.n == 0 {
            return Err("discretization.n must be positive".into());
        }
        if !(1..=2).contains(&d.p_state) || !(1..=2).contains(&d.p_flux) {
            return Err(format!("p_state and p_flux must be 1 or 2, got {} and {}", d.p_state, d.p_flux));
        }
        if d.p_control != 1 {
            return Err(format!("only p_control = 1 is supported, got {}", d.p_control));
        }
        let p = &self.problem;
        if !(p.alpha > 0.0) || !p.alpha.is_finite() {
            return Err(format!("problem.alpha must be positive, got {}", p.alpha));
        }
        if !p.beta.is_finite() {
            return Err("problem.beta must be finite".into());
        }
        if p.unconstrained && p.ball_radius.is_some() {
            return Err("problem.unconstrained and problem.ball_radius are exclusive".into());
        }
        if !p.unconstrained && !(p.psi_minus < p.psi_plus) {
            return Err(format!("need psi_minus < psi_plus, got {} and {}", p.psi_minus, p.psi_plus));
        }
        if let Some(r) = p.ball_radius {
            AdmissibleSet::ball(r).map_err(|e| e.to_string())?;
        }
        if let Some(c) = self.c_omega {
            if !c.is_finite() || c < UNIT_SQUARE_FRIEDRICHS {
                return Err(format!("c_omega = {c} is below the Friedrichs constant {UNIT_SQUARE_FRIEDRICHS}"));
            }
        }
        self.pg_params().validate().map_err(|e| e.to_string())
    }

    /// Parameters of the manufactured case; the ball and unconstrained
    /// variants share the fields of the unconstrained family.
    pub fn manufactured(&self) -> ManufacturedParams {
        let p = &self.problem;
        let params = ManufacturedParams {
            k1: p.k1,
            k2: p.k2,
            m1: p.m1,
            m2: p.m2,
            beta: p.beta,
            alpha: p.alpha,
            psi_minus: p.psi_minus,
            psi_plus: p.psi_plus,
        };
        if p.unconstrained || p.ball_radius.is_some() {
            params.unconstrained()
        } else {
            params
        }
    }

    pub fn pg_params(&self) -> PgParams {
        PgParams {
            i_max_pg: self.pg.i_max_pg,
            eps_pg: self.pg.eps_pg,
            lambda_max: self.pg.lambda_max,
            golden_tol: self.pg.golden_tol,
            alg1: self.alg1,
        }
    }
}

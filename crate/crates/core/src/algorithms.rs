//! Bound generation for a fixed control and the projected gradient method
//! instrumented with these bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::FeFunction;
use crate::ocp::projection::{dg_norm_sq, project};
use crate::ocp::{err_bounds, AdmissibleSet, CostBounds, DiscreteProblem, ErrBounds};

/// Parameters of the alternating flux/weight minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgOneParams {
    pub i_max: usize,
    /// Stop when the relative decrease of the upper bound falls below this.
    pub eps: f64,
}

impl Default for AlgOneParams {
    fn default() -> Self {
        Self { i_max: 20, eps: 1e-4 }
    }
}

impl AlgOneParams {
    pub fn validate(&self) -> Result<()> {
        if self.i_max == 0 || !(self.eps > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid bound-generation parameters {self:?}")));
        }
        Ok(())
    }
}

/// Parameters of the projected gradient method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgParams {
    pub i_max_pg: usize,
    /// Stop when `||v_{k+1} - v_k|| / ||v_k||` falls below this.
    pub eps_pg: f64,
    /// Initial right end of the line-search interval.
    pub lambda_max: f64,
    /// Relative interval width of the golden section search.
    pub golden_tol: f64,
    #[serde(skip)]
    pub alg1: AlgOneParams,
}

impl Default for PgParams {
    fn default() -> Self {
        Self { i_max_pg: 10, eps_pg: 1e-6, lambda_max: 1.0, golden_tol: 1e-4, alg1: AlgOneParams::default() }
    }
}

impl PgParams {
    pub fn validate(&self) -> Result<()> {
        self.alg1.validate()?;
        if self.i_max_pg == 0 || !(self.eps_pg > 0.0) || !(self.lambda_max > 0.0) || !(self.golden_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid projected-gradient parameters {self:?}")));
        }
        Ok(())
    }
}

/// Largest number of doublings of the line-search interval.
pub const MAX_DOUBLINGS: u32 = 10;

/// Two-sided bounds of `J(v)` and a lower bound of `J(u)` for an admissible
/// discrete control `v`.
pub fn generate_cost_estimates(problem: &DiscreteProblem, v: &FeFunction, params: &AlgOneParams) -> Result<CostBounds> {
    Ok(estimates_with_state(problem, v, params)?.0)
}

fn estimates_with_state(
    problem: &DiscreteProblem,
    v: &FeFunction,
    params: &AlgOneParams,
) -> Result<(CostBounds, FeFunction)> {
    params.validate()?;
    problem.check_admissible(v)?;
    let (j_lower_v, y) = problem.j_h(v)?;
    let j_lower_u = problem.optimal_cost_lower(&y)?;

    let mut beta = 1.0;
    let mut tau = problem.tau_hat(v, beta)?;
    let mut upper = problem.cost_upper_discrete(v, &tau, beta)?;
    let mut history = vec![upper];
    let mut iterations_used = 0;
    for k in 1..=params.i_max {
        if k > 1 {
            tau = problem.tau_hat(v, beta)?;
            history.push(problem.cost_upper_discrete(v, &tau, beta)?);
        }
        let prev = upper;
        beta = problem.beta_hat(v, &tau)?;
        upper = problem.cost_upper_discrete(v, &tau, beta)?;
        history.push(upper);
        iterations_used = k;
        if (prev - upper) / upper < params.eps {
            break;
        }
    }
    let bounds = CostBounds {
        j_lower_v,
        j_upper_v: upper,
        j_lower_u,
        beta_final: beta,
        iterations_used,
        upper_history: history,
    };
    Ok((bounds, y))
}

/// Golden section search for the minimizer of `phi` on `[0, lambda_max]`,
/// stopping when the bracket is narrower than `tol * lambda_max`. Returns
/// the best point evaluated in the final bracket and its value.
pub fn golden_section_with_value(
    mut phi: impl FnMut(f64) -> Result<f64>,
    lambda_max: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, lambda_max);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (phi(c)?, phi(d)?);
    while b - a > tol * lambda_max {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = phi(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = phi(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Minimizer of a unimodal `phi` on `[0, lambda_max]` to within
/// `tol * lambda_max`.
pub fn golden_section(mut phi: impl FnMut(f64) -> f64, lambda_max: f64, tol: f64) -> f64 {
    golden_section_with_value(|l| Ok(phi(l)), lambda_max, tol).expect("infallible").0
}

/// `Pi(v + s d)`.
pub fn update_rule(v: &FeFunction, d: &FeFunction, s: f64, set: &AdmissibleSet) -> Result<FeFunction> {
    if s == 0.0 {
        return project(v, set);
    }
    project(&v.combine(1.0, d, s), set)
}

/// One iteration of the projected gradient method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PgRecord {
    pub k: usize,
    pub j_lower_v: f64,
    pub j_upper_v: f64,
    pub j_lower_u: f64,
    pub beta: f64,
    pub alg1_iterations: usize,
    /// Upper bound after each half step of the bound generation.
    pub upper_history: Vec<f64>,
    pub step: f64,
    /// Discrete cost at the next iterate.
    pub j_next: f64,
    /// `||v_{k+1} - v_k|| / ||v_k||`, absent when `v_k = 0`.
    pub change_ratio: Option<f64>,
    pub err: Option<ErrBounds>,
}

/// Output of the projected gradient method.
#[derive(Debug, Clone)]
pub struct PgTrace {
    pub records: Vec<PgRecord>,
    /// `v_k` for every record.
    pub iterates: Vec<FeFunction>,
    /// Lower bound of `J(u)` from the last iterate.
    pub final_j_lower_u: Option<f64>,
}

impl PgTrace {
    fn new() -> Self {
        Self { records: Vec::new(), iterates: Vec::new(), final_j_lower_u: None }
    }

    /// Fills the error bounds of every record from the last one.
    fn attach_err_bounds(&mut self) {
        let Some(last) = self.records.last() else { return };
        let (upper_n, lower_u) = (last.j_upper_v, last.j_lower_u);
        self.final_j_lower_u = Some(lower_u);
        for r in &mut self.records {
            r.err = Some(err_bounds(r.j_lower_v, r.j_upper_v, upper_n, lower_u));
        }
    }
}

/// A failed run with everything computed before the failure.
#[derive(Debug, Clone)]
pub struct PgFailure {
    pub trace: PgTrace,
    pub error: Error,
}

impl std::fmt::Display for PgFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "projected gradient failed after {} iterations: {}", self.trace.records.len(), self.error)
    }
}

impl std::error::Error for PgFailure {}

/// Projected gradient method with exact line search by golden section; every
/// iterate carries guaranteed bounds of its cost.
pub fn projected_gradient(
    problem: &DiscreteProblem,
    v0: &FeFunction,
    params: &PgParams,
) -> std::result::Result<PgTrace, Box<PgFailure>> {
    let mut trace = PgTrace::new();
    match run(problem, v0, params, &mut trace) {
        Ok(()) => Ok(trace),
        Err(error) => {
            trace.attach_err_bounds();
            Err(Box::new(PgFailure { trace, error }))
        }
    }
}

fn run(problem: &DiscreteProblem, v0: &FeFunction, params: &PgParams, trace: &mut PgTrace) -> Result<()> {
    params.validate()?;
    let set = problem.data().admissible();
    let mut v = v0.clone();
    for k in 0..params.i_max_pg {
        let (bounds, y) = estimates_with_state(problem, &v, &params.alg1)?;
        let d = problem.gradient_direction(&v, &y)?;
        let phi0 = bounds.j_lower_v;
        let mut phi = |l: f64| -> Result<f64> { Ok(problem.j_h(&update_rule(&v, &d, l, set)?)?.0) };
        let (step, j_next) = if dg_norm_sq(&d) == 0.0 { (0.0, phi0) } else { line_search(&mut phi, phi0, params)? };
        let next = update_rule(&v, &d, step, set)?;
        let vn = dg_norm_sq(&v).sqrt();
        let change_ratio = (vn > 0.0).then(|| dg_norm_sq(&next.combine(1.0, &v, -1.0)).sqrt() / vn);
        trace.records.push(PgRecord {
            k,
            j_lower_v: bounds.j_lower_v,
            j_upper_v: bounds.j_upper_v,
            j_lower_u: bounds.j_lower_u,
            beta: bounds.beta_final,
            alg1_iterations: bounds.iterations_used,
            upper_history: bounds.upper_history,
            step,
            j_next,
            change_ratio,
            err: None,
        });
        trace.iterates.push(v);
        v = next;
        if change_ratio.is_some_and(|r| r < params.eps_pg) {
            break;
        }
    }
    trace.attach_err_bounds();
    Ok(())
}

/// Golden section on `[0, lambda_max]`, doubling the interval while the
/// minimizer sits at its right end. Falls back to a zero step if the search
/// does not improve on `phi(0)`.
fn line_search(phi: &mut impl FnMut(f64) -> Result<f64>, phi0: f64, params: &PgParams) -> Result<(f64, f64)> {
    let mut lambda_max = params.lambda_max;
    let mut doublings = 0;
    loop {
        let (l, v) = golden_section_with_value(&mut *phi, lambda_max, params.golden_tol)?;
        let at_end = l >= lambda_max * (1.0 - 2.0 * params.golden_tol);
        if at_end && doublings < MAX_DOUBLINGS {
            lambda_max *= 2.0;
            doublings += 1;
            continue;
        }
        return Ok(if v <= phi0 { (l, v) } else { (0.0, phi0) });
    }
}

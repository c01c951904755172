//! `ocp-bounds`: runs the projected gradient method with guaranteed cost
//! bounds on the manufactured example and writes the bound trace.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use ocp_bounds::algorithms::golden_section_with_value;
use ocp_bounds::ocp::project;
use ocp_bounds::problems::{majorant_unconstrained, solve_unconstrained_system, NuMode};
use ocp_bounds::verify::{run_suite, Fault};
use ocp_bounds::{
    build_case, build_space, generate_cost_estimates, projected_gradient, reference_cost, unit_square_mesh,
    AdmissibleSet, DiscreteProblem, Discretization, Error, Family, FeFunction, ManufacturedCase, PgRecord, PgTrace,
    ProblemData,
};
use serde::Serialize;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "ocp-bounds", version, about = "Guaranteed cost bounds for a distributed control problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the projected gradient method and write trace.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound the cost of one control.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Coefficient file: a count line, then one value per line.
        #[arg(long, conflicts_with = "zero_control")]
        control: Option<PathBuf>,
        /// Use the zero control instead of the interpolated optimum.
        #[arg(long)]
        zero_control: bool,
    },
    /// Print the dimensions of the control, state and flux spaces.
    Dofs {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the invariant self-checks.
    Verify {
        /// Validate this config before running.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject: Option<Injected>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Injected {
    MajorantSign,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SolverFailure { .. } | Error::Precision(_) => Self::numeric(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Estimate { config, control, zero_control } => cmd_estimate(&config, control.as_deref(), zero_control),
        Command::Dofs { config } => cmd_dofs(&config),
        Command::Verify { config, inject } => cmd_verify(config.as_deref(), inject),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(Failure::input)
}

struct Setup {
    case: ManufacturedCase,
    problem: DiscreteProblem,
}

fn setup(config: &RunConfig) -> Result<Setup, Failure> {
    let case = build_case(config.manufactured())?;
    let mut data: ProblemData = case.problem_data()?;
    if let Some(r) = config.problem.ball_radius {
        data = data.with_admissible(AdmissibleSet::ball(r)?);
    }
    if let Some(c) = config.c_omega {
        data = data.with_c_omega(c)?;
    }
    let d = &config.discretization;
    let mesh = Arc::new(unit_square_mesh(d.n)?);
    let problem = DiscreteProblem::new(data, Discretization::new(mesh, d.p_state, Some(d.p_flux))?)?;
    Ok(Setup { case, problem })
}

#[derive(Serialize)]
struct UnconstrainedCheck {
    /// Discrete cost of the control recovered from the optimality system.
    j_h: f64,
    j_lower_v: f64,
    j_upper_v: f64,
    j_lower_u: f64,
    /// Error majorant of the optimality-system state.
    majorant: f64,
    majorant_beta: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a RunConfig,
    dofs: Dofs,
    iterations: usize,
    final_j_lower_v: Option<f64>,
    final_j_upper_v: Option<f64>,
    final_j_lower_u: Option<f64>,
    /// Closed-form optimal cost, when the case has one.
    j_opt: Option<f64>,
    error: Option<String>,
    records: &'a [PgRecord],
    unconstrained: Option<UnconstrainedCheck>,
}

#[derive(Serialize)]
struct Dofs {
    control: usize,
    state: usize,
    flux: usize,
}

fn dofs_of(problem: &DiscreteProblem) -> Dofs {
    Dofs {
        control: problem.control_space().n_dofs(),
        state: problem.state_space().n_dofs(),
        flux: problem.flux_space().map(|q| q.n_dofs()).unwrap_or(0),
    }
}

#[derive(Serialize)]
struct Row {
    iter: usize,
    #[serde(rename = "J_lower_v")]
    j_lower_v: f64,
    #[serde(rename = "J_upper_v")]
    j_upper_v: f64,
    #[serde(rename = "J_lower_u")]
    j_lower_u: f64,
    step: f64,
    err_sq_lower: Option<f64>,
    err_sq_upper: Option<f64>,
}

fn write_trace(path: &Path, trace: &PgTrace) -> Result<(), Failure> {
    let io = |e: csv::Error| Failure::numeric(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in &trace.records {
        w.serialize(Row {
            iter: r.k,
            j_lower_v: r.j_lower_v,
            j_upper_v: r.j_upper_v,
            j_lower_u: r.j_lower_u,
            step: r.step,
            err_sq_lower: r.err.map(|e| e.err_sq_lower),
            err_sq_upper: r.err.map(|e| e.err_sq_upper),
        })
        .map_err(io)?;
    }
    if trace.records.is_empty() {
        w.write_record(["iter", "J_lower_v", "J_upper_v", "J_lower_u", "step", "err_sq_lower", "err_sq_upper"])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Failure::numeric(format!("cannot write {}: {e}", path.display())))
}

fn unconstrained_check(config: &RunConfig, problem: &DiscreteProblem) -> Result<UnconstrainedCheck, Failure> {
    let (y, u) = solve_unconstrained_system(problem)?;
    let bounds = generate_cost_estimates(problem, &u, &config.alg1)?;
    // minimize over log10(beta) in [-12, 4]
    let eval = |t: f64| -> ocp_bounds::Result<f64> {
        let beta = 10f64.powf(t - 12.0);
        let tau = problem.tau_hat_for(&y, &u, beta)?;
        majorant_unconstrained(problem, &y, &tau, beta, NuMode::Optimal)
    };
    let (t, best) = golden_section_with_value(eval, 16.0, 1e-3)?;
    let best_beta = 10f64.powf(t - 12.0);
    Ok(UnconstrainedCheck {
        j_h: problem.j_h(&u)?.0,
        j_lower_v: bounds.j_lower_v,
        j_upper_v: bounds.j_upper_v,
        j_lower_u: bounds.j_lower_u,
        majorant: best,
        majorant_beta: best_beta,
    })
}

fn cmd_run(config_path: &Path, out: Option<PathBuf>) -> CmdResult {
    let config = load(config_path)?;
    let Setup { case, problem } = setup(&config)?;
    let dir = out.unwrap_or_else(|| config.output.dir.clone());
    fs::create_dir_all(&dir).map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;

    let (trace, error) = match projected_gradient(&problem, &problem.zero_control(), &config.pg_params()) {
        Ok(t) => (t, None),
        Err(f) => (f.trace, Some(f.error)),
    };
    write_trace(&dir.join("trace.csv"), &trace)?;

    let unconstrained = match (&error, problem.data().admissible()) {
        (None, AdmissibleSet::Unconstrained) => Some(unconstrained_check(&config, &problem)),
        _ => None,
    }
    .transpose();
    let (unconstrained, late_error) = match unconstrained {
        Ok(u) => (u, None),
        Err(f) => (None, Some(f)),
    };
    let j_opt = match problem.data().admissible() {
        AdmissibleSet::L2Ball { .. } => None,
        _ => reference_cost(&case, 1000).ok().map(|r| r.j_opt),
    };
    let last = trace.records.last();
    let summary = Summary {
        config: &config,
        dofs: dofs_of(&problem),
        iterations: trace.records.len(),
        final_j_lower_v: last.map(|r| r.j_lower_v),
        final_j_upper_v: last.map(|r| r.j_upper_v),
        final_j_lower_u: trace.final_j_lower_u,
        j_opt,
        error: error.as_ref().map(|e| e.to_string()).or_else(|| late_error.as_ref().map(|f| f.message.clone())),
        records: &trace.records,
        unconstrained,
    };
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Failure::numeric(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Failure::numeric(format!("cannot write {}: {e}", path.display())))?;

    if let Some(e) = error {
        return Err(Failure::numeric(format!("run stopped after {} iterations: {e}", trace.records.len())));
    }
    if let Some(f) = late_error {
        return Err(f);
    }
    if let Some(r) = last {
        println!(
            "{} iterations; J_h = {:.8e} in [{:.8e}, {:.8e}]; J(u) >= {:.8e}",
            trace.records.len(),
            r.j_lower_v,
            r.j_lower_v,
            r.j_upper_v,
            r.j_lower_u
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

/// Reads a coefficient file: a count line followed by one value per line.
fn read_control(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let bad = |what: &str| Failure::input(format!("{}: {what}", path.display()));
    let count: usize = lines.next().ok_or_else(|| bad("empty file"))?.parse().map_err(|_| bad("bad count line"))?;
    let values = lines
        .enumerate()
        .map(|(i, l)| l.parse::<f64>().map_err(|_| bad(&format!("bad value on line {}", i + 2))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != count {
        return Err(bad(&format!("count line says {count}, found {} values", values.len())));
    }
    Ok(values)
}

fn cmd_estimate(config_path: &Path, control: Option<&Path>, zero: bool) -> CmdResult {
    let config = load(config_path)?;
    let Setup { case, problem } = setup(&config)?;
    let space = problem.control_space();
    let v = if let Some(path) = control {
        let c = read_control(path)?;
        if c.len() != space.n_dofs() {
            return Err(Failure::input(format!(
                "control has {} coefficients, the space has {}",
                c.len(),
                space.n_dofs()
            )));
        }
        FeFunction::from_coefficients(space, c)?
    } else if zero {
        problem.zero_control()
    } else {
        project(&FeFunction::interpolate(space, &case.u_opt)?, problem.data().admissible())?
    };
    let b = generate_cost_estimates(&problem, &v, &config.alg1)?;
    println!("J_lower_v = {:.12e}", b.j_lower_v);
    println!("J_upper_v = {:.12e}", b.j_upper_v);
    println!("J_lower_u = {:.12e}", b.j_lower_u);
    println!("beta = {:.6e} after {} iterations", b.beta_final, b.iterations_used);
    Ok(())
}

fn cmd_dofs(config_path: &Path) -> CmdResult {
    let config = load(config_path)?;
    let d = &config.discretization;
    let mesh = Arc::new(unit_square_mesh(d.n)?);
    let dg = build_space(&mesh, Family::Discontinuous, d.p_control)?.n_dofs();
    let v = build_space(&mesh, Family::Lagrange, d.p_state)?.n_dofs();
    let rt = build_space(&mesh, Family::RaviartThomas, d.p_flux)?.n_dofs();
    println!("{dg} {v} {rt}");
    Ok(())
}

fn cmd_verify(config: Option<&Path>, inject: Option<Injected>) -> CmdResult {
    if let Some(path) = config {
        load(path)?;
    }
    let fault = inject.map(|Injected::MajorantSign| Fault::MajorantSign);
    let outcomes = run_suite(fault)?;
    let mut failed = Vec::new();
    for c in &outcomes {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {} (worst {:.3e}; {})", c.name, c.worst, c.detail);
        if !c.passed {
            failed.push(c.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: 1, message: format!("failed invariants: {}", failed.join(", ")) })
    }
}

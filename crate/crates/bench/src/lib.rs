//! Shared setup for the benchmarks in `benches/`.

use std::sync::Arc;

use ocp_bounds::{build_case, unit_square_mesh, DiscreteProblem, Discretization, ManufacturedParams, Mesh};

pub fn mesh(n: usize) -> Arc<Mesh> {
    Arc::new(unit_square_mesh(n).expect("valid mesh size"))
}

/// The manufactured example with equal state and flux orders.
pub fn box_problem(n: usize, order: usize) -> DiscreteProblem {
    let data =
        build_case(ManufacturedParams::box_constrained()).and_then(|c| c.problem_data()).expect("box-constrained case");
    let disc = Discretization::new(mesh(n), order, Some(order)).expect("supported orders");
    DiscreteProblem::new(data, disc).expect("problem setup")
}

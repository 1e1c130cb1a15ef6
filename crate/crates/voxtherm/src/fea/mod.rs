//! Thermo-elastic finite elements on the voxel grid: element kernels,
//! matrix-free operators, preconditioned CG solves, thermal loads, stress
//! recovery and compliance.

mod cg;
mod kernels;
mod operator;
mod solve;

pub use cg::{pcg, CgError, CgOutcome, CgSettings};
pub use kernels::{ke_matvec, kte_matvec, ElementKernels, CORNER_SIGNS};
pub use operator::{
    active_struct_dofs, apply_operator, attached_nodes, operator_diagonal, OperatorKind,
    OperatorWorkspace,
};
pub use solve::{
    assemble_structural_load, assemble_thermal_load, compliance, pcg_struct, pcg_thermal,
    recover_stress, solve_structural, solve_thermal, FeaError, Fields, FloatingPolicy,
    StructuralSolution, ThermalSolution,
};

use crate::grid::{BoundaryConditions, DesignState, VoxelGrid};
use crate::real::Real;

/// Solve the full weakly-coupled sequence on a design: temperature, loads,
/// displacement, stress. Returns the fields plus the number of CG solves.
#[allow(clippy::too_many_arguments)]
pub fn solve_fields<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    bc: &BoundaryConditions<F>,
    weights: Option<&[F]>,
    settings: &CgSettings<F>,
    theta0: Option<&[F]>,
    d0: Option<&[F]>,
    policy: FloatingPolicy,
) -> Result<(Fields<F>, usize), FeaError> {
    let thermal = solve_thermal(grid, kernels, design, bc, weights, settings, theta0, policy)?;
    let mut solves = thermal.outcome.is_some() as usize;
    let f_st = assemble_structural_load(grid, bc);
    let f_th = assemble_thermal_load(grid, kernels, design, &thermal.theta, weights);
    let mut f_total = vec![F::zero(); f_st.len()];
    for i in 0..f_st.len() {
        f_total[i] = f_st[i] + f_th[i];
    }
    let structural = solve_structural(
        grid, kernels, design, bc, weights, &f_total, settings, d0,
    )?;
    solves += 1;
    let stress = recover_stress(grid, kernels, design, &structural.d, &thermal.theta);
    Ok((
        Fields {
            theta: thermal.theta,
            d: structural.d,
            f_st,
            f_th,
            stress,
        },
        solves,
    ))
}

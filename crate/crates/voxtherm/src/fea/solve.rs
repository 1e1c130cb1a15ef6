//! Load assembly, thermal and structural solves, stress recovery, compliance.

use super::cg::{pcg, CgError, CgOutcome, CgSettings};
use super::kernels::{ElementKernels, CORNER_SIGNS};
use super::operator::{
    active_struct_dofs, apply_operator, attached_nodes, operator_diagonal, OperatorKind,
    OperatorWorkspace,
};
use crate::grid::{BoundaryConditions, DesignState, Face, ThermalMode, VoxelGrid};
use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeaError {
    #[error("design has no solid elements")]
    AllVoid,
    #[error("{nodes} solid nodes have no conduction path to a prescribed-temperature node")]
    FloatingNodes { nodes: usize },
    #[error("thermal solve failed: {0}")]
    Thermal(#[source] CgError),
    #[error("structural solve failed: {0}")]
    Structural(#[source] CgError),
}

/// How to treat solid regions with no conduction path to a Dirichlet node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloatingPolicy {
    /// Fail with a singularity error.
    Strict,
    /// Pin unreachable nodes to zero temperature rise. Such regions carry no
    /// thermal strain, which is also what free expansion of an unconstrained
    /// island would produce.
    PinToReference,
}

/// Solved nodal and element fields on a design.
#[derive(Debug, Clone)]
pub struct Fields<F> {
    /// Nodal temperature rise above reference (degC).
    pub theta: Vec<F>,
    /// Nodal displacements (m); zero on fixed and detached DOFs.
    pub d: Vec<F>,
    /// Structural load vector (N).
    pub f_st: Vec<F>,
    /// Thermal load vector (N).
    pub f_th: Vec<F>,
    /// Centroid stresses per element, ordering s11 s22 s33 s12 s13 s23 (Pa).
    /// Zero on void elements; validity is defined by the design indicator.
    pub stress: Vec<[F; 6]>,
}

/// Assemble point loads and face pressures into a structural load vector.
///
/// A uniform pressure on a rectangular element face lumps to equal quarters
/// at the face corners, which is the consistent bilinear result.
pub fn assemble_structural_load<F: Real>(
    grid: &VoxelGrid<F>,
    bc: &BoundaryConditions<F>,
) -> Vec<F> {
    let mut f = vec![F::zero(); grid.num_struct_dofs()];
    for &(node, force) in &bc.point_loads {
        for axis in 0..3 {
            f[3 * node + axis] += force[axis];
        }
    }
    for &(face, pressure, dir) in &bc.face_pressures {
        let (area, sign_axis, sign) = match face {
            Face::XMin => (grid.hy * grid.hz, 0, -1.0),
            Face::XMax => (grid.hy * grid.hz, 0, 1.0),
            Face::YMin => (grid.hx * grid.hz, 1, -1.0),
            Face::YMax => (grid.hx * grid.hz, 1, 1.0),
            Face::ZMin => (grid.hx * grid.hy, 2, -1.0),
            Face::ZMax => (grid.hx * grid.hy, 2, 1.0),
        };
        let quarter = pressure * area * F::of(0.25);
        for e in grid.face_elements(face) {
            let nodes = grid.element_nodes(e);
            for (c, &n) in nodes.iter().enumerate() {
                if CORNER_SIGNS[c][sign_axis] == sign {
                    for axis in 0..3 {
                        f[3 * n as usize + axis] += quarter * dir[axis];
                    }
                }
            }
        }
    }
    f
}

/// f_th = sum over solid elements of the element thermal load for its average
/// temperature rise.
pub fn assemble_thermal_load<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    theta: &[F],
    weights: Option<&[F]>,
) -> Vec<F> {
    let mut f = vec![F::zero(); grid.num_struct_dofs()];
    let eighth = F::of(0.125);
    for e in 0..grid.num_elements() {
        if !design.solid[e] {
            continue;
        }
        let nodes = grid.element_nodes(e);
        let mut avg = F::zero();
        for &n in nodes {
            avg += theta[n as usize];
        }
        avg *= eighth;
        if let Some(w) = weights {
            avg *= w[e];
        }
        for (c, &n) in nodes.iter().enumerate() {
            for axis in 0..3 {
                f[3 * n as usize + axis] += kernels.hcol[3 * c + axis] * avg;
            }
        }
    }
    f
}

/// Nodes reachable from the prescribed set through solid elements.
fn reachable_from<F: Real>(
    grid: &VoxelGrid<F>,
    design: &DesignState,
    seeds: &[usize],
) -> Vec<bool> {
    let mut seen = vec![false; grid.num_nodes()];
    let mut stack: Vec<usize> = Vec::new();
    for &s in seeds {
        if !seen[s] {
            seen[s] = true;
            stack.push(s);
        }
    }
    while let Some(n) = stack.pop() {
        for &(e, _) in grid.node_elements(n) {
            if !design.solid[e as usize] {
                continue;
            }
            for &m in grid.element_nodes(e as usize) {
                let m = m as usize;
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
    }
    seen
}

pub struct ThermalSolution<F> {
    pub theta: Vec<F>,
    pub outcome: Option<CgOutcome>,
    pub floating_nodes: usize,
}

/// Temperature rise field for the current design.
///
/// Uniform mode bypasses the solve: theta = delta everywhere. Dirichlet mode
/// solves the conduction problem with prescribed rises held exactly; the
/// reported relative residual honours the solver tolerance.
pub fn solve_thermal<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    bc: &BoundaryConditions<F>,
    weights: Option<&[F]>,
    settings: &CgSettings<F>,
    x0: Option<&[F]>,
    policy: FloatingPolicy,
) -> Result<ThermalSolution<F>, FeaError> {
    let n = grid.num_nodes();
    match &bc.thermal {
        ThermalMode::UniformDelta(delta) => Ok(ThermalSolution {
            theta: vec![*delta; n],
            outcome: None,
            floating_nodes: 0,
        }),
        ThermalMode::Dirichlet { prescribed, flux } => {
            if design.num_solid() == 0 {
                return Err(FeaError::AllVoid);
            }
            let attached = attached_nodes(grid, design);
            let seeds: Vec<usize> = prescribed
                .iter()
                .map(|&(node, _)| node)
                .filter(|&node| attached[node])
                .collect();
            let reachable = reachable_from(grid, design, &seeds);
            let floating = (0..n).filter(|&i| attached[i] && !reachable[i]).count();
            if floating > 0 && policy == FloatingPolicy::Strict {
                return Err(FeaError::FloatingNodes { nodes: floating });
            }

            let mut theta_p = vec![F::zero(); n];
            let mut is_prescribed = vec![false; n];
            for &(node, val) in prescribed {
                theta_p[node] = val;
                is_prescribed[node] = true;
            }
            // Unreachable nodes are pinned at zero rise.
            let mut active = vec![false; n];
            for i in 0..n {
                active[i] = attached[i] && reachable[i] && !is_prescribed[i];
            }

            // b = q - K_t * theta_p on the active set
            let mut ws = OperatorWorkspace::new(grid);
            let mut b = vec![F::zero(); n];
            apply_operator(
                grid,
                kernels,
                design,
                OperatorKind::Thermal,
                weights,
                &theta_p,
                &mut b,
                &mut ws,
            );
            for v in b.iter_mut() {
                *v = -*v;
            }
            for &(node, q) in flux {
                b[node] += q;
            }
            for i in 0..n {
                if !active[i] {
                    b[i] = F::zero();
                }
            }

            let diag = operator_diagonal(grid, kernels, design, OperatorKind::Thermal, weights);
            let mut x = vec![F::zero(); n];
            if let Some(guess) = x0 {
                x.copy_from_slice(guess);
            }
            let mut apply_buf = vec![F::zero(); n];
            let outcome = pcg(
                |v, out| {
                    apply_operator(
                        grid,
                        kernels,
                        design,
                        OperatorKind::Thermal,
                        weights,
                        v,
                        &mut apply_buf,
                        &mut ws,
                    );
                    out.copy_from_slice(&apply_buf);
                },
                &diag,
                &active,
                &b,
                &mut x,
                settings,
            )
            .map_err(FeaError::Thermal)?;

            let mut theta = x;
            for i in 0..n {
                if is_prescribed[i] {
                    theta[i] = theta_p[i];
                }
            }
            Ok(ThermalSolution {
                theta,
                outcome: Some(outcome),
                floating_nodes: floating,
            })
        }
    }
}

pub struct StructuralSolution<F> {
    pub d: Vec<F>,
    pub outcome: CgOutcome,
}

/// Solve K d = f on the free DOFs of the current design. DOFs attached to no
/// solid element and fixed DOFs are eliminated and report zero displacement.
pub fn solve_structural<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    bc: &BoundaryConditions<F>,
    weights: Option<&[F]>,
    f_total: &[F],
    settings: &CgSettings<F>,
    x0: Option<&[F]>,
) -> Result<StructuralSolution<F>, FeaError> {
    if design.num_solid() == 0 {
        return Err(FeaError::AllVoid);
    }
    let ndof = grid.num_struct_dofs();
    let active = active_struct_dofs(grid, design, &bc.fixed_dofs);
    let mut b = vec![F::zero(); ndof];
    for i in 0..ndof {
        if active[i] {
            b[i] = f_total[i];
        }
    }
    let diag = operator_diagonal(grid, kernels, design, OperatorKind::Structural, weights);
    let mut x = vec![F::zero(); ndof];
    if let Some(guess) = x0 {
        x.copy_from_slice(guess);
    }
    let mut ws = OperatorWorkspace::new(grid);
    let mut apply_buf = vec![F::zero(); ndof];
    let outcome = pcg(
        |v, out| {
            apply_operator(
                grid,
                kernels,
                design,
                OperatorKind::Structural,
                weights,
                v,
                &mut apply_buf,
                &mut ws,
            );
            out.copy_from_slice(&apply_buf);
        },
        &diag,
        &active,
        &b,
        &mut x,
        settings,
    )
    .map_err(FeaError::Structural)?;
    if std::env::var_os("VOXTHERM_TRACE").is_some() {
        eprintln!(
            "      structural cg: {} iters, relres {:.2e}",
            outcome.iterations, outcome.final_relres
        );
    }
    Ok(StructuralSolution { d: x, outcome })
}

/// Structural CG solve with an arbitrary right-hand side on the design's
/// free DOFs (adjoint systems share the primal operator and masking).
#[allow(clippy::too_many_arguments)]
pub fn pcg_struct<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    bc: &BoundaryConditions<F>,
    weights: Option<&[F]>,
    rhs: &[F],
    settings: &CgSettings<F>,
    x0: Option<&[F]>,
) -> Result<Vec<F>, CgError> {
    let ndof = grid.num_struct_dofs();
    let active = active_struct_dofs(grid, design, &bc.fixed_dofs);
    let mut b = vec![F::zero(); ndof];
    for i in 0..ndof {
        if active[i] {
            b[i] = rhs[i];
        }
    }
    let diag = operator_diagonal(grid, kernels, design, OperatorKind::Structural, weights);
    let mut x = vec![F::zero(); ndof];
    if let Some(g) = x0 {
        x.copy_from_slice(g);
    }
    let mut ws = OperatorWorkspace::new(grid);
    let mut buf = vec![F::zero(); ndof];
    pcg(
        |v, out| {
            apply_operator(
                grid,
                kernels,
                design,
                OperatorKind::Structural,
                weights,
                v,
                &mut buf,
                &mut ws,
            );
            out.copy_from_slice(&buf);
        },
        &diag,
        &active,
        &b,
        &mut x,
        settings,
    )?;
    Ok(x)
}

/// Thermal CG solve with an arbitrary right-hand side, homogeneous at the
/// prescribed-temperature nodes. Masking matches the primal Dirichlet solve.
#[allow(clippy::too_many_arguments)]
pub fn pcg_thermal<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    bc: &BoundaryConditions<F>,
    weights: Option<&[F]>,
    rhs: &[F],
    settings: &CgSettings<F>,
    x0: Option<&[F]>,
) -> Result<Vec<F>, CgError> {
    let n = grid.num_nodes();
    let prescribed: Vec<usize> = match &bc.thermal {
        ThermalMode::Dirichlet { prescribed, .. } => {
            prescribed.iter().map(|&(node, _)| node).collect()
        }
        ThermalMode::UniformDelta(_) => Vec::new(),
    };
    let attached = attached_nodes(grid, design);
    let seeds: Vec<usize> = prescribed
        .iter()
        .copied()
        .filter(|&node| attached[node])
        .collect();
    let reachable = reachable_from(grid, design, &seeds);
    let mut active = vec![false; n];
    for i in 0..n {
        active[i] = attached[i] && reachable[i];
    }
    for &node in &prescribed {
        active[node] = false;
    }
    let mut b = vec![F::zero(); n];
    for i in 0..n {
        if active[i] {
            b[i] = rhs[i];
        }
    }
    let diag = operator_diagonal(grid, kernels, design, OperatorKind::Thermal, weights);
    let mut x = vec![F::zero(); n];
    if let Some(g) = x0 {
        x.copy_from_slice(g);
    }
    let mut ws = OperatorWorkspace::new(grid);
    let mut buf = vec![F::zero(); n];
    pcg(
        |v, out| {
            apply_operator(
                grid,
                kernels,
                design,
                OperatorKind::Thermal,
                weights,
                v,
                &mut buf,
                &mut ws,
            );
            out.copy_from_slice(&buf);
        },
        &diag,
        &active,
        &b,
        &mut x,
        settings,
    )?;
    Ok(x)
}

/// Centroid stress per solid element: sigma = D (B d_e) - dphi * avg(theta).
pub fn recover_stress<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    d: &[F],
    theta: &[F],
) -> Vec<[F; 6]> {
    let eighth = F::of(0.125);
    (0..grid.num_elements())
        .map(|e| {
            if !design.solid[e] {
                return [F::zero(); 6];
            }
            let nodes = grid.element_nodes(e);
            let mut local = [F::zero(); 24];
            let mut avg = F::zero();
            for (c, &n) in nodes.iter().enumerate() {
                let base = 3 * n as usize;
                local[3 * c] = d[base];
                local[3 * c + 1] = d[base + 1];
                local[3 * c + 2] = d[base + 2];
                avg += theta[n as usize];
            }
            avg *= eighth;
            let mut sigma = [F::zero(); 6];
            for i in 0..6 {
                let mut s = F::zero();
                for j in 0..24 {
                    s += kernels.f_mat[i][j] * local[j];
                }
                sigma[i] = s - kernels.dphi[i] * avg;
            }
            sigma
        })
        .collect()
}

/// J = (f_st + f_th) . d
pub fn compliance<F: Real>(d: &[F], f_st: &[F], f_th: &[F]) -> F {
    let mut s = F::zero();
    for i in 0..d.len() {
        s += (f_st[i] + f_th[i]) * d[i];
    }
    s
}

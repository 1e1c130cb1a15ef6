//! Assembly-free application of the global structural and thermal operators.
//!
//! Void elements are skipped entirely (hard kill). The product is computed in
//! two passes: a parallel element pass writing per-element contributions, and
//! a parallel node pass accumulating them in a fixed order. Results are
//! bitwise reproducible regardless of thread count.

use rayon::prelude::*;

use super::kernels::{ke_matvec, kte_matvec, ElementKernels};
use crate::grid::{DesignState, VoxelGrid};
use crate::real::Real;

/// Below this element count the element pass runs serially.
const PAR_CUTOFF: usize = 4096;

/// Which global operator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Structural,
    Thermal,
}

/// Scratch space reused across products.
pub struct OperatorWorkspace<F> {
    strut: Vec<[F; 24]>,
    therm: Vec<[F; 8]>,
}

impl<F: Real> OperatorWorkspace<F> {
    pub fn new(grid: &VoxelGrid<F>) -> Self {
        OperatorWorkspace {
            strut: vec![[F::zero(); 24]; grid.num_elements()],
            therm: vec![[F::zero(); 8]; grid.num_elements()],
        }
    }
}

/// y = K x (structural) or y = K_t x (thermal), no boundary conditions.
///
/// `weights`, when present, scales each element's contribution; the
/// verification oracles perturb single elements through it.
pub fn apply_operator<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    kind: OperatorKind,
    weights: Option<&[F]>,
    x: &[F],
    y: &mut [F],
    ws: &mut OperatorWorkspace<F>,
) {
    match kind {
        OperatorKind::Structural => {
            assert_eq!(x.len(), grid.num_struct_dofs());
            apply_structural(grid, kernels, design, weights, x, y, ws);
        }
        OperatorKind::Thermal => {
            assert_eq!(x.len(), grid.num_nodes());
            apply_thermal(grid, kernels, design, weights, x, y, ws);
        }
    }
}

fn apply_structural<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    weights: Option<&[F]>,
    x: &[F],
    y: &mut [F],
    ws: &mut OperatorWorkspace<F>,
) {
    let contrib = &mut ws.strut;
    let elem_pass = |(e, out): (usize, &mut [F; 24])| {
        if !design.solid[e] {
            *out = [F::zero(); 24];
            return;
        }
        let nodes = grid.element_nodes(e);
        let mut local = [F::zero(); 24];
        for (c, &n) in nodes.iter().enumerate() {
            let base = 3 * n as usize;
            local[3 * c] = x[base];
            local[3 * c + 1] = x[base + 1];
            local[3 * c + 2] = x[base + 2];
        }
        let mut ye = ke_matvec(&kernels.ke, &local);
        if let Some(w) = weights {
            for v in ye.iter_mut() {
                *v *= w[e];
            }
        }
        *out = ye;
    };
    if grid.num_elements() >= PAR_CUTOFF {
        contrib.par_iter_mut().enumerate().for_each(|(e, o)| elem_pass((e, o)));
    } else {
        contrib.iter_mut().enumerate().for_each(|(e, o)| elem_pass((e, o)));
    }

    let contrib = &ws.strut;
    let node_pass = |(n, out): (usize, &mut [F])| {
        let mut acc = [F::zero(); 3];
        for &(e, corner) in grid.node_elements(n) {
            let c = contrib[e as usize];
            let b = 3 * corner as usize;
            acc[0] += c[b];
            acc[1] += c[b + 1];
            acc[2] += c[b + 2];
        }
        out[0] = acc[0];
        out[1] = acc[1];
        out[2] = acc[2];
    };
    if grid.num_elements() >= PAR_CUTOFF {
        y.par_chunks_mut(3).enumerate().for_each(node_pass);
    } else {
        y.chunks_mut(3).enumerate().for_each(node_pass);
    }
}

fn apply_thermal<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    weights: Option<&[F]>,
    x: &[F],
    y: &mut [F],
    ws: &mut OperatorWorkspace<F>,
) {
    let contrib = &mut ws.therm;
    let elem_pass = |(e, out): (usize, &mut [F; 8])| {
        if !design.solid[e] {
            *out = [F::zero(); 8];
            return;
        }
        let nodes = grid.element_nodes(e);
        let mut local = [F::zero(); 8];
        for (c, &n) in nodes.iter().enumerate() {
            local[c] = x[n as usize];
        }
        let mut ye = kte_matvec(&kernels.kte, &local);
        if let Some(w) = weights {
            for v in ye.iter_mut() {
                *v *= w[e];
            }
        }
        *out = ye;
    };
    if grid.num_elements() >= PAR_CUTOFF {
        contrib.par_iter_mut().enumerate().for_each(|(e, o)| elem_pass((e, o)));
    } else {
        contrib.iter_mut().enumerate().for_each(|(e, o)| elem_pass((e, o)));
    }

    let contrib = &ws.therm;
    let node_pass = |(n, out): (usize, &mut F)| {
        let mut acc = F::zero();
        for &(e, corner) in grid.node_elements(n) {
            acc += contrib[e as usize][corner as usize];
        }
        *out = acc;
    };
    if grid.num_elements() >= PAR_CUTOFF {
        y.par_iter_mut().enumerate().for_each(|(n, o)| node_pass((n, o)));
    } else {
        y.iter_mut().enumerate().for_each(|(n, o)| node_pass((n, o)));
    }
}

/// Diagonal of the global operator over solid elements.
pub fn operator_diagonal<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    kind: OperatorKind,
    weights: Option<&[F]>,
) -> Vec<F> {
    match kind {
        OperatorKind::Structural => {
            let mut diag = vec![F::zero(); grid.num_struct_dofs()];
            for e in 0..grid.num_elements() {
                if !design.solid[e] {
                    continue;
                }
                let w = weights.map_or(F::one(), |w| w[e]);
                for (c, &n) in grid.element_nodes(e).iter().enumerate() {
                    for axis in 0..3 {
                        diag[3 * n as usize + axis] += kernels.ke[3 * c + axis][3 * c + axis] * w;
                    }
                }
            }
            diag
        }
        OperatorKind::Thermal => {
            let mut diag = vec![F::zero(); grid.num_nodes()];
            for e in 0..grid.num_elements() {
                if !design.solid[e] {
                    continue;
                }
                let w = weights.map_or(F::one(), |w| w[e]);
                for (c, &n) in grid.element_nodes(e).iter().enumerate() {
                    diag[n as usize] += kernels.kte[c][c] * w;
                }
            }
            diag
        }
    }
}

/// DOF activity masks: a structural DOF is active when its node touches a
/// solid element and it is not fixed; a thermal DOF when its node touches a
/// solid element and is not prescribed.
pub fn active_struct_dofs<F: Real>(
    grid: &VoxelGrid<F>,
    design: &DesignState,
    fixed_dofs: &[usize],
) -> Vec<bool> {
    let mut active = vec![false; grid.num_struct_dofs()];
    for n in 0..grid.num_nodes() {
        if grid
            .node_elements(n)
            .iter()
            .any(|&(e, _)| design.solid[e as usize])
        {
            for axis in 0..3 {
                active[3 * n + axis] = true;
            }
        }
    }
    for &dof in fixed_dofs {
        active[dof] = false;
    }
    active
}

pub fn attached_nodes<F: Real>(grid: &VoxelGrid<F>, design: &DesignState) -> Vec<bool> {
    let mut attached = vec![false; grid.num_nodes()];
    for n in 0..grid.num_nodes() {
        attached[n] = grid
            .node_elements(n)
            .iter()
            .any(|&(e, _)| design.solid[e as usize]);
    }
    attached
}

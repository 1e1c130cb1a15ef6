//! Finite-difference verification of the adjoint sensitivities.
//!
//! An element's kernels are scaled by 1 +/- eps and the full primal pipeline
//! is re-solved each time; the central difference of the quantity of
//! interest is then compared against the adjoint element sensitivity. The
//! oracle goes through the forward solves only and shares no code with the
//! adjoint path it checks. Exposed as a library module so the `verify` CLI
//! subcommand can run the same suite the tests use.

use crate::fea::{
    solve_fields, CgSettings, ElementKernels, FeaError, FloatingPolicy,
};
use crate::grid::{BoundaryConditions, DesignState, Face, MaterialModel, ThermalMode, VoxelGrid};
use crate::qoi::{value, QoIKind};
use crate::real::Real;
use crate::sensitivity::{element_qprime, solve_adjoints, SensitivityError};

/// One finite-difference comparison.
#[derive(Debug, Clone)]
pub struct FdCase {
    pub qoi: &'static str,
    pub mode: &'static str,
    pub element: usize,
    pub analytic: f64,
    pub fd: f64,
    pub rel_err: f64,
}

/// Suite outcome.
#[derive(Debug, Clone, Default)]
pub struct FdReport {
    pub cases: Vec<FdCase>,
    pub max_rel_err: f64,
}

impl FdReport {
    pub fn push(&mut self, case: FdCase) {
        self.max_rel_err = self.max_rel_err.max(case.rel_err);
        self.cases.push(case);
    }
}

/// Q evaluated with element `e`'s kernels scaled by `scale`, via full
/// re-solves of the thermal and structural problems.
#[allow(clippy::too_many_arguments)]
pub fn perturbed_qoi<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    bc: &BoundaryConditions<F>,
    qoi: &QoIKind<F>,
    element: usize,
    scale: F,
    settings: &CgSettings<F>,
) -> Result<F, SensitivityError> {
    let mut weights = vec![F::one(); grid.num_elements()];
    weights[element] = scale;
    let (fields, _) = solve_fields(
        grid,
        kernels,
        design,
        bc,
        Some(&weights),
        settings,
        None,
        None,
        FloatingPolicy::Strict,
    )
    .map_err(SensitivityError::Fea)?;
    value(qoi, design, &fields).map_err(SensitivityError::QoI)
}

/// Central finite difference of Q under the kernel scaling of one element.
#[allow(clippy::too_many_arguments)]
pub fn central_fd<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    bc: &BoundaryConditions<F>,
    qoi: &QoIKind<F>,
    element: usize,
    eps: F,
    settings: &CgSettings<F>,
) -> Result<F, SensitivityError> {
    let plus = perturbed_qoi(grid, kernels, design, bc, qoi, element, F::one() + eps, settings)?;
    let minus = perturbed_qoi(grid, kernels, design, bc, qoi, element, F::one() - eps, settings)?;
    Ok((plus - minus) / (F::of(2.0) * eps))
}

/// Deterministic xorshift for sampling elements without a rand dependency.
pub struct TinyRng(u64);

impl TinyRng {
    pub fn new(seed: u64) -> Self {
        TinyRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// The standard verification problem: a 6x4x2 beam, clamped at x = 0,
/// loaded at the far corner, with a few voids carved out.
pub fn verification_problem<F: Real>(
    uniform: bool,
) -> (
    VoxelGrid<F>,
    ElementKernels<F>,
    DesignState,
    BoundaryConditions<F>,
) {
    let grid = VoxelGrid::build([F::of(0.6), F::of(0.4), F::of(0.2)], [6, 4, 2]).unwrap();
    let material = MaterialModel::steel();
    let kernels = ElementKernels::compute(&material, &grid).unwrap();
    let mut bc = BoundaryConditions::empty();
    bc.fix_face(&grid, Face::XMin);
    bc.point_loads.push((
        grid.node_index(6, 4, 2),
        [F::of(2.0e4), F::of(-1.0e5), F::of(1.0e4)],
    ));
    bc.point_loads
        .push((grid.node_index(6, 0, 0), [F::zero(), F::of(5.0e4), F::zero()]));
    bc.thermal = if uniform {
        ThermalMode::UniformDelta(F::of(3.0))
    } else {
        let mut prescribed = Vec::new();
        for n in grid.face_nodes(Face::XMin) {
            prescribed.push((n, F::zero()));
        }
        for n in grid.face_nodes(Face::XMax) {
            prescribed.push((n, F::of(8.0)));
        }
        prescribed.sort_by_key(|&(n, _)| n);
        prescribed.dedup_by_key(|&mut (n, _)| n);
        ThermalMode::Dirichlet {
            prescribed,
            flux: vec![],
        }
    };
    let mut design = DesignState::all_solid_protected(&grid, &bc);
    // carve two interior voids so the design is not trivially full
    let voids = [grid.elem_index(2, 1, 0), grid.elem_index(3, 2, 1)];
    for e in voids {
        if !design.protected[e] {
            design.solid[e] = false;
        }
    }
    (grid, kernels, design, bc)
}

/// Run the adjoint-vs-FD suite: every QoI in both thermal modes, sampling
/// `samples` solid elements per combination. Tolerance pinned at 2% per
/// element with eps = 1e-4.
pub fn run_fd_suite(samples: usize, seed: u64) -> Result<FdReport, SensitivityError> {
    let mut report = FdReport::default();
    let eps = 1e-4f64;
    for uniform in [true, false] {
        let mode: &'static str = if uniform { "uniform" } else { "dirichlet" };
        let (grid, kernels, design, bc) = verification_problem::<f64>(uniform);
        let settings = CgSettings::for_dofs(grid.num_struct_dofs()).with_tol(1e-13);
        let (fields, _) = solve_fields(
            &grid,
            &kernels,
            &design,
            &bc,
            None,
            &settings,
            None,
            None,
            FloatingPolicy::Strict,
        )
        .map_err(SensitivityError::Fea)?;
        let probe_dof = 3 * grid.node_index(6, 4, 2) + 1;
        let qois: [(QoIKind<f64>, &'static str); 3] = [
            (QoIKind::Compliance, "compliance"),
            (QoIKind::PointDisplacement(probe_dof), "displacement"),
            (QoIKind::PNormStress(6.0), "pnorm-stress"),
        ];
        let solid_elements: Vec<usize> =
            (0..grid.num_elements()).filter(|&e| design.solid[e]).collect();
        for (qoi, name) in qois {
            let adjoints = solve_adjoints(&grid, &kernels, &design, &bc, &fields, &qoi, &settings)?;
            let qprime = element_qprime(&grid, &kernels, &design, &fields, &qoi, &adjoints);
            let mut rng = TinyRng::new(seed ^ (name.len() as u64) << 3 ^ uniform as u64);
            for _ in 0..samples {
                let e = solid_elements[rng.below(solid_elements.len())];
                let fd = central_fd(&grid, &kernels, &design, &bc, &qoi, e, eps, &settings)?;
                let analytic = qprime[e];
                let denom = fd.abs().max(analytic.abs());
                let rel = if denom > 0.0 {
                    (fd - analytic).abs() / denom
                } else {
                    0.0
                };
                report.push(FdCase {
                    qoi: name,
                    mode,
                    element: e,
                    analytic,
                    fd,
                    rel_err: rel,
                });
            }
        }
    }
    Ok(report)
}

/// Maximum relative error accepted from the FD suite.
pub const FD_TOLERANCE: f64 = 0.02;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
    #[error(transparent)]
    Fea(#[from] FeaError),
}

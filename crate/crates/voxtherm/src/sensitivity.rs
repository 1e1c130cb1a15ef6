//! Adjoint solves and per-element topological sensitivities.
//!
//! For a quantity of interest Q, the structural adjoint solves
//! K lambda = -grad_d(Q); under a spatially varying temperature field a
//! thermal adjoint solves K_t omega = H^T lambda - grad_t(Q). The derivative
//! of Q with respect to element e's presence is then
//!
//!   Q'_e = dQ/dx_e(explicit) - lambda_e.(He dt_e) + omega_e.(Kte t_e)
//!          + lambda_e.(Ke d_e)
//!
//! where the element's own kernel matrices realize the operator derivatives
//! (removing the element removes exactly its contribution). Under a uniform
//! prescribed temperature rise the temperature field does not vary with the
//! design and the omega term is dropped.
//!
//! Retention fields published to the level-set are oriented so that larger
//! means more important to keep: removing a high-value element worsens the
//! QoI. With Q'_e the derivative with respect to adding material, that value
//! is -Q'_e; the orientation is fixed by the finite-difference oracle and
//! frozen here.

use crate::fea::{
    ke_matvec, kte_matvec, pcg_struct, pcg_thermal, CgSettings, ElementKernels, FeaError, Fields,
};
use crate::grid::{BoundaryConditions, DesignState, ThermalMode, VoxelGrid};
use crate::qoi::{explicit_element_term, grad_d, grad_t, QoIError, QoIKind};
use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error(transparent)]
    Fea(#[from] FeaError),
    #[error(transparent)]
    QoI(#[from] QoIError),
}

/// Adjoint vectors for one QoI on one design.
#[derive(Debug, Clone)]
pub struct AdjointSet<F> {
    /// Structural adjoint, zero on fixed and detached DOFs.
    pub lambda: Vec<F>,
    /// Thermal adjoint; absent in uniform-rise mode.
    pub omega: Option<Vec<F>>,
    /// The grad_t(Q) vector fed into the omega right-hand side.
    pub grad_t: Vec<F>,
    /// CG solves performed.
    pub solves: usize,
}

/// H^T v spread to thermal DOFs: each node of a solid element receives
/// (hcol . v_e) / 8.
fn coupling_transpose_apply<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    v: &[F],
) -> Vec<F> {
    let eighth = F::of(0.125);
    let mut out = vec![F::zero(); grid.num_nodes()];
    for e in 0..grid.num_elements() {
        if !design.solid[e] {
            continue;
        }
        let nodes = grid.element_nodes(e);
        let mut hv = F::zero();
        for (c, &n) in nodes.iter().enumerate() {
            let base = 3 * n as usize;
            hv += kernels.hcol[3 * c] * v[base]
                + kernels.hcol[3 * c + 1] * v[base + 1]
                + kernels.hcol[3 * c + 2] * v[base + 2];
        }
        let per_node = hv * eighth;
        for &n in nodes {
            out[n as usize] += per_node;
        }
    }
    out
}

/// Solve the adjoint systems for a QoI.
///
/// Compliance uses the identity lambda = -d instead of a solve. The omega
/// solve shares the primal thermal problem's operator and masking, with
/// homogeneous values at prescribed nodes.
pub fn solve_adjoints<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    bc: &BoundaryConditions<F>,
    fields: &Fields<F>,
    qoi: &QoIKind<F>,
    settings: &CgSettings<F>,
) -> Result<AdjointSet<F>, SensitivityError> {
    solve_adjoints_warm(grid, kernels, design, bc, fields, qoi, settings, None)
}

/// As [`solve_adjoints`], warm-starting the structural adjoint solve.
#[allow(clippy::too_many_arguments)]
pub fn solve_adjoints_warm<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    bc: &BoundaryConditions<F>,
    fields: &Fields<F>,
    qoi: &QoIKind<F>,
    settings: &CgSettings<F>,
    lambda0: Option<&[F]>,
) -> Result<AdjointSet<F>, SensitivityError> {
    let mut solves = 0;
    let lambda = match qoi {
        QoIKind::Compliance => fields.d.iter().map(|&v| -v).collect::<Vec<F>>(),
        _ => {
            let gd = grad_d(qoi, grid, kernels, design, fields)?;
            let rhs: Vec<F> = gd.iter().map(|&v| -v).collect();
            let x = pcg_struct(grid, kernels, design, bc, None, &rhs, settings, lambda0)
                .map_err(FeaError::Structural)?;
            solves += 1;
            x
        }
    };

    let gt = grad_t(qoi, grid, kernels, design, fields)?;
    let omega = match &bc.thermal {
        ThermalMode::UniformDelta(_) => None,
        ThermalMode::Dirichlet { .. } => {
            let ht_lambda = coupling_transpose_apply(grid, kernels, design, &lambda);
            let rhs: Vec<F> = ht_lambda
                .iter()
                .zip(gt.iter())
                .map(|(&a, &b)| a - b)
                .collect();
            let x = pcg_thermal(grid, kernels, design, bc, None, &rhs, settings, None)
                .map_err(FeaError::Thermal)?;
            solves += 1;
            Some(x)
        }
    };

    Ok(AdjointSet {
        lambda,
        omega,
        grad_t: gt,
        solves,
    })
}

/// Raw per-element derivative of Q with respect to the element indicator
/// (positive means adding the element increases Q). Zero on void elements.
pub fn element_qprime<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    fields: &Fields<F>,
    qoi: &QoIKind<F>,
    adjoints: &AdjointSet<F>,
) -> Vec<F> {
    let eighth = F::of(0.125);
    (0..grid.num_elements())
        .map(|e| {
            if !design.solid[e] {
                return F::zero();
            }
            let nodes = grid.element_nodes(e);
            let mut lambda_e = [F::zero(); 24];
            let mut d_e = [F::zero(); 24];
            let mut theta_e = [F::zero(); 8];
            for (c, &n) in nodes.iter().enumerate() {
                let base = 3 * n as usize;
                for axis in 0..3 {
                    lambda_e[3 * c + axis] = adjoints.lambda[base + axis];
                    d_e[3 * c + axis] = fields.d[base + axis];
                }
                theta_e[c] = fields.theta[n as usize];
            }
            let avg_theta = theta_e.iter().copied().sum::<F>() * eighth;

            // lambda_e . (Ke d_e)
            let ked = ke_matvec(&kernels.ke, &d_e);
            let mut term_k = F::zero();
            for i in 0..24 {
                term_k += lambda_e[i] * ked[i];
            }
            // -lambda_e . (He dt_e) = -(lambda_e . hcol) * avg_theta
            let mut lh = F::zero();
            for i in 0..24 {
                lh += lambda_e[i] * kernels.hcol[i];
            }
            let term_h = -lh * avg_theta;
            // omega_e . (Kte theta_e)
            let term_kt = match &adjoints.omega {
                Some(omega) => {
                    let mut omega_e = [F::zero(); 8];
                    for (c, &n) in nodes.iter().enumerate() {
                        omega_e[c] = omega[n as usize];
                    }
                    let kt_t = kte_matvec(&kernels.kte, &theta_e);
                    let mut s = F::zero();
                    for i in 0..8 {
                        s += omega_e[i] * kt_t[i];
                    }
                    s
                }
                None => F::zero(),
            };
            let explicit = explicit_element_term(qoi, grid, kernels, fields, e);
            explicit + term_h + term_kt + term_k
        })
        .collect()
}

/// Retention-oriented sensitivity field on all N elements.
#[derive(Debug, Clone)]
pub struct SensitivityField<F> {
    /// Larger value = more important to retain. Void elements carry the
    /// average of their solid face neighbors, or the solid minimum when
    /// isolated, so reintroduction candidates are rankable.
    pub values: Vec<F>,
}

impl<F: Real> SensitivityField<F> {
    /// Orient and extend a raw derivative field.
    pub fn from_qprime(qprime: &[F], grid: &VoxelGrid<F>, design: &DesignState) -> Self {
        let n = qprime.len();
        let mut values = vec![F::zero(); n];
        let mut solid_min = F::infinity();
        for e in 0..n {
            if design.solid[e] {
                values[e] = -qprime[e];
                if values[e] < solid_min {
                    solid_min = values[e];
                }
            }
        }
        if !solid_min.is_finite() {
            solid_min = F::zero();
        }
        for e in 0..n {
            if !design.solid[e] {
                let mut sum = F::zero();
                let mut count = 0usize;
                for nb in grid.elem_face_neighbors(e) {
                    if design.solid[nb] {
                        sum += -qprime[nb];
                        count += 1;
                    }
                }
                values[e] = if count > 0 {
                    sum / F::of(count as f64)
                } else {
                    solid_min
                };
            }
        }
        SensitivityField { values }
    }

    /// Affine map onto [0, 1]; a constant field maps to zero.
    pub fn normalized(&self) -> Vec<F> {
        let mut lo = F::infinity();
        let mut hi = F::neg_infinity();
        for &v in &self.values {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        let span = hi - lo;
        if !(span > F::zero()) {
            return vec![F::zero(); self.values.len()];
        }
        self.values.iter().map(|&v| (v - lo) / span).collect()
    }

    /// One-pass face-neighbor average, available behind a config flag.
    pub fn smoothed(&self, grid: &VoxelGrid<F>) -> Self {
        let values = (0..self.values.len())
            .map(|e| {
                let mut sum = self.values[e];
                let mut count = 1usize;
                for nb in grid.elem_face_neighbors(e) {
                    sum += self.values[nb];
                    count += 1;
                }
                sum / F::of(count as f64)
            })
            .collect();
        SensitivityField { values }
    }
}

/// Max relative discrepancy between two independent assemblies of the
/// displacement sensitivity.
#[derive(Debug, Clone)]
pub struct CrosscheckReport {
    pub max_rel_discrepancy: f64,
    pub elements_compared: usize,
}

/// Evaluate the displacement sensitivity twice: once through the generic
/// adjoint pipeline, and once through the two-adjoint bookkeeping in which
/// the thermal-load constraint carries its own multiplier (algebraically the
/// negated structural adjoint). Reports the largest per-element relative
/// difference.
pub fn displacement_sensitivity_crosscheck<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    bc: &BoundaryConditions<F>,
    fields: &Fields<F>,
    dof: usize,
    settings: &CgSettings<F>,
) -> Result<CrosscheckReport, SensitivityError> {
    let qoi = QoIKind::PointDisplacement(dof);
    let adjoints = solve_adjoints(grid, kernels, design, bc, fields, &qoi, settings)?;
    let form_a = element_qprime(grid, kernels, design, fields, &qoi, &adjoints);

    // Independent route: solve K lambda2 = -e_a afresh, set lambda1 = -lambda2
    // (the thermal-load constraint adjoint), solve K_t lambda3 = -H^T lambda1.
    let ndof = grid.num_struct_dofs();
    let mut rhs = vec![F::zero(); ndof];
    rhs[dof] = -F::one();
    let lambda2 = pcg_struct(grid, kernels, design, bc, None, &rhs, settings, None)
        .map_err(FeaError::Structural)?;
    let lambda1: Vec<F> = lambda2.iter().map(|&v| -v).collect();
    let lambda3 = match &bc.thermal {
        ThermalMode::UniformDelta(_) => None,
        ThermalMode::Dirichlet { .. } => {
            let ht_l1 = coupling_transpose_apply(grid, kernels, design, &lambda1);
            let rhs_t: Vec<F> = ht_l1.iter().map(|&v| -v).collect();
            Some(
                pcg_thermal(grid, kernels, design, bc, None, &rhs_t, settings, None)
                    .map_err(FeaError::Thermal)?,
            )
        }
    };

    let eighth = F::of(0.125);
    let mut max_rel = 0.0f64;
    let mut compared = 0usize;
    for e in 0..grid.num_elements() {
        if !design.solid[e] {
            continue;
        }
        let nodes = grid.element_nodes(e);
        let mut l1_e = [F::zero(); 24];
        let mut l2_e = [F::zero(); 24];
        let mut d_e = [F::zero(); 24];
        let mut theta_e = [F::zero(); 8];
        for (c, &n) in nodes.iter().enumerate() {
            let base = 3 * n as usize;
            for axis in 0..3 {
                l1_e[3 * c + axis] = lambda1[base + axis];
                l2_e[3 * c + axis] = lambda2[base + axis];
                d_e[3 * c + axis] = fields.d[base + axis];
            }
            theta_e[c] = fields.theta[n as usize];
        }
        let avg_theta = theta_e.iter().copied().sum::<F>() * eighth;
        let mut l1h = F::zero();
        for i in 0..24 {
            l1h += l1_e[i] * kernels.hcol[i];
        }
        let ked = ke_matvec(&kernels.ke, &d_e);
        let mut l2kd = F::zero();
        for i in 0..24 {
            l2kd += l2_e[i] * ked[i];
        }
        let term_kt = match &lambda3 {
            Some(l3) => {
                let kt_t = kte_matvec(&kernels.kte, &theta_e);
                let mut s = F::zero();
                for (c, &n) in nodes.iter().enumerate() {
                    s += l3[n as usize] * kt_t[c];
                }
                s
            }
            None => F::zero(),
        };
        let form_b = l1h * avg_theta + l2kd + term_kt;

        let a = form_a[e].to_f64();
        let b = form_b.to_f64();
        let denom = a.abs().max(b.abs());
        if denom > 0.0 {
            max_rel = max_rel.max((a - b).abs() / denom);
        }
        compared += 1;
    }
    Ok(CrosscheckReport {
        max_rel_discrepancy: max_rel,
        elements_compared: compared,
    })
}


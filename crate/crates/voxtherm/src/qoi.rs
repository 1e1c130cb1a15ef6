//! Quantities of interest and their gradients with respect to the
//! displacement and temperature fields.
//!
//! Three QoIs are supported: compliance, a single displacement DOF, and the
//! p-norm of element von Mises stresses. `grad_d` and `grad_t` are the
//! partial derivatives of Q(d, t) holding the other field fixed;
//! `explicit_element_term` is the direct dependence of Q on an element's
//! presence (nonzero only for compliance, whose thermal load carries the
//! element coupling). All three are validated against central finite
//! differences; the composite gradients below are the forms that survive
//! that check.

use crate::fea::{compliance, ElementKernels, Fields};
use crate::grid::{DesignState, VoxelGrid};
use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QoIError {
    #[error("p-norm stress requires at least one solid element")]
    EmptySolidSet,
    #[error("p-norm exponent must be >= 2, got {0}")]
    BadExponent(f64),
    #[error("displacement DOF {dof} out of range (structural DOFs: {ndof})")]
    DofOutOfRange { dof: usize, ndof: usize },
}

/// Which scalar quantity drives an adjoint solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QoIKind<F> {
    Compliance,
    /// Displacement at one structural DOF.
    PointDisplacement(usize),
    /// (sum of element von Mises stresses to the p) ^ (1/p).
    PNormStress(F),
}

impl<F: Real> QoIKind<F> {
    pub fn validate(&self, ndof: usize) -> Result<(), QoIError> {
        match *self {
            QoIKind::Compliance => Ok(()),
            QoIKind::PointDisplacement(dof) => {
                if dof < ndof {
                    Ok(())
                } else {
                    Err(QoIError::DofOutOfRange { dof, ndof })
                }
            }
            QoIKind::PNormStress(p) => {
                if p >= F::of(2.0) {
                    Ok(())
                } else {
                    Err(QoIError::BadExponent(p.to_f64()))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QoIKind::Compliance => "compliance",
            QoIKind::PointDisplacement(_) => "displacement",
            QoIKind::PNormStress(_) => "pnorm-stress",
        }
    }
}

/// Von Mises stress of a 6-component tensor (s11 s22 s33 s12 s13 s23).
pub fn von_mises<F: Real>(s: &[F; 6]) -> F {
    let half = F::of(0.5);
    let three = F::of(3.0);
    let dev = (s[0] - s[1]) * (s[0] - s[1])
        + (s[1] - s[2]) * (s[1] - s[2])
        + (s[0] - s[2]) * (s[0] - s[2]);
    let shear = s[3] * s[3] + s[4] * s[4] + s[5] * s[5];
    (half * dev + three * shear).sqrt()
}

/// P-norm aggregate of solid-element von Mises stresses, computed in scaled
/// form so the bounds max <= Q <= n^(1/p) * max hold numerically.
pub fn pnorm_stress<F: Real>(
    stress: &[[F; 6]],
    design: &DesignState,
    p: F,
) -> Result<F, QoIError> {
    if p < F::of(2.0) {
        return Err(QoIError::BadExponent(p.to_f64()));
    }
    let mut max = F::zero();
    let mut any = false;
    let mut vms = Vec::with_capacity(stress.len());
    for (e, s) in stress.iter().enumerate() {
        if design.solid[e] {
            let v = von_mises(s);
            vms.push(v);
            if v > max {
                max = v;
            }
            any = true;
        }
    }
    if !any {
        return Err(QoIError::EmptySolidSet);
    }
    if max == F::zero() {
        return Ok(F::zero());
    }
    let mut sum = F::zero();
    for v in vms {
        sum += (v / max).powf(p);
    }
    Ok(max * sum.powf(F::one() / p))
}

/// Evaluate a QoI on solved fields.
pub fn value<F: Real>(
    qoi: &QoIKind<F>,
    design: &DesignState,
    fields: &Fields<F>,
) -> Result<F, QoIError> {
    match *qoi {
        QoIKind::Compliance => Ok(compliance(&fields.d, &fields.f_st, &fields.f_th)),
        QoIKind::PointDisplacement(dof) => Ok(fields.d[dof]),
        QoIKind::PNormStress(p) => pnorm_stress(&fields.stress, design, p),
    }
}

/// Per-element ingredients of the p-norm stress gradient, shared between the
/// displacement and temperature directions.
struct PnormScale<F> {
    max: F,
    /// S^((1-p)/p) where S = sum of (vm/max)^p.
    outer: F,
}

fn pnorm_scale<F: Real>(stress: &[[F; 6]], design: &DesignState, p: F) -> Option<PnormScale<F>> {
    let mut max = F::zero();
    for (e, s) in stress.iter().enumerate() {
        if design.solid[e] {
            let v = von_mises(s);
            if v > max {
                max = v;
            }
        }
    }
    if max == F::zero() {
        return None;
    }
    let mut sum = F::zero();
    for (e, s) in stress.iter().enumerate() {
        if design.solid[e] {
            sum += (von_mises(s) / max).powf(p);
        }
    }
    Some(PnormScale {
        max,
        outer: sum.powf((F::one() - p) / p),
    })
}

/// Gradient of Q with respect to nodal displacements, assembled over the
/// structural DOFs (zero-stress elements contribute nothing; the p > 2 limit
/// of the vanishing-stress factor is zero).
pub fn grad_d<F: Real>(
    qoi: &QoIKind<F>,
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    fields: &Fields<F>,
) -> Result<Vec<F>, QoIError> {
    let ndof = grid.num_struct_dofs();
    qoi.validate(ndof)?;
    match *qoi {
        QoIKind::Compliance => {
            let mut g = vec![F::zero(); ndof];
            for i in 0..ndof {
                g[i] = fields.f_st[i] + fields.f_th[i];
            }
            Ok(g)
        }
        QoIKind::PointDisplacement(dof) => {
            let mut g = vec![F::zero(); ndof];
            g[dof] = F::one();
            Ok(g)
        }
        QoIKind::PNormStress(p) => {
            let mut g = vec![F::zero(); ndof];
            let scale = match pnorm_scale(&fields.stress, design, p) {
                Some(s) => s,
                None => return Ok(g),
            };
            let half = F::of(0.5);
            let six = F::of(6.0);
            for e in 0..grid.num_elements() {
                if !design.solid[e] {
                    continue;
                }
                let s = &fields.stress[e];
                let vm = von_mises(s);
                let r = vm / scale.max;
                let coeff = scale.outer * r.powf(p - F::of(2.0)) * half / scale.max;
                if coeff == F::zero() {
                    continue;
                }
                let fm = &kernels.f_mat;
                let d01 = s[0] - s[1];
                let d02 = s[0] - s[2];
                let d12 = s[1] - s[2];
                let nodes = grid.element_nodes(e);
                for j in 0..24 {
                    let bracket = d01 * (fm[0][j] - fm[1][j])
                        + d02 * (fm[0][j] - fm[2][j])
                        + d12 * (fm[1][j] - fm[2][j])
                        + six * (s[3] * fm[3][j] + s[4] * fm[4][j] + s[5] * fm[5][j]);
                    let node = nodes[j / 3] as usize;
                    g[3 * node + j % 3] += coeff * bracket;
                }
            }
            Ok(g)
        }
    }
}

/// Gradient of Q with respect to nodal temperatures, holding displacements
/// fixed. Compliance sees temperature through the thermal load; the p-norm
/// through the element-average thermal strain (all eight nodal entries of an
/// element are equal); a point displacement not at all.
pub fn grad_t<F: Real>(
    qoi: &QoIKind<F>,
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    design: &DesignState,
    fields: &Fields<F>,
) -> Result<Vec<F>, QoIError> {
    qoi.validate(grid.num_struct_dofs())?;
    let nn = grid.num_nodes();
    let mut g = vec![F::zero(); nn];
    match *qoi {
        QoIKind::Compliance => {
            // d(f_th . d)/dt: each node of a solid element receives
            // (hcol . d_e) / 8.
            let eighth = F::of(0.125);
            for e in 0..grid.num_elements() {
                if !design.solid[e] {
                    continue;
                }
                let nodes = grid.element_nodes(e);
                let mut hd = F::zero();
                for (c, &n) in nodes.iter().enumerate() {
                    let base = 3 * n as usize;
                    hd += kernels.hcol[3 * c] * fields.d[base]
                        + kernels.hcol[3 * c + 1] * fields.d[base + 1]
                        + kernels.hcol[3 * c + 2] * fields.d[base + 2];
                }
                let per_node = hd * eighth;
                for &n in nodes {
                    g[n as usize] += per_node;
                }
            }
            Ok(g)
        }
        QoIKind::PointDisplacement(_) => Ok(g),
        QoIKind::PNormStress(p) => {
            let scale = match pnorm_scale(&fields.stress, design, p) {
                Some(s) => s,
                None => return Ok(g),
            };
            let half = F::of(0.5);
            let six = F::of(6.0);
            let gv = &kernels.g_vec;
            for e in 0..grid.num_elements() {
                if !design.solid[e] {
                    continue;
                }
                let s = &fields.stress[e];
                let vm = von_mises(s);
                let r = vm / scale.max;
                let coeff = scale.outer * r.powf(p - F::of(2.0)) * half / scale.max;
                if coeff == F::zero() {
                    continue;
                }
                let bracket = (s[0] - s[1]) * (gv[0] - gv[1])
                    + (s[0] - s[2]) * (gv[0] - gv[2])
                    + (s[1] - s[2]) * (gv[1] - gv[2])
                    + six * (s[3] * gv[3] + s[4] * gv[4] + s[5] * gv[5]);
                let per_node = -coeff * bracket;
                for &n in grid.element_nodes(e) {
                    g[n as usize] += per_node;
                }
            }
            Ok(g)
        }
    }
}

/// Direct derivative of Q with respect to element e's presence, holding both
/// fields fixed. Compliance is the only QoI whose value references the
/// element-assembled thermal load.
pub fn explicit_element_term<F: Real>(
    qoi: &QoIKind<F>,
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    fields: &Fields<F>,
    e: usize,
) -> F {
    match *qoi {
        QoIKind::Compliance => {
            let nodes = grid.element_nodes(e);
            let eighth = F::of(0.125);
            let mut hd = F::zero();
            let mut avg = F::zero();
            for (c, &n) in nodes.iter().enumerate() {
                let base = 3 * n as usize;
                hd += kernels.hcol[3 * c] * fields.d[base]
                    + kernels.hcol[3 * c + 1] * fields.d[base + 1]
                    + kernels.hcol[3 * c + 2] * fields.d[base + 2];
                avg += fields.theta[n as usize];
            }
            hd * avg * eighth
        }
        _ => F::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryConditions, VoxelGrid};

    #[test]
    fn von_mises_closed_forms() {
        let s: f64 = 3.7e6;
        assert_eq!(von_mises(&[s, s, s, 0.0, 0.0, 0.0]), 0.0);
        let uni = von_mises(&[s, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((uni - s).abs() < 1e-9 * s);
        let shear = von_mises(&[0.0, 0.0, 0.0, s, 0.0, 0.0]);
        assert!((shear - 3f64.sqrt() * s).abs() < 1e-9 * s);
    }

    fn design_of(n: usize) -> DesignState {
        DesignState {
            solid: vec![true; n],
            protected: vec![false; n],
        }
    }

    #[test]
    fn pnorm_single_element_is_von_mises() {
        let stress: Vec<[f64; 6]> = vec![[2.0e7, 0.0, 0.0, 0.0, 0.0, 0.0]];
        let q = pnorm_stress(&stress, &design_of(1), 6.0).unwrap();
        assert!((q - 2.0e7).abs() < 1e-6);
    }

    #[test]
    fn pnorm_identical_elements_closed_form() {
        let n = 5;
        let stress = vec![[1.0e7, 0.0, 0.0, 0.0, 0.0, 0.0]; n];
        let q = pnorm_stress(&stress, &design_of(n), 6.0).unwrap();
        let expected = (n as f64).powf(1.0 / 6.0) * 1.0e7;
        assert!((q - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn pnorm_rejects_empty_set() {
        let stress: Vec<[f64; 6]> = vec![[1.0; 6]];
        let mut d = design_of(1);
        d.solid[0] = false;
        assert!(pnorm_stress(&stress, &d, 6.0).is_err());
    }

    #[test]
    fn pnorm_bounds_hold() {
        let stress = vec![
            [5.0e6, 1.0e6, 0.0, 2.0e5, 0.0, 0.0],
            [1.0e7, 0.0, 0.0, 0.0, 3.0e6, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ];
        let d = design_of(3);
        let max = stress.iter().map(|s| von_mises(s)).fold(0.0, f64::max);
        let q = pnorm_stress(&stress, &d, 6.0).unwrap();
        assert!(q >= max);
        assert!(q <= 3f64.powf(1.0 / 6.0) * max);
    }

    #[test]
    fn displacement_grad_is_one_hot() {
        let grid = VoxelGrid::build([1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
        let mat = crate::grid::MaterialModel::steel();
        let kernels = ElementKernels::compute(&mat, &grid).unwrap();
        let bc = BoundaryConditions::empty();
        let design = DesignState::all_solid_protected(&grid, &bc);
        let fields = Fields {
            theta: vec![0.0; 8],
            d: vec![0.0; 24],
            f_st: vec![0.0; 24],
            f_th: vec![0.0; 24],
            stress: vec![[0.0; 6]; 1],
        };
        let g = grad_d(
            &QoIKind::PointDisplacement(7),
            &grid,
            &kernels,
            &design,
            &fields,
        )
        .unwrap();
        assert_eq!(g[7], 1.0);
        assert_eq!(g.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn zero_coupling_kills_grad_t() {
        let grid = VoxelGrid::<f64>::build([1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
        let mut mat = crate::grid::MaterialModel::steel();
        mat.alpha = 0.0;
        let kernels = ElementKernels::compute(&mat, &grid).unwrap();
        let bc = BoundaryConditions::empty();
        let design = DesignState::all_solid_protected(&grid, &bc);
        let fields = Fields {
            theta: vec![1.0; 8],
            d: vec![0.5; 24],
            f_st: vec![0.0; 24],
            f_th: vec![0.0; 24],
            stress: vec![[1.0e6, 2.0e6, 0.0, 1.0e5, 0.0, 0.0]; 1],
        };
        for qoi in [
            QoIKind::Compliance,
            QoIKind::PointDisplacement(0),
            QoIKind::PNormStress(6.0),
        ] {
            let g = grad_t(&qoi, &grid, &kernels, &design, &fields).unwrap();
            assert!(g.iter().all(|&v| v == 0.0), "{} grad_t", qoi.name());
        }
    }

    #[test]
    fn pnorm_grad_t_entries_equal_per_element() {
        let grid = VoxelGrid::<f64>::build([1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
        let mat = crate::grid::MaterialModel::steel();
        let kernels = ElementKernels::compute(&mat, &grid).unwrap();
        let bc = BoundaryConditions::empty();
        let design = DesignState::all_solid_protected(&grid, &bc);
        let fields = Fields {
            theta: vec![2.0; 8],
            d: vec![0.0; 24],
            f_st: vec![0.0; 24],
            f_th: vec![0.0; 24],
            stress: vec![[4.0e7, 1.0e7, 0.0, 5.0e5, 0.0, 0.0]; 1],
        };
        let g = grad_t(&QoIKind::PNormStress(6.0), &grid, &kernels, &design, &fields).unwrap();
        // All eight nodal entries share the element-average weight.
        for i in 1..8 {
            assert_eq!(g[i], g[0]);
        }
        // Isotropic thermal stress is hydrostatic, so the von Mises value is
        // insensitive to temperature at fixed displacement: the gradient is
        // zero up to rounding in the coupling vector.
        let scale = kernels.g_vec[0].abs() * 4.0e7;
        for &v in &g {
            assert!(v.abs() <= 1e-12 * scale, "got {v:e}");
        }
    }
}

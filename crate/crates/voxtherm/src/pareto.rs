//! Level-set thresholding of sensitivity fields and the per-volume-level
//! fixed-point iteration.
//!
//! A topology of prescribed volume fraction is the set of elements whose
//! field value exceeds a cut tau, plus the protected elements. Tau comes
//! from a binary search on the element count; ties at the cut are broken by
//! ascending element index so results replay exactly.

use crate::fea::{compliance, solve_fields, CgSettings, ElementKernels, FeaError, Fields, FloatingPolicy};
use crate::grid::{BoundaryConditions, DesignState, VoxelGrid};
use crate::real::Real;
use crate::sensitivity::{SensitivityError, SensitivityField};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParetoError {
    #[error("target volume fraction {target} below protected minimum {min_feasible}")]
    BelowProtected { target: f64, min_feasible: f64 },
    #[error("target volume fraction must lie in (0, 1], got {0}")]
    BadTarget(f64),
    #[error(transparent)]
    Fea(#[from] FeaError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
}

/// Outcome of one thresholding.
#[derive(Debug, Clone)]
pub struct ThresholdResult<F> {
    pub tau: F,
    pub design: DesignState,
    pub achieved_vf: f64,
}

fn count_above<F: Real>(field: &[F], protected: &[bool], tau: F) -> usize {
    let mut c = 0;
    for (v, p) in field.iter().zip(protected.iter()) {
        if *p || *v > tau {
            c += 1;
        }
    }
    c
}

/// Extract the topology of the requested volume fraction from a field.
pub fn threshold_topology<F: Real>(
    field: &SensitivityField<F>,
    target_vf: f64,
    reference: &DesignState,
) -> Result<ThresholdResult<F>, ParetoError> {
    let n = field.values.len();
    if !(target_vf > 0.0 && target_vf <= 1.0) {
        return Err(ParetoError::BadTarget(target_vf));
    }
    let protected = &reference.protected;
    let n_protected = reference.num_protected();
    let k = ((target_vf * n as f64).round() as usize).clamp(1, n);
    if k < n_protected {
        return Err(ParetoError::BelowProtected {
            target: target_vf,
            min_feasible: n_protected as f64 / n as f64,
        });
    }

    let values = &field.values;
    let mut min_v = F::infinity();
    let mut max_v = F::neg_infinity();
    for &v in values {
        if v < min_v {
            min_v = v;
        }
        if v > max_v {
            max_v = v;
        }
    }
    let pad = F::one() + (max_v - min_v).abs() + min_v.abs();
    let mut lo = min_v - pad; // count(lo) = n >= k
    let mut hi = max_v; // count(hi) = protected count <= k
    let mut tau = hi;
    let mut exact = false;
    for _ in 0..500 {
        if !(hi > lo) {
            break;
        }
        let mid = lo + (hi - lo) * F::of(0.5);
        if !(mid > lo && mid < hi) {
            break; // interval collapsed to adjacent floats
        }
        let c = count_above(values, protected, mid);
        if c == k {
            tau = mid;
            exact = true;
            break;
        } else if c > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut solid = vec![false; n];
    if exact {
        for e in 0..n {
            solid[e] = protected[e] || values[e] > tau;
        }
    } else {
        // Tie plateau: take everything above hi, then fill the remaining
        // slots from the boundary values in ascending element index.
        tau = hi;
        let mut count = 0;
        for e in 0..n {
            if protected[e] || values[e] > hi {
                solid[e] = true;
                count += 1;
            }
        }
        for e in 0..n {
            if count >= k {
                break;
            }
            if !solid[e] && values[e] > lo {
                solid[e] = true;
                count += 1;
            }
        }
    }

    let achieved = solid.iter().filter(|&&s| s).count() as f64 / n as f64;
    debug_assert!((achieved - target_vf).abs() <= 1.0 / n as f64 + 1e-12);
    Ok(ThresholdResult {
        tau,
        design: DesignState {
            solid,
            protected: protected.clone(),
        },
        achieved_vf: achieved,
    })
}

/// Result of the fixed-point iteration at one volume level.
pub struct FixedPointOutcome<F> {
    pub design: DesignState,
    pub fields: Fields<F>,
    pub compliance: F,
    pub inner_iters: usize,
    pub converged: bool,
    pub tau: F,
    /// CG solves performed (primal and, via the field closure, adjoint).
    pub solves: usize,
}

/// Alternate {field evaluation, thresholding, re-solve} at a fixed volume
/// fraction until the compliance stabilizes or the iteration cap is hit.
/// Starting from a design already converged at this fraction returns after
/// one field evaluation with the topology unchanged.
#[allow(clippy::too_many_arguments)]
pub fn fixed_point<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    bc: &BoundaryConditions<F>,
    start_design: &DesignState,
    start_fields: &Fields<F>,
    target_vf: f64,
    inner_tol: F,
    inner_max: usize,
    settings: &CgSettings<F>,
    policy: FloatingPolicy,
    mut field_fn: impl FnMut(&DesignState, &Fields<F>) -> Result<(SensitivityField<F>, usize), ParetoError>,
) -> Result<FixedPointOutcome<F>, ParetoError> {
    let mut design = start_design.clone();
    let mut fields = start_fields.clone();
    let mut j = compliance(&fields.d, &fields.f_st, &fields.f_th);
    let mut tau = F::zero();
    let mut converged = false;
    let mut inner_iters = 0;
    let mut solves = 0;

    for _ in 0..inner_max {
        inner_iters += 1;
        let (field, field_solves) = field_fn(&design, &fields)?;
        solves += field_solves;
        let thr = threshold_topology(&field, target_vf, &design)?;
        tau = thr.tau;
        if thr.design.solid == design.solid {
            converged = true;
            break;
        }
        let (new_fields, primal_solves) = solve_fields(
            grid,
            kernels,
            &thr.design,
            bc,
            None,
            settings,
            Some(&fields.theta),
            Some(&fields.d),
            policy,
        )?;
        solves += primal_solves;
        let j_new = compliance(&new_fields.d, &new_fields.f_st, &new_fields.f_th);
        let rel = if j != F::zero() {
            ((j_new - j) / j).abs()
        } else {
            F::infinity()
        };
        if std::env::var_os("VOXTHERM_TRACE").is_some() {
            let changed = thr
                .design
                .solid
                .iter()
                .zip(design.solid.iter())
                .filter(|(a, b)| a != b)
                .count();
            eprintln!(
                "    inner {inner_iters}: vf {target_vf:.4} J {j:.6e} -> {j_new:.6e} rel {:.3e} changed {changed}",
                rel.to_f64()
            );
        }
        design = thr.design;
        fields = new_fields;
        j = j_new;
        if rel <= inner_tol {
            converged = true;
            break;
        }
    }

    Ok(FixedPointOutcome {
        design,
        fields,
        compliance: j,
        inner_iters,
        converged,
        tau,
        solves,
    })
}

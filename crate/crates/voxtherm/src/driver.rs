//! Outer optimization loop: volume decrement schedule, constraint
//! evaluation, multiplier and penalty updates, violation-triggered step-size
//! reduction, and termination.
//!
//! Flow per volume step: solve the primal problem on the current design,
//! evaluate constraints and update the multipliers/penalties (once per
//! design), stop if a constraint is violated (restore the last accepted
//! design, halve the decrement), otherwise build the augmented sensitivity
//! field, threshold at the reduced volume fraction and run the fixed-point
//! iteration there. Reference values J0 and sigma0 are computed once on the
//! full domain and never recomputed.

use std::time::Instant;

use crate::auglag::{
    aux_grad_coeff, combine_fields, update_multiplier, update_penalty, ConstraintState,
};
use crate::fea::{
    compliance, solve_fields, CgSettings, ElementKernels, FeaError, Fields, FloatingPolicy,
};
use crate::grid::{BoundaryConditions, DesignState, VoxelGrid};
use crate::pareto::{fixed_point, ParetoError};
use crate::qoi::{pnorm_stress, value, QoIKind};
use crate::real::Real;
use crate::sensitivity::{element_qprime, solve_adjoints_warm, SensitivityField};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Fea(#[from] FeaError),
    #[error(transparent)]
    Pareto(#[from] ParetoError),
    #[error("no constraints declared")]
    NoConstraints,
    #[error("invalid optimizer config: {0}")]
    BadConfig(String),
}

/// Optimizer parameters with the benchmark defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig<F> {
    /// Final volume fraction to reach.
    pub vf_target: f64,
    /// Volume decrement per accepted step.
    pub dv: f64,
    /// Decrement floor; halving below this terminates the run.
    pub dv_min: f64,
    /// Relative compliance change accepted as inner convergence.
    pub inner_tol: F,
    /// Fixed-point iteration cap per volume level.
    pub inner_max: usize,
    /// Stress aggregation exponent.
    pub p: F,
    /// Initial Lagrange multiplier.
    pub mu0: F,
    /// Initial penalty parameter.
    pub gamma0: F,
    /// Penalty schedule constants.
    pub zeta: F,
    pub eta: F,
    /// CG relative tolerance.
    pub cg_tol: F,
    /// Optional CG iteration cap override.
    pub cg_max_iters: Option<usize>,
    /// One-pass neighbor smoothing of sensitivity fields before
    /// thresholding. Off by default: no filter is applied.
    pub smooth_field: bool,
}

impl<F: Real> Default for OptimizerConfig<F> {
    fn default() -> Self {
        OptimizerConfig {
            vf_target: 0.25,
            dv: 0.025,
            dv_min: 0.025 / 8.0,
            inner_tol: F::of(1e-2),
            inner_max: 5,
            p: F::of(6.0),
            mu0: F::of(100.0),
            gamma0: F::of(10.0),
            zeta: F::of(0.25),
            eta: F::of(10.0),
            cg_tol: F::of(1e-8),
            cg_max_iters: None,
            smooth_field: false,
        }
    }
}

impl<F: Real> OptimizerConfig<F> {
    pub fn validate(&self) -> Result<(), DriverError> {
        if !(self.vf_target > 0.0 && self.vf_target < 1.0) {
            return Err(DriverError::BadConfig("vf_target must lie in (0,1)".into()));
        }
        if !(self.dv_min > 0.0 && self.dv_min <= self.dv) {
            return Err(DriverError::BadConfig("need 0 < dv_min <= dv".into()));
        }
        if self.p < F::of(2.0) {
            return Err(DriverError::BadConfig("p must be >= 2".into()));
        }
        if !(self.zeta > F::zero() && self.zeta < F::one()) {
            return Err(DriverError::BadConfig("zeta must lie in (0,1)".into()));
        }
        if !(self.eta > F::zero()) {
            return Err(DriverError::BadConfig("eta must be > 0".into()));
        }
        Ok(())
    }

    pub fn cg_settings(&self, ndof: usize) -> CgSettings<F> {
        let mut s = CgSettings::for_dofs(ndof).with_tol(self.cg_tol);
        if let Some(cap) = self.cg_max_iters {
            s.max_iters = cap;
        }
        s
    }
}

/// Why a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    VfReached,
    ConstraintAtFloor,
    FeaFailure(String),
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::VfReached => "vf_reached",
            Termination::ConstraintAtFloor => "constraint_violated_at_floor",
            Termination::FeaFailure(_) => "fea_failure",
        }
    }
}

/// One accepted volume step.
#[derive(Debug, Clone)]
pub struct StepRow<F> {
    pub step: usize,
    pub vf: f64,
    pub tau: f64,
    pub inner_iters: usize,
    pub j: F,
    pub j_ratio: F,
    pub sigma_pn: F,
    pub sigma_ratio: F,
    pub g: Vec<F>,
    pub mu: Vec<F>,
    pub gamma: Vec<F>,
    pub fea_count: usize,
    pub wall_ms: u128,
}

/// One constraint evaluation event (rejected designs included).
#[derive(Debug, Clone)]
pub struct EvalRow<F> {
    pub vf: f64,
    pub accepted: bool,
    pub values: Vec<F>,
    pub g: Vec<F>,
    pub mu: Vec<F>,
    pub gamma: Vec<F>,
}

/// Full run log.
#[derive(Debug, Clone)]
pub struct RunRecord<F> {
    pub rows: Vec<StepRow<F>>,
    pub evaluations: Vec<EvalRow<F>>,
    pub termination: Termination,
    pub j0: F,
    pub sigma0: F,
    pub final_vf: f64,
    pub total_fea: usize,
}

/// Result of a full run: final design, its solved fields, and the log.
pub struct RunOutput<F> {
    pub design: DesignState,
    pub fields: Fields<F>,
    pub record: RunRecord<F>,
}

/// Reference compliance and p-norm stress on the full domain (vf = 1).
pub fn compute_references<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    bc: &BoundaryConditions<F>,
    p: F,
    settings: &CgSettings<F>,
) -> Result<(F, F, Fields<F>, usize), DriverError> {
    let design = DesignState::all_solid_protected(grid, bc);
    let (fields, solves) = solve_fields(
        grid,
        kernels,
        &design,
        bc,
        None,
        settings,
        None,
        None,
        FloatingPolicy::PinToReference,
    )?;
    let j0 = compliance(&fields.d, &fields.f_st, &fields.f_th);
    let sigma0 = pnorm_stress(&fields.stress, &design, p)
        .map_err(|e| DriverError::BadConfig(e.to_string()))?;
    Ok((j0, sigma0, fields, solves))
}

/// Per-constraint sensitivities combined with the auxiliary-gradient
/// coefficients. When every coefficient is zero the first constraint's own
/// field is used so the level set still has an ordering.
#[allow(clippy::too_many_arguments)]
fn augmented_field<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    bc: &BoundaryConditions<F>,
    design: &DesignState,
    fields: &Fields<F>,
    constraints: &[ConstraintState<F>],
    settings: &CgSettings<F>,
    smooth: bool,
    lambda_cache: &mut [Option<Vec<F>>],
) -> Result<(SensitivityField<F>, usize), ParetoError> {
    let mut solves = 0;
    let mut per_constraint: Vec<SensitivityField<F>> = Vec::with_capacity(constraints.len());
    let mut coeffs: Vec<F> = Vec::with_capacity(constraints.len());
    for (ci, c) in constraints.iter().enumerate() {
        let q = value(&c.kind, design, fields)
            .map_err(crate::sensitivity::SensitivityError::QoI)?;
        let g = q / c.limit - F::one();
        coeffs.push(aux_grad_coeff(g, c.mu, c.gamma));
        let adjoints = solve_adjoints_warm(
            grid,
            kernels,
            design,
            bc,
            fields,
            &c.kind,
            settings,
            lambda_cache[ci].as_deref(),
        )?;
        lambda_cache[ci] = Some(adjoints.lambda.clone());
        solves += adjoints.solves;
        let qprime = element_qprime(grid, kernels, design, fields, &c.kind, &adjoints);
        let mut field = SensitivityField::from_qprime(&qprime, grid, design);
        if smooth {
            field = field.smoothed(grid);
        }
        per_constraint.push(field);
    }
    let field = if coeffs.iter().all(|&c| c == F::zero()) {
        per_constraint.swap_remove(0)
    } else {
        let refs: Vec<&SensitivityField<F>> = per_constraint.iter().collect();
        combine_fields(&coeffs, &refs).expect("constraint fields share the element set")
    };
    Ok((field, solves))
}

/// One constraint for a run: bound factor relative to the full-domain
/// reference value of its quantity.
#[derive(Debug, Clone)]
pub struct ConstraintSpecification<F> {
    pub kind: QoIKind<F>,
    pub factor: F,
}

fn stress_exponent<F: Real>(
    specs: &[ConstraintSpecification<F>],
    config: &OptimizerConfig<F>,
) -> F {
    specs
        .iter()
        .find_map(|s| match s.kind {
            QoIKind::PNormStress(p) => Some(p),
            _ => None,
        })
        .unwrap_or(config.p)
}

/// Run the optimizer. `on_step` fires once per accepted volume step with
/// the step row and the accepted design.
pub fn run<F: Real>(
    grid: &VoxelGrid<F>,
    kernels: &ElementKernels<F>,
    bc: &BoundaryConditions<F>,
    specs: &[ConstraintSpecification<F>],
    config: &OptimizerConfig<F>,
    mut on_step: impl FnMut(&StepRow<F>, &DesignState),
) -> Result<RunOutput<F>, DriverError> {
    config.validate()?;
    if specs.is_empty() {
        return Err(DriverError::NoConstraints);
    }
    let start = Instant::now();
    let settings = config.cg_settings(grid.num_struct_dofs());
    let policy = FloatingPolicy::PinToReference;
    let n = grid.num_elements();
    let sigma_p = stress_exponent(specs, config);

    // Step 1: references on the full domain, constraint states.
    let (j0, sigma0, full_fields, mut total_fea) =
        compute_references(grid, kernels, bc, sigma_p, &settings)?;
    let mut constraints: Vec<ConstraintState<F>> = specs
        .iter()
        .map(|s| {
            let reference = match s.kind {
                QoIKind::Compliance => j0,
                QoIKind::PNormStress(_) => sigma0,
                QoIKind::PointDisplacement(dof) => full_fields.d[dof],
            };
            ConstraintState::new(s.kind, s.factor * reference, config.mu0, config.gamma0)
        })
        .collect();

    // Designs are identified so multiplier/penalty updates happen exactly
    // once per design even when step 9 restores an earlier one.
    let mut design = DesignState::all_solid_protected(grid, bc);
    let mut fields = full_fields;
    let mut design_id: u64 = 0;
    let mut next_id: u64 = 1;
    let mut updated_ids: Vec<u64> = Vec::new();

    let mut vf = 1.0f64;
    let mut dv = config.dv;
    let mut tau = f64::NAN;
    let mut inner_iters = 0usize;
    let mut last_good: Option<(DesignState, Fields<F>, f64, u64)> = None;
    let mut g_prev: Option<Vec<F>> = None;
    let mut outer_k = 0usize;

    let mut rows: Vec<StepRow<F>> = Vec::new();
    let mut evals: Vec<EvalRow<F>> = Vec::new();
    let mut step = 0usize;
    let mut lambda_cache: Vec<Option<Vec<F>>> = vec![None; constraints.len()];

    let termination = loop {
        // Steps 2-3: constraints on the current design's converged fields.
        for c in constraints.iter_mut() {
            c.value = value(&c.kind, &design, &fields)
                .map_err(|e| DriverError::BadConfig(e.to_string()))?;
        }
        let g: Vec<F> = constraints.iter().map(|c| c.g()).collect();

        let first_visit = !updated_ids.contains(&design_id);
        if first_visit {
            outer_k += 1;
            for (i, c) in constraints.iter_mut().enumerate() {
                c.mu = update_multiplier(c.mu, c.gamma, g[i]);
                if let Some(prev) = &g_prev {
                    c.gamma =
                        update_penalty(c.gamma, prev[i], g[i], outer_k, config.zeta, config.eta);
                }
            }
            g_prev = Some(g.clone());
            updated_ids.push(design_id);
        }

        // Step 4.
        let violated = g.iter().any(|&gi| gi > F::zero());
        evals.push(EvalRow {
            vf,
            accepted: !violated,
            values: constraints.iter().map(|c| c.value).collect(),
            g: g.clone(),
            mu: constraints.iter().map(|c| c.mu).collect(),
            gamma: constraints.iter().map(|c| c.gamma).collect(),
        });

        if violated {
            // Step 9.
            dv *= 0.5;
            if let Some((d, f, v, id)) = &last_good {
                design = d.clone();
                fields = f.clone();
                vf = *v;
                design_id = *id;
            }
            if dv < config.dv_min {
                break Termination::ConstraintAtFloor;
            }
            continue;
        }

        if first_visit {
            let j = compliance(&fields.d, &fields.f_st, &fields.f_th);
            let sigma = pnorm_stress(&fields.stress, &design, sigma_p)
                .map_err(|e| DriverError::BadConfig(e.to_string()))?;
            let row = StepRow {
                step,
                vf,
                tau,
                inner_iters,
                j,
                j_ratio: j / j0,
                sigma_pn: sigma,
                sigma_ratio: sigma / sigma0,
                g: g.clone(),
                mu: constraints.iter().map(|c| c.mu).collect(),
                gamma: constraints.iter().map(|c| c.gamma).collect(),
                fea_count: total_fea,
                wall_ms: start.elapsed().as_millis(),
            };
            on_step(&row, &design);
            rows.push(row);
            step += 1;
        }
        last_good = Some((design.clone(), fields.clone(), vf, design_id));

        // Step 8: target reached.
        if vf <= config.vf_target + 0.5 / n as f64 {
            break Termination::VfReached;
        }

        // Steps 5-7.
        let target = (vf - dv).max(config.vf_target);
        let fp = fixed_point(
            grid,
            kernels,
            bc,
            &design,
            &fields,
            target,
            config.inner_tol,
            config.inner_max,
            &settings,
            policy,
            |d, f| {
                augmented_field(
                    grid,
                    kernels,
                    bc,
                    d,
                    f,
                    &constraints,
                    &settings,
                    config.smooth_field,
                    &mut lambda_cache,
                )
            },
        );
        match fp {
            Ok(out) => {
                total_fea += out.solves;
                if out.converged {
                    if out.design.solid != design.solid {
                        design_id = next_id;
                        next_id += 1;
                    }
                    design = out.design;
                    fields = out.fields;
                    vf = target;
                    tau = out.tau.to_f64();
                    inner_iters = out.inner_iters;
                } else {
                    // Step 9 via inner-loop non-convergence.
                    dv *= 0.5;
                    if let Some((d, f, v, id)) = &last_good {
                        design = d.clone();
                        fields = f.clone();
                        vf = *v;
                        design_id = *id;
                    }
                    if dv < config.dv_min {
                        break Termination::ConstraintAtFloor;
                    }
                }
            }
            Err(e @ ParetoError::BelowProtected { .. }) => return Err(DriverError::Pareto(e)),
            Err(ParetoError::Fea(e)) => break Termination::FeaFailure(e.to_string()),
            Err(e) => break Termination::FeaFailure(e.to_string()),
        }
    };

    // The result is the last accepted design.
    if let Some((d, f, v, _)) = last_good {
        design = d;
        fields = f;
        vf = v;
    }

    Ok(RunOutput {
        design,
        fields,
        record: RunRecord {
            rows,
            evaluations: evals,
            termination,
            j0,
            sigma0,
            final_vf: vf,
            total_fea,
        },
    })
}

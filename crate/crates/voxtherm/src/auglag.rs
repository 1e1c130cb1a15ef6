//! Augmented Lagrangian bookkeeping for the constraint set.
//!
//! Constraints are normalized to g = Q/limit - 1 so multipliers and
//! penalties carry no physical units. The auxiliary value and its gradient
//! coefficient branch on the sign of mu + gamma*g; the inactive branch of
//! the value is the constant -mu^2/(2 gamma), matching the standard
//! formulation (the gradient is zero on that branch either way).

use crate::qoi::QoIKind;
use crate::real::Real;
use crate::sensitivity::SensitivityField;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AugLagError {
    #[error("sensitivity fields cover different element sets ({0} vs {1})")]
    MismatchedFields(usize, usize),
    #[error("no constraints declared")]
    NoConstraints,
}

/// One constraint: bound, current value, multiplier and penalty.
#[derive(Debug, Clone)]
pub struct ConstraintState<F> {
    pub kind: QoIKind<F>,
    /// Absolute bound, e.g. alpha1 * J0.
    pub limit: F,
    /// Current value of the constrained quantity.
    pub value: F,
    /// Lagrange multiplier, kept nonnegative by the update rule.
    pub mu: F,
    /// Penalty parameter, nondecreasing across iterations.
    pub gamma: F,
}

impl<F: Real> ConstraintState<F> {
    pub fn new(kind: QoIKind<F>, limit: F, mu0: F, gamma0: F) -> Self {
        ConstraintState {
            kind,
            limit,
            value: F::zero(),
            mu: mu0,
            gamma: gamma0,
        }
    }

    /// Normalized violation g = Q/limit - 1.
    pub fn g(&self) -> F {
        self.value / self.limit - F::one()
    }
}

/// Auxiliary Lagrangian value for one constraint.
pub fn aux_value<F: Real>(g: F, mu: F, gamma: F) -> F {
    if mu + gamma * g > F::zero() {
        mu * g + F::of(0.5) * gamma * g * g
    } else {
        -(mu * mu) / (F::of(2.0) * gamma)
    }
}

/// Coefficient multiplying the constraint's sensitivity field in the
/// augmented gradient: (mu + gamma*g) when positive, else zero.
pub fn aux_grad_coeff<F: Real>(g: F, mu: F, gamma: F) -> F {
    let c = mu + gamma * g;
    if c > F::zero() {
        c
    } else {
        F::zero()
    }
}

/// mu <- max(mu + gamma * g, 0)
pub fn update_multiplier<F: Real>(mu: F, gamma: F, g: F) -> F {
    (mu + gamma * g).max(F::zero())
}

/// Penalty growth: keep gamma while the violation shrinks fast enough
/// (min(g_curr, 0) <= zeta * min(g_prev, 0)), otherwise gamma <-
/// max(eta * gamma, k^2).
pub fn update_penalty<F: Real>(gamma: F, g_prev: F, g_curr: F, k: usize, zeta: F, eta: F) -> F {
    let curr = g_curr.min(F::zero());
    let prev = g_prev.min(F::zero());
    if curr <= zeta * prev {
        gamma
    } else {
        (eta * gamma).max(F::of((k * k) as f64))
    }
}

/// Weighted combination of normalized per-constraint fields. Each field is
/// affinely mapped to [0, 1] first so constraints with large physical units
/// cannot drown the others; the uniform volume-objective term is omitted
/// because a constant shift cannot change a thresholded set.
pub fn combine_fields<F: Real>(
    coeffs: &[F],
    fields: &[&SensitivityField<F>],
) -> Result<SensitivityField<F>, AugLagError> {
    if fields.is_empty() {
        return Err(AugLagError::NoConstraints);
    }
    let n = fields[0].values.len();
    for f in fields {
        if f.values.len() != n {
            return Err(AugLagError::MismatchedFields(n, f.values.len()));
        }
    }
    let mut combined = vec![F::zero(); n];
    for (coeff, field) in coeffs.iter().zip(fields.iter()) {
        if *coeff == F::zero() {
            continue;
        }
        let normed = field.normalized();
        for (c, v) in combined.iter_mut().zip(normed.iter()) {
            *c += *coeff * *v;
        }
    }
    Ok(SensitivityField { values: combined })
}

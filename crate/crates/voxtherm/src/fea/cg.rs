//! Jacobi-preconditioned conjugate gradients on a masked DOF set.

use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CgError {
    #[error(
        "conjugate gradients did not reach {tol:e} in {iters} iterations \
         (final relative residual {relres:e})"
    )]
    NonConvergence {
        iters: usize,
        tol: f64,
        relres: f64,
        history: Vec<f64>,
    },
    #[error("operator is not positive definite on the active set (p.Ap = {0:e})")]
    Breakdown(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct CgSettings<F> {
    pub rel_tol: F,
    pub max_iters: usize,
}

impl<F: Real> CgSettings<F> {
    /// Default solver contract: 1e-8 relative residual, iteration cap
    /// 40*sqrt(ndof) with a floor of 4000. The cap is sized to flag genuinely
    /// singular systems, not to race healthy ones: thinning topologies on the
    /// benchmark meshes legitimately need a few thousand Jacobi-CG iterations.
    pub fn for_dofs(ndof: usize) -> Self {
        CgSettings {
            rel_tol: F::of(1e-8),
            max_iters: (40.0 * (ndof as f64).sqrt()).ceil().max(4000.0) as usize,
        }
    }

    pub fn with_tol(mut self, tol: F) -> Self {
        self.rel_tol = tol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub iterations: usize,
    pub final_relres: f64,
    pub history: Vec<f64>,
}

fn masked_dot<F: Real>(a: &[F], b: &[F], active: &[bool]) -> F {
    let mut s = F::zero();
    for i in 0..a.len() {
        if active[i] {
            s += a[i] * b[i];
        }
    }
    s
}

/// Solve A x = b restricted to `active` DOFs; inactive entries of the
/// solution are zero. `b` is read on active entries only. `x` enters as the
/// initial guess and is overwritten with the solution.
pub fn pcg<F: Real>(
    mut apply: impl FnMut(&[F], &mut [F]),
    diag: &[F],
    active: &[bool],
    b: &[F],
    x: &mut [F],
    settings: &CgSettings<F>,
) -> Result<CgOutcome, CgError> {
    let n = b.len();
    let mut inv_diag = vec![F::zero(); n];
    for i in 0..n {
        if active[i] {
            debug_assert!(diag[i] > F::zero());
            inv_diag[i] = F::one() / diag[i];
        } else {
            x[i] = F::zero();
        }
    }

    let norm_b = masked_dot(b, b, active).sqrt();
    if norm_b == F::zero() {
        for v in x.iter_mut() {
            *v = F::zero();
        }
        return Ok(CgOutcome {
            iterations: 0,
            final_relres: 0.0,
            history: Vec::new(),
        });
    }

    let mut r = vec![F::zero(); n];
    let mut q = vec![F::zero(); n];
    apply(x, &mut q);
    for i in 0..n {
        r[i] = if active[i] { b[i] - q[i] } else { F::zero() };
    }
    let mut z: Vec<F> = (0..n).map(|i| r[i] * inv_diag[i]).collect();
    let mut p = z.clone();
    let mut rho = masked_dot(&r, &z, active);
    let mut relres = masked_dot(&r, &r, active).sqrt() / norm_b;
    let mut history = vec![relres.to_f64()];

    if relres <= settings.rel_tol {
        return Ok(CgOutcome {
            iterations: 0,
            final_relres: relres.to_f64(),
            history,
        });
    }

    for iter in 1..=settings.max_iters {
        apply(&p, &mut q);
        let p_ap = masked_dot(&p, &q, active);
        if !(p_ap > F::zero()) {
            return Err(CgError::Breakdown(p_ap.to_f64()));
        }
        let alpha = rho / p_ap;
        for i in 0..n {
            if active[i] {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
        }
        relres = masked_dot(&r, &r, active).sqrt() / norm_b;
        history.push(relres.to_f64());
        if relres <= settings.rel_tol {
            return Ok(CgOutcome {
                iterations: iter,
                final_relres: relres.to_f64(),
                history,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rho_next = masked_dot(&r, &z, active);
        let beta = rho_next / rho;
        rho = rho_next;
        for i in 0..n {
            if active[i] {
                p[i] = z[i] + beta * p[i];
            }
        }
    }

    Err(CgError::NonConvergence {
        iters: settings.max_iters,
        tol: settings.rel_tol.to_f64(),
        relres: relres.to_f64(),
        history: history.iter().rev().take(20).rev().cloned().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_diagonal_system() {
        let diag = vec![2.0f64, 4.0, 8.0];
        let active = vec![true, true, true];
        let b = vec![2.0, 4.0, 8.0];
        let mut x = vec![0.0; 3];
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..3 {
                out[i] = diag[i] * v[i];
            }
        };
        let settings = CgSettings::for_dofs(3).with_tol(1e-12);
        let out = pcg(apply, &diag, &active, &b, &mut x, &settings).unwrap();
        assert!(out.final_relres <= 1e-12);
        for v in &x {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn masked_entries_stay_zero() {
        let diag = vec![2.0f64, 4.0, 8.0];
        let active = vec![true, false, true];
        let b = vec![2.0, 100.0, 8.0];
        let mut x = vec![0.5; 3];
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..3 {
                out[i] = diag[i] * v[i];
            }
        };
        let settings = CgSettings::for_dofs(3).with_tol(1e-12);
        pcg(apply, &diag, &active, &b, &mut x, &settings).unwrap();
        assert_eq!(x[1], 0.0);
        assert!((x[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let diag = vec![1.0f64; 4];
        let active = vec![true; 4];
        let b = vec![0.0; 4];
        let mut x = vec![3.0; 4];
        let apply = |v: &[f64], out: &mut [f64]| out.copy_from_slice(v);
        let out = pcg(apply, &diag, &active, &b, &mut x, &CgSettings::for_dofs(4)).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }
}

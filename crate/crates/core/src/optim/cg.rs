use crate::params::{axpy, dot};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `|A x - b| / |b|`, recomputed from scratch at exit.
    pub relative_residual: f64,
}

/// Conjugate gradient for a symmetric positive definite operator.
///
/// Starts from `x = 0`. When the recursive residual reports convergence the
/// true residual `b - A x` is recomputed; if it has drifted above `tol` the
/// iteration restarts from it. Fails with [`Error::Solver`] after `max_iters`
/// iterations or on a non-positive curvature `p^T A p`.
pub fn conjugate_gradient<F>(mut apply: F, rhs: &[f64], tol: f64, max_iters: usize) -> Result<CgOutcome>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = rhs.len();
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let true_residual = |x: &[f64], apply: &mut F| -> Result<Vec<f64>> {
        let ax = apply(x)?;
        Ok(rhs.iter().zip(&ax).map(|(b, a)| b - a).collect())
    };

    for iter in 1..=max_iters {
        let ap = apply(&p)?;
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::Solver {
                iterations: iter,
                residual: rs.sqrt() / b_norm,
            });
        }
        let alpha = rs / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rs_new = dot(&r, &r);

        if rs_new.sqrt() / b_norm <= tol {
            r = true_residual(&x, &mut apply)?;
            let rel = dot(&r, &r).sqrt() / b_norm;
            if rel <= tol {
                return Ok(CgOutcome {
                    solution: x,
                    iterations: iter,
                    relative_residual: rel,
                });
            }
            rs = dot(&r, &r);
            p.copy_from_slice(&r);
            continue;
        }

        let beta = rs_new / rs;
        rs = rs_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }

    let r = true_residual(&x, &mut apply)?;
    Err(Error::Solver {
        iterations: max_iters,
        residual: dot(&r, &r).sqrt() / b_norm,
    })
}

use nalgebra::{DMatrix, DVector};

use crate::nn::{Batch, MlpModel};
use crate::{Error, ParamVector, Result};

/// Largest parameter count for which the dense path will build a `d x d`
/// matrix.
pub const DENSE_MAX_PARAMS: usize = 2000;

/// Explicit empirical Fisher `(1/m) sum_i g_i g_i^T` built from the
/// per-example gradients.
pub fn dense_fisher(model: &MlpModel, batch: &Batch) -> Result<DMatrix<f64>> {
    let d = model.param_count();
    if d > DENSE_MAX_PARAMS {
        return Err(Error::config(format!(
            "dense Fisher requested for {d} parameters (limit {DENSE_MAX_PARAMS})"
        )));
    }
    let grads = model.per_example_grads(batch)?;
    let m = grads.len() as f64;
    let mut f = DMatrix::<f64>::zeros(d, d);
    for g in &grads {
        let v = DVector::from_column_slice(g.as_slice());
        f.ger(1.0 / m, &v, &v, 1.0);
    }
    Ok(f)
}

/// Solves `(F + kappa I) u = rhs` by Cholesky factorization.
pub fn solve_dense_smoothed(fisher: &DMatrix<f64>, kappa: f64, rhs: &ParamVector) -> Result<ParamVector> {
    let d = fisher.nrows();
    if rhs.len() != d {
        return Err(Error::config("right-hand side length does not match Fisher matrix"));
    }
    let mut a = fisher.clone();
    for i in 0..d {
        a[(i, i)] += kappa;
    }
    let chol = a.cholesky().ok_or(Error::Solver {
        iterations: 0,
        residual: f64::NAN,
    })?;
    let u = chol.solve(&DVector::from_column_slice(rhs.as_slice()));
    Ok(ParamVector::from_vec(u.as_slice().to_vec()))
}

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition numbers above this are reported as a warning.
pub const CONDITION_WARNING: f64 = 1e12;
/// Condition numbers above this are treated as numerical rank deficiency.
pub const CONDITION_SINGULAR: f64 = 1e15;

pub struct DenseSolution {
    pub x: DVector<f64>,
    pub condition: f64,
}

/// Solves `a x = b` by LU with partial pivoting and reports the 2-norm
/// condition number of `a`.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DenseSolution> {
    let sv = a.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= CONDITION_SINGULAR) {
        return Err(Error::SingularSystem(format!(
            "condition number {condition:e}"
        )));
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::SingularSystem("zero pivot".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite solution".into()));
    }
    Ok(DenseSolution { x, condition })
}

/// Stationary row vector of an irreducible stochastic matrix.
pub fn stationary_vector(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    Ok(solve_dense(&a, &b)?.x)
}

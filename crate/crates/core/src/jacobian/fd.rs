use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::fixed_point::{check_dim, FixedPointMap};
use crate::linalg::all_finite;
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Difference {
    /// `(q(x + h·e_j) − q(x)) / h`
    #[default]
    Forward,
    /// `(q(x + h·e_j) − q(x − h·e_j)) / 2h`
    Central,
}

/// Forward-difference Jacobian of `map` at `x` with uniform step `h`.
pub fn fd_jacobian<T: Real, M: FixedPointMap<T> + ?Sized>(map: &M, x: &DVector<T>, h: T) -> Result<DMatrix<T>> {
    fd_jacobian_with(map, x, h, Difference::Forward)
}

/// Finite-difference Jacobian. Columns are evaluated in parallel and
/// assembled in column order, so the result does not depend on scheduling.
pub fn fd_jacobian_with<T: Real, M: FixedPointMap<T> + ?Sized>(
    map: &M,
    x: &DVector<T>,
    h: T,
    scheme: Difference,
) -> Result<DMatrix<T>> {
    let n = map.dimension();
    check_dim(n, x)?;
    if !(h > T::zero()) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {h}")));
    }
    let base = match scheme {
        Difference::Forward => {
            let q = map.evaluate(x)?;
            if !all_finite(&q) {
                return Err(Error::InvalidParameter("map is non-finite at the base point".into()));
            }
            Some(q)
        }
        Difference::Central => None,
    };
    let probe = |j: usize, step: T| -> Result<DVector<T>> {
        let mut xp = x.clone();
        xp[j] += step;
        let q = map.evaluate(&xp).map_err(|e| match e {
            Error::Diverged { .. } => Error::NonFiniteProbe { column: j },
            other => other,
        })?;
        if all_finite(&q) {
            Ok(q)
        } else {
            Err(Error::NonFiniteProbe { column: j })
        }
    };
    let columns: Vec<DVector<T>> = (0..n)
        .into_par_iter()
        .map(|j| match &base {
            Some(q0) => Ok((probe(j, h)? - q0) / h),
            None => Ok((probe(j, h)? - probe(j, -h)?) / (h + h)),
        })
        .collect::<Result<_>>()?;
    let m = columns.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(m, n, |i, j| columns[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_point::{AffineMap, FnMap};

    #[test]
    fn affine_map_recovered() {
        let m = DMatrix::from_row_slice(3, 3, &[0.5, -0.2, 0.1, 0.3, 0.0, 0.7, -0.4, 0.25, 0.6]);
        let map = AffineMap::new(m.clone(), DVector::from_vec(vec![1.0, -2.0, 0.5])).unwrap();
        let x = DVector::from_vec(vec![0.3, 0.1, -0.8]);
        for h in [1e-3, 1e-5, 1.0] {
            let j = fd_jacobian(&map, &x, h).unwrap();
            assert!((j - &m).amax() <= 1e-9, "h = {h}");
        }
        let c = fd_jacobian_with(&map, &x, 1e-4, Difference::Central).unwrap();
        assert!((c - &m).amax() <= 1e-9);
    }

    #[test]
    fn non_finite_probe_names_column() {
        let map = FnMap::new(2, |x: &DVector<f64>| {
            DVector::from_vec(vec![x[0], if x[1] > 0.0 { f64::NAN } else { x[1] }])
        });
        let r = fd_jacobian(&map, &DVector::zeros(2), 1e-3);
        assert!(matches!(r, Err(Error::NonFiniteProbe { column: 1 })));
    }
}

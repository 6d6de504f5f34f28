use nalgebra::{DMatrix, DVector};

use crate::linalg::SpdSolver;
use crate::{Error, Real, Result};

/// Gradient-norm tolerance for the logistic x-steps.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

#[derive(Clone, Debug)]
pub struct NewtonSolution<T: Real> {
    pub x: DVector<T>,
    pub iterations: usize,
    pub gradient_norm: T,
}

/// Newton's method for a smooth, strongly convex objective given by its
/// gradient and (SPD) Hessian. Returns once `‖∇f(x)‖₂ ≤ tol`.
///
/// A step is halved (at most 30 times) while it fails to reduce the gradient
/// norm; the full step is always tried first.
pub fn newton_inner_solve<T, G, H>(
    gradient: G,
    hessian: H,
    x0: &DVector<T>,
    tol: T,
    max_iter: usize,
) -> Result<NewtonSolution<T>>
where
    T: Real,
    G: Fn(&DVector<T>) -> DVector<T>,
    H: Fn(&DVector<T>) -> DMatrix<T>,
{
    let mut x = x0.clone();
    let mut g = gradient(&x);
    let mut gnorm = g.norm();
    let half = T::lit(0.5);
    for it in 0..=max_iter {
        if gnorm <= tol {
            return Ok(NewtonSolution { x, iterations: it, gradient_norm: gnorm });
        }
        if !gnorm.is_finite() || it == max_iter {
            break;
        }
        let solver = SpdSolver::new(hessian(&x))
            .map_err(|_| Error::InnerSolver { iterations: it, gradient_norm: gnorm.as_f64() })?;
        let step = solver.solve(&g);
        let mut t = T::one();
        let mut trial = &x - &step;
        let mut gt = gradient(&trial);
        let mut gtn = gt.norm();
        for _ in 0..30 {
            if gtn < gnorm {
                break;
            }
            t *= half;
            trial = &x - &step * t;
            gt = gradient(&trial);
            gtn = gt.norm();
        }
        x = trial;
        g = gt;
        gnorm = gtn;
    }
    Err(Error::InnerSolver { iterations: max_iter, gradient_norm: gnorm.as_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_in_one_step() {
        let q = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let sol = newton_inner_solve(|x| &q * x - &c, |_| q.clone(), &DVector::zeros(3), 1e-10, 50).unwrap();
        assert_eq!(sol.iterations, 1);
        let oracle = q.clone().lu().solve(&c).unwrap();
        assert_relative_eq!(sol.x, oracle, epsilon = 1e-12);
    }

    #[test]
    fn returns_start_when_already_stationary() {
        let x0 = DVector::from_vec(vec![0.3, -0.7]);
        let sol = newton_inner_solve(
            |x: &DVector<f64>| x * 0.0,
            |_| DMatrix::identity(2, 2),
            &x0,
            1e-12,
            50,
        )
        .unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.x, x0);
    }

    #[test]
    fn scalar_logistic_matches_bisection() {
        // f(x) = log(1 + e^{−x}) + (ρ/2)x², f'(x) = −1/(1 + e^{x}) + ρx.
        let rho = 10.0;
        let grad = |x: f64| -1.0 / (1.0 + x.exp()) + rho * x;
        let hess = |x: f64| {
            let s = 1.0 / (1.0 + (-x).exp());
            s * (1.0 - s) + rho
        };
        let sol = newton_inner_solve(
            |x: &DVector<f64>| DVector::from_element(1, grad(x[0])),
            |x: &DVector<f64>| DMatrix::from_element(1, 1, hess(x[0])),
            &DVector::zeros(1),
            1e-13,
            50,
        )
        .unwrap();
        // Bisection oracle on the monotone gradient.
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if grad(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((sol.x[0] - 0.5 * (lo + hi)).abs() < 1e-10);
    }

    #[test]
    fn non_spd_hessian_is_inner_error() {
        let r = newton_inner_solve(
            |x: &DVector<f64>| x - DVector::from_element(1, 1.0),
            |_| DMatrix::from_element(1, 1, -1.0),
            &DVector::zeros(1),
            1e-12,
            10,
        );
        assert!(matches!(r, Err(Error::InnerSolver { iterations: 0, .. })));
    }
}

use nalgebra::DVector;

use crate::Real;

/// `sign(x)·max(|x| − t, 0)`.
#[inline]
pub fn soft_threshold<T: Real>(x: T, t: T) -> T {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        T::zero()
    }
}

/// Proximal operator of `t‖·‖₁`: componentwise soft-thresholding.
pub fn prox_l1<T: Real>(v: &DVector<T>, t: T) -> DVector<T> {
    debug_assert!(t > T::zero(), "threshold must be positive");
    v.map(|x| soft_threshold(x, t))
}

/// Euclidean projection onto the box `[lo, hi]ⁿ`.
pub fn project_box<T: Real>(v: &DVector<T>, lo: T, hi: T) -> DVector<T> {
    debug_assert!(lo < hi, "empty box");
    v.map(|x| if x < lo { lo } else if x > hi { hi } else { x })
}

/// Euclidean projection onto the nonnegative orthant.
pub fn project_nonneg<T: Real>(v: &DVector<T>) -> DVector<T> {
    v.map(|x| if x < T::zero() { T::zero() } else { x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn soft_threshold_branches() {
        assert_eq!(prox_l1(&v(&[2.0, -0.5, -3.0]), 1.0), v(&[1.0, 0.0, -2.0]));
    }

    #[test]
    fn projections() {
        assert_eq!(project_box(&v(&[1.5, -2.0, 0.3]), -1.0, 1.0), v(&[1.0, -1.0, 0.3]));
        assert_eq!(project_nonneg(&v(&[-1.0, 2.0])), v(&[0.0, 2.0]));
        let inside = v(&[0.1, -0.9, 0.99]);
        assert_eq!(project_box(&inside, -1.0, 1.0), inside);
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            (prop::collection::vec(-5.0f64..5.0, n), prop::collection::vec(-5.0f64..5.0, n))
        })
    }

    proptest! {
        #[test]
        fn prox_l1_nonexpansive((a, b) in vec_pair(), t in 0.01f64..3.0) {
            let (a, b) = (v(&a), v(&b));
            let d = (prox_l1(&a, t) - prox_l1(&b, t)).norm();
            prop_assert!(d <= (a - b).norm() + 1e-12);
        }

        #[test]
        fn projections_idempotent_and_nonexpansive((a, b) in vec_pair()) {
            let (a, b) = (v(&a), v(&b));
            let pa = project_box(&a, -1.0, 1.0);
            prop_assert_eq!(project_box(&pa, -1.0, 1.0), pa.clone());
            prop_assert!((pa - project_box(&b, -1.0, 1.0)).norm() <= (&a - &b).norm() + 1e-12);
            let na = project_nonneg(&a);
            prop_assert_eq!(project_nonneg(&na), na.clone());
            prop_assert!((na - project_nonneg(&b)).norm() <= (a - b).norm() + 1e-12);
        }
    }
}

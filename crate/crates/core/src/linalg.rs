//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Real, Result};

/// Euclidean norm.
#[inline]
pub fn norm2<T: Real>(v: &DVector<T>) -> T {
    v.norm()
}

/// Euclidean distance between two vectors of equal length.
pub fn dist2<T: Real>(a: &DVector<T>, b: &DVector<T>) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let d = *x - *y;
        s += d * d;
    }
    s.sqrt()
}

pub fn all_finite<T: Real>(v: &DVector<T>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// A cached Cholesky factorization of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct SpdSolver<T: Real> {
    chol: Cholesky<T, Dyn>,
}

impl<T: Real> SpdSolver<T> {
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        Cholesky::new(matrix)
            .map(|chol| Self { chol })
            .ok_or(Error::NotPositiveDefinite)
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, rhs: &DVector<T>) -> DVector<T> {
        self.chol.solve(rhs)
    }

    pub fn inverse(&self) -> DMatrix<T> {
        self.chol.inverse()
    }
}

/// Minimum-norm least-squares solution of `min ‖a·x − b‖₂`.
///
/// Householder QR with column pivoting determines the numerical rank: a
/// diagonal entry of `R` counts when it exceeds `rank_tol` times the largest
/// column norm of `a`. Rank-deficient systems are finished with a complete
/// orthogonal decomposition so the returned `x` has the smallest norm among
/// all minimizers.
pub fn min_norm_lstsq<T: Real>(a: &DMatrix<T>, b: &DVector<T>, rank_tol: T) -> DVector<T> {
    let (n, p) = a.shape();
    assert_eq!(b.len(), n, "least-squares rhs length");
    if p == 0 {
        return DVector::zeros(0);
    }
    let mut r = a.clone();
    let mut c = b.clone();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut col_norms: Vec<T> = (0..p).map(|j| r.column(j).norm()).collect();
    let max_norm = col_norms.iter().copied().fold(T::zero(), |m, v| m.max(v));
    if max_norm == T::zero() {
        return DVector::zeros(p);
    }
    let threshold = rank_tol * max_norm;

    let steps = n.min(p);
    let mut rank = 0;
    for k in 0..steps {
        // Pivot: remaining column with the largest trailing norm.
        let mut best = k;
        for j in k + 1..p {
            if col_norms[j] > col_norms[best] {
                best = j;
            }
        }
        if best != k {
            r.swap_columns(k, best);
            perm.swap(k, best);
            col_norms.swap(k, best);
        }
        let alpha = r.view((k, k), (n - k, 1)).norm();
        if alpha <= threshold {
            break;
        }
        // Householder reflector annihilating r[k+1.., k].
        let x0 = r[(k, k)];
        let beta = if x0 >= T::zero() { -alpha } else { alpha };
        let mut v = DVector::<T>::zeros(n - k);
        v[0] = x0 - beta;
        for i in 1..n - k {
            v[i] = r[(k + i, k)];
        }
        let vnorm2 = v.norm_squared();
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for j in k..p {
                let mut dot = T::zero();
                for i in 0..n - k {
                    dot += v[i] * r[(k + i, j)];
                }
                let f = two * dot / vnorm2;
                for i in 0..n - k {
                    r[(k + i, j)] -= f * v[i];
                }
            }
            let mut dot = T::zero();
            for i in 0..n - k {
                dot += v[i] * c[k + i];
            }
            let f = two * dot / vnorm2;
            for i in 0..n - k {
                c[k + i] -= f * v[i];
            }
        }
        rank += 1;
        for j in k + 1..p {
            col_norms[j] = r.view((k + 1, j), (n - k - 1, 1)).norm();
        }
    }

    let mut y = DVector::<T>::zeros(p);
    if rank == 0 {
        return y;
    }
    if rank == p {
        for i in (0..p).rev() {
            let mut s = c[i];
            for j in i + 1..p {
                s -= r[(i, j)] * y[j];
            }
            y[i] = s / r[(i, i)];
        }
    } else {
        // R1 = r[0..rank, 0..p] is upper trapezoidal. Factor R1ᵀ = Z·T and
        // solve Tᵀ w = c, y = Z w, which is the minimum-norm solution.
        let mut r1t = DMatrix::<T>::zeros(p, rank);
        for i in 0..rank {
            for j in i..p {
                r1t[(j, i)] = r[(i, j)];
            }
        }
        let qr = r1t.qr();
        let z = qr.q();
        let t = qr.r();
        let mut w = DVector::<T>::zeros(rank);
        for i in 0..rank {
            let mut s = c[i];
            for j in 0..i {
                s -= t[(j, i)] * w[j];
            }
            w[i] = s / t[(i, i)];
        }
        y = z * w;
    }
    let mut x = DVector::<T>::zeros(p);
    for (k, &col) in perm.iter().enumerate() {
        x[col] = y[k];
    }
    x
}

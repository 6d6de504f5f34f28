//! Eigenvalues of dense real nonsymmetric matrices: balancing, Householder
//! reduction to upper Hessenberg form, then the Francis double-shift QR
//! iteration (eigenvalues only).

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::{Error, Real, Result};

/// QR sweeps allowed per eigenvalue before giving up.
const MAX_SWEEPS: usize = 300;

fn swap_symmetric<T: Real>(a: &mut DMatrix<T>, i: usize, j: usize) {
    if i != j {
        a.swap_rows(i, j);
        a.swap_columns(i, j);
    }
}

/// Permutes rows/columns whose off-diagonal part (within the active block)
/// vanishes to the bottom or top, isolating their eigenvalues exactly, then
/// rescales the remaining block by powers of two so that row and column
/// norms are comparable. Both are similarity transforms, exact in floating
/// point. Returns the active block `lo..=hi`.
pub fn balance<T: Real>(a: &mut DMatrix<T>) -> (usize, usize) {
    let n = a.nrows();
    if n == 0 {
        return (0, 0);
    }
    let (mut lo, mut hi) = (0usize, n - 1);
    // Rows with zeros left and right of the diagonal go to the bottom.
    'rows: loop {
        for j in (0..=hi).rev() {
            if (0..=hi).all(|i| i == j || a[(j, i)] == T::zero()) {
                swap_symmetric(a, j, hi);
                if hi == 0 {
                    return (0, 0);
                }
                hi -= 1;
                continue 'rows;
            }
        }
        break;
    }
    // Columns with zeros above and below the diagonal go to the top.
    'cols: loop {
        for j in lo..=hi {
            if (lo..=hi).all(|i| i == j || a[(i, j)] == T::zero()) {
                swap_symmetric(a, j, lo);
                lo += 1;
                if lo > hi {
                    return (lo, hi);
                }
                continue 'cols;
            }
        }
        break;
    }
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in lo..=hi {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in lo..=hi {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let s = c + r;
            let mut g = r / radix;
            let mut f = T::one();
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < T::lit(0.95) * s {
                done = false;
                let ginv = T::one() / f;
                for j in 0..n {
                    a[(i, j)] *= ginv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
    (lo, hi)
}

/// In-place orthogonal reduction to upper Hessenberg form.
pub fn hessenberg<T: Real>(a: &mut DMatrix<T>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    let two = T::lit(2.0);
    let mut v = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    for k in 0..n - 2 {
        let len = n - k - 1;
        let mut scale = T::zero();
        for i in k + 1..n {
            scale += a[(i, k)].abs();
        }
        if scale == T::zero() {
            continue;
        }
        let mut sigma = T::zero();
        for i in 0..len {
            v[i] = a[(k + 1 + i, k)] / scale;
            sigma += v[i] * v[i];
        }
        let alpha = if v[0] >= T::zero() { -sigma.sqrt() } else { sigma.sqrt() };
        let v0 = v[0];
        v[0] -= alpha;
        let vtv = sigma - v0 * v0 + v[0] * v[0];
        if vtv == T::zero() {
            continue;
        }
        let f = two / vtv;
        // Left: rows k+1.., columns k.. (column k becomes alpha·scale·e₁).
        for j in k..n {
            let col = a.column(j);
            let col = &col.as_slice()[k + 1..];
            let mut dot = T::zero();
            for i in 0..len {
                dot += v[i] * col[i];
            }
            let d = dot * f;
            let col = &mut a.column_mut(j);
            let col = &mut col.as_mut_slice()[k + 1..];
            for i in 0..len {
                col[i] -= d * v[i];
            }
        }
        // Right: all rows, columns k+1.. . w = A[:, k+1..]·v, then A -= f·w·vᵀ.
        w.iter_mut().for_each(|x| *x = T::zero());
        for c in 0..len {
            let vc = v[c];
            if vc == T::zero() {
                continue;
            }
            let col = a.column(k + 1 + c);
            for (wi, ai) in w.iter_mut().zip(col.iter()) {
                *wi += vc * *ai;
            }
        }
        for c in 0..len {
            let vc = v[c] * f;
            if vc == T::zero() {
                continue;
            }
            let mut col = a.column_mut(k + 1 + c);
            for (ai, wi) in col.iter_mut().zip(w.iter()) {
                *ai -= vc * *wi;
            }
        }
        for i in k + 2..n {
            a[(i, k)] = T::zero();
        }
    }
}

#[inline]
fn sign<T: Real>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix, with exceptional
/// shifts after 10 and 20 stalled sweeps. Eigenvalues are returned in the
/// order they deflate.
pub fn hqr<T: Real>(a: &mut DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = a.nrows();
    let eps = T::eps();
    let mut wr = vec![Complex::new(T::zero(), T::zero()); n];
    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = T::zero();
    while nn >= 0 {
        let nu = nn as usize;
        let mut its = 0usize;
        loop {
            // Look for a negligible subdiagonal element.
            let mut l = 0usize;
            let mut ll = nu;
            while ll > 0 {
                let mut s = a[(ll - 1, ll - 1)].abs() + a[(ll, ll)].abs();
                if s == T::zero() {
                    s = anorm;
                }
                if a[(ll, ll - 1)].abs() <= eps * s {
                    a[(ll, ll - 1)] = T::zero();
                    l = ll;
                    break;
                }
                ll -= 1;
            }
            let mut x = a[(nu, nu)];
            if l == nu {
                wr[nu] = Complex::new(x + t, T::zero());
                nn -= 1;
                break;
            }
            let mut y = a[(nu - 1, nu - 1)];
            let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l + 1 == nu {
                let p = T::lit(0.5) * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= T::zero() {
                    z = p + sign(z, p);
                    wr[nu - 1] = Complex::new(x + z, T::zero());
                    wr[nu] = wr[nu - 1];
                    if z != T::zero() {
                        wr[nu] = Complex::new(x - w / z, T::zero());
                    }
                } else {
                    wr[nu] = Complex::new(x + p, -z);
                    wr[nu - 1] = Complex::new(x + p, z);
                }
                nn -= 2;
                break;
            }
            if its == MAX_SWEEPS {
                return Err(Error::EigenNoConvergence { index: nu });
            }
            if its > 0 && its % 10 == 0 {
                t += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;
            // Find two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[(i + 2, i)] = T::zero();
                if i != m {
                    a[(i + 2, i - 1)] = T::zero();
                }
            }
            // Double-shift QR sweep on rows/columns l..=nu.
            for k in m..nu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != nu { a[(k + 2, k - 1)] } else { T::zero() };
                    x = p.abs() + q.abs() + r.abs();
                    if x != T::zero() {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s == T::zero() {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nu {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k + 1 != nu {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * z;
                    }
                    a[(k + 1, j)] -= pp * y;
                    a[(k, j)] -= pp * x;
                }
                let mmin = if nu < k + 3 { nu } else { k + 3 };
                for i in l..=mmin {
                    let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k + 1 != nu {
                        pp += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(wr)
}

/// All eigenvalues of a dense real square matrix, complex pairs adjacent.
pub fn eigenvalues<T: Real>(matrix: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let (n, c) = matrix.shape();
    if n != c {
        return Err(Error::DimensionMismatch { expected: n, found: c });
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let mut a = matrix.clone();
    let _ = balance(&mut a);
    hessenberg(&mut a);
    hqr(&mut a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    fn close(a: &[Complex<f64>], b: &[Complex<f64>], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.1, -0.3, 0.833]));
        let e = sorted(eigenvalues(&m).unwrap());
        let want = [-0.3, 0.1, 0.833].map(|r| Complex::new(r, 0.0));
        assert!(close(&e, &want, 1e-15));
    }

    #[test]
    fn skew_rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -0.9, 0.9, 0.0]);
        let e = sorted(eigenvalues(&m).unwrap());
        assert!(close(&e, &[Complex::new(0.0, -0.9), Complex::new(0.0, 0.9)], 1e-15));
    }

    #[test]
    fn companion_of_quadratic() {
        // λ² − 1.136λ + 0.336 has complex roots of modulus √0.336.
        let m = DMatrix::from_row_slice(2, 2, &[1.136, -0.336, 1.0, 0.0]);
        for l in eigenvalues(&m).unwrap() {
            assert!((l.norm() - 0.336f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_nalgebra_schur_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for n in [1, 2, 3, 5, 8, 20, 60] {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let ours = sorted(eigenvalues(&m).unwrap());
            let oracle = sorted(m.clone().complex_eigenvalues().iter().copied().collect());
            assert!(close(&ours, &oracle, 1e-9), "n = {n}");
        }
    }

    #[test]
    fn jordan_block_and_zero_matrix() {
        let z = DMatrix::<f64>::zeros(4, 4);
        assert!(eigenvalues(&z).unwrap().iter().all(|l| l.norm() == 0.0));
        let j = DMatrix::from_row_slice(3, 3, &[0.5, 1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.5]);
        assert!(eigenvalues(&j).unwrap().iter().all(|l| (l - 0.5).norm() < 1e-5));
    }

    #[test]
    fn rejects_non_square() {
        assert!(eigenvalues(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }
}

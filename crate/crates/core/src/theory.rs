//! Optimal stationary Anderson coefficients and predicted convergence factors.
//!
//! For an eigenvalue `μ` of the fixed-point Jacobian, `sAA(m)` with
//! coefficients `β` has iteration-Jacobian eigenvalues `λ` solving
//!
//! `λ^{m+1} − (1 + Σβ_i)μλ^m + β₁μλ^{m−1} + … + β_mμ = 0`,
//!
//! so the asymptotic factor is the largest root modulus over the spectrum.

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anderson::{Provenance, SaaPlan};
use crate::jacobian::{Classification, Spectrum};
use crate::{cabs, csqrt, Error, Real, Result};

/// `|ρ(Ψ′(β)) − bound|` at or below this counts as attaining the lower bound.
pub const EQUALITY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultKind {
    ExactClosedForm,
    LowerBoundEqualityCheck,
    LowerBoundOnly,
    GridOptimum,
}

impl ResultKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResultKind::ExactClosedForm => "exact_closed_form",
            ResultKind::LowerBoundEqualityCheck => "lower_bound_equality_check",
            ResultKind::LowerBoundOnly => "lower_bound_only",
            ResultKind::GridOptimum => "grid_optimum",
        }
    }
}

/// Coefficients chosen for `sAA(m)` and the factor they give.
///
/// `factor` is the predicted asymptotic factor `ρ(Ψ′(β))`. On the complex
/// path `lower_bound` holds `1 − √(1 − ρ_{q′})` and `measured` the value of
/// `ρ(Ψ′(β))` actually obtained for the candidate `β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalSaaResult<T> {
    pub beta: Vec<T>,
    pub factor: T,
    pub kind: ResultKind,
    pub case_label: String,
    /// `(center, radius)` of the circle holding complex `λ` for real `μ` (m = 1).
    pub circle: Option<(T, T)>,
    pub lower_bound: Option<T>,
    pub measured: Option<T>,
}

impl<T: Real> OptimalSaaResult<T> {
    pub fn to_plan(&self) -> Result<SaaPlan<T>> {
        let provenance = match self.kind {
            ResultKind::ExactClosedForm | ResultKind::LowerBoundEqualityCheck => Provenance::ClosedForm,
            ResultKind::LowerBoundOnly => Provenance::LowerBoundOnly,
            ResultKind::GridOptimum => Provenance::GridSweep,
        };
        SaaPlan::new(self.beta.clone(), self.factor, provenance)
    }
}

fn horner<T: Real>(coeffs: &[Complex<T>], z: Complex<T>) -> (Complex<T>, Complex<T>) {
    // coeffs[k] multiplies z^k; returns (p(z), p'(z)).
    let mut p = Complex::new(T::zero(), T::zero());
    let mut dp = p;
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + *c;
    }
    (p, dp)
}

/// Roots of a monic polynomial `z^d + Σ_{k<d} coeffs[k] z^k` (Aberth–Ehrlich).
fn monic_roots<T: Real>(lower: &[Complex<T>]) -> Vec<Complex<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    // Exact zero roots from vanishing trailing coefficients.
    let shift = lower.iter().take_while(|c| cabs(**c) == T::zero()).count();
    let mut roots = vec![zero; shift];
    let lower = &lower[shift..];
    let d = lower.len();
    if d == 0 {
        return roots;
    }
    if d == 1 {
        roots.push(-lower[0]);
        return roots;
    }
    let mut coeffs: Vec<Complex<T>> = lower.to_vec();
    coeffs.push(Complex::new(T::one(), T::zero()));
    // Starting circle on the scale of the root moduli (half the Fujiwara bound).
    let radius = lower.iter().enumerate().fold(T::eps(), |r, (k, c)| {
        r.max(cabs(*c).powf(T::one() / T::from_usize_lossy(d - k)))
    });
    let mut z: Vec<Complex<T>> = (0..d)
        .map(|k| {
            let ang = T::two_pi() * T::from_usize_lossy(k) / T::from_usize_lossy(d) + T::lit(0.4);
            Complex::new(radius * ang.cos(), radius * ang.sin())
        })
        .collect();
    let tol = T::eps() * T::lit(4.0);
    for _ in 0..500 {
        let mut worst = T::zero();
        for i in 0..d {
            let (p, dp) = horner(&coeffs, z[i]);
            if cabs(p) == T::zero() {
                continue;
            }
            let ratio = p / dp;
            let mut s = zero;
            for j in 0..d {
                if j != i {
                    s += Complex::new(T::one(), T::zero()) / (z[i] - z[j]);
                }
            }
            let step = ratio / (Complex::new(T::one(), T::zero()) - ratio * s);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                worst = worst.max(cabs(step) / cabs(z[i]).max(T::one()));
            }
        }
        if worst <= tol {
            break;
        }
    }
    roots.extend(z);
    roots
}

/// Roots `λ` of the `sAA(m)` characteristic polynomial for eigenvalue `μ`.
pub fn lambda_roots<T: Real>(mu: Complex<T>, beta: &[T]) -> Vec<Complex<T>> {
    let m = beta.len();
    let zero = Complex::new(T::zero(), T::zero());
    if cabs(mu) == T::zero() {
        return vec![zero; m + 1];
    }
    let lead = T::one() + beta.iter().fold(T::zero(), |s, b| s + *b);
    if m == 1 {
        // λ² − (1+β)μλ + βμ = 0
        let p = mu * lead;
        let disc = p * p - mu * (T::lit(4.0) * beta[0]);
        let sq = csqrt(disc);
        let half = T::lit(0.5);
        let (r1, r2) = ((p + sq) * half, (p - sq) * half);
        // Recompute the smaller root from the product to avoid cancellation.
        let prod = mu * beta[0];
        return if cabs(r1) >= cabs(r2) {
            let small = if cabs(r1) > T::zero() { prod / r1 } else { r2 };
            vec![r1, small]
        } else {
            vec![prod / r2, r2]
        };
    }
    // Coefficients of z^0 .. z^m (monic leading term implied).
    let mut lower = vec![zero; m + 1];
    lower[m] = -(mu * lead);
    for (i, b) in beta.iter().enumerate() {
        lower[m - 1 - i] = mu * *b;
    }
    monic_roots(&lower)
}

/// Largest root modulus of `λ² − (1+β)μλ + βμ` for real `μ`.
pub fn s_mu<T: Real>(mu: T, beta: T) -> T {
    let p = (T::one() + beta) * mu;
    let disc = p * p - T::lit(4.0) * beta * mu;
    if disc < T::zero() {
        (beta * mu).sqrt()
    } else {
        (p.abs() + disc.sqrt()) * T::lit(0.5)
    }
}

/// `β` minimizing `S_μ(β)` for one real `μ`, with the minimum.
pub fn optimal_beta_single_mu<T: Real>(mu: T) -> (T, T) {
    if mu == T::zero() {
        return (T::zero(), T::zero());
    }
    if mu >= T::one() {
        return (-T::one(), mu.sqrt());
    }
    let s = (T::one() - mu).sqrt();
    let beta = (T::one() - s) / (T::one() + s);
    if mu > T::zero() {
        (beta, T::one() - s)
    } else {
        (beta, s - T::one())
    }
}

/// `(β/(1+β), |β/(1+β)|)`.
pub fn circle_params<T: Real>(beta: T) -> Result<(T, T)> {
    if beta == -T::one() {
        return Err(Error::DegenerateCircle);
    }
    let c = beta / (T::one() + beta);
    Ok((c, c.abs()))
}

/// Closed-form optimum for a real spectrum `[σ_min, σ_max]`.
pub fn optimal_saa1_real<T: Real>(sigma_min: T, sigma_max: T) -> Result<OptimalSaaResult<T>> {
    let radius = sigma_max.abs().max(sigma_min.abs());
    if !(radius < T::one()) {
        return Err(Error::OutOfDomain { radius: radius.as_f64() });
    }
    let one = T::one();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let half = T::lit(0.5);
    let upper = |beta: T, s: T| {
        // ((1+β)s + √((1+β)²s² − 4βs))/2, the larger root for s > 0.
        let p = (one + beta) * s;
        (p + (p * p - four * beta * s).sqrt()) * half
    };
    let lower = |beta: T, s: T| {
        let p = (one + beta) * s;
        (-p + (p * p - four * beta * s).sqrt()) * half
    };
    let (beta, factor, label) = if sigma_min >= T::zero() {
        let (b, f) = optimal_beta_single_mu(sigma_max);
        (b, f, "nonnegative")
    } else if sigma_max <= T::zero() {
        let (b, f) = optimal_beta_single_mu(sigma_min);
        (b, f, "nonpositive")
    } else if sigma_max == -sigma_min {
        (T::zero(), sigma_max, "a")
    } else if sigma_max > -sigma_min {
        let (beta_plus, f_plus) = optimal_beta_single_mu(sigma_max);
        if lower(beta_plus, sigma_min) <= f_plus {
            (beta_plus, f_plus, "b1")
        } else {
            let m_plus = (sigma_max - sigma_min) / (-two * sigma_max * sigma_min * (sigma_max + sigma_min)).sqrt();
            let r = m_plus - (m_plus * m_plus - four).sqrt();
            let beta = r * r / four;
            (beta, upper(beta, sigma_max), "b2")
        }
    } else {
        let (beta_minus, f_minus) = optimal_beta_single_mu(sigma_min);
        if upper(beta_minus, sigma_max) <= f_minus {
            (beta_minus, f_minus, "c1")
        } else {
            let m_minus = (sigma_max - sigma_min) / (two * sigma_max * sigma_min * (sigma_max + sigma_min)).sqrt();
            let r = (m_minus * m_minus + four).sqrt() - m_minus;
            let beta = -(r * r) / four;
            (beta, upper(beta, sigma_max), "c2")
        }
    };
    Ok(OptimalSaaResult {
        beta: vec![beta],
        factor,
        kind: ResultKind::ExactClosedForm,
        case_label: label.to_string(),
        circle: circle_params(beta).ok(),
        lower_bound: None,
        measured: None,
    })
}

/// Optimal (or best available) `sAA(1)` coefficient for a Jacobian spectrum.
///
/// Real spectra use the closed forms. For complex spectra the coefficient
/// comes from the spectral radius and the lower bound `1 − √(1 − ρ_{q′})`;
/// the candidate is checked against the exact factor `ρ(Ψ′(β))` and only
/// reported as attaining the bound when the two agree to [`EQUALITY_TOLERANCE`]
/// and a nonnegative real eigenvalue attains the radius.
pub fn optimal_saa1<T: Real>(spectrum: &Spectrum<T>) -> Result<OptimalSaaResult<T>> {
    match spectrum.classification {
        Classification::Real { sigma_min, sigma_max } => optimal_saa1_real(sigma_min, sigma_max),
        Classification::Complex { mu_plus, rho } => {
            if !(rho < T::one()) {
                return Err(Error::OutOfDomain { radius: rho.as_f64() });
            }
            let (beta, bound) = optimal_beta_single_mu(rho);
            let measured = rho_saa(&spectrum.eigenvalues, &[beta]);
            let attained = mu_plus.is_some_and(|mp| (rho - mp).abs() <= spectrum.imag_tolerance * rho.max(T::one()));
            let (kind, factor, label) = if !attained {
                (ResultKind::LowerBoundOnly, measured, "complex_radius_not_real")
            } else if (measured - bound).abs() <= T::lit(EQUALITY_TOLERANCE) {
                (ResultKind::LowerBoundEqualityCheck, bound, "complex_bound_attained")
            } else {
                (ResultKind::LowerBoundOnly, measured, "complex_bound_exceeded")
            };
            Ok(OptimalSaaResult {
                beta: vec![beta],
                factor,
                kind,
                case_label: label.to_string(),
                circle: circle_params(beta).ok(),
                lower_bound: Some(bound),
                measured: Some(measured),
            })
        }
    }
}

/// Block companion matrix of the `sAA(m)` iteration on stacked history:
/// first block row `[(1+Σβ)q′, −β₁q′, …, −β_mq′]`, identities below.
pub fn companion_psi<T: Real>(q_prime: &DMatrix<T>, beta: &[T]) -> Result<DMatrix<T>> {
    let (n, c) = q_prime.shape();
    if n != c {
        return Err(Error::DimensionMismatch { expected: n, found: c });
    }
    if beta.is_empty() {
        return Err(Error::InvalidParameter("companion matrix needs m >= 1".into()));
    }
    let m = beta.len();
    let size = (m + 1) * n;
    let mut psi = DMatrix::zeros(size, size);
    let lead = T::one() + beta.iter().fold(T::zero(), |s, b| s + *b);
    psi.view_mut((0, 0), (n, n)).copy_from(&(q_prime * lead));
    for (i, b) in beta.iter().enumerate() {
        psi.view_mut((0, (i + 1) * n), (n, n)).copy_from(&(q_prime * -*b));
    }
    for blk in 0..m {
        for k in 0..n {
            psi[((blk + 1) * n + k, blk * n + k)] = T::one();
        }
    }
    Ok(psi)
}

/// Representatives of an eigenvalue multiset up to conjugation and exact repeats.
pub fn distinct_eigenvalues<T: Real>(eigenvalues: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut v: Vec<Complex<T>> = eigenvalues.iter().map(|l| Complex::new(l.re, l.im.abs())).collect();
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    v.dedup();
    v
}

/// Largest root modulus for a single eigenvalue.
fn max_root_modulus<T: Real>(mu: Complex<T>, beta: &[T]) -> T {
    if mu.im == T::zero() && beta.len() == 1 {
        return s_mu(mu.re, beta[0]);
    }
    if beta.iter().all(|b| *b == T::zero()) {
        return cabs(mu);
    }
    lambda_roots(mu, beta).iter().fold(T::zero(), |r, l| r.max(cabs(*l)))
}

/// `ρ(Ψ′(β))` computed as the largest root modulus over the eigenvalues.
pub fn rho_saa<T: Real>(eigenvalues: &[Complex<T>], beta: &[T]) -> T {
    distinct_eigenvalues(eigenvalues)
        .iter()
        .fold(T::zero(), |r, mu| r.max(max_root_modulus(*mu, beta)))
}

/// Grid `{lo, lo+step, …}` up to `hi` (inclusive up to rounding).
pub fn grid_points(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::EmptyGrid);
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    // Snap to 12 decimals so values like -0.7 print and compare cleanly.
    Ok((0..count).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect())
}

fn sweep_grid<T: Real>(eigenvalues: &[Complex<T>], axes: &[Vec<f64>]) -> Result<(Vec<T>, T)> {
    if axes.iter().any(|a| a.is_empty()) || axes.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mus = distinct_eigenvalues(eigenvalues);
    let total: usize = axes.iter().map(|a| a.len()).product();
    let beta_at = |mut idx: usize| {
        let mut beta = vec![T::zero(); axes.len()];
        for d in (0..axes.len()).rev() {
            beta[d] = T::lit(axes[d][idx % axes[d].len()]);
            idx /= axes[d].len();
        }
        beta
    };
    let key = |v: T| if v.is_finite() { v } else { T::max_value().unwrap() };
    let (best_val, best_idx) = (0..total)
        .into_par_iter()
        .map(|idx| {
            let beta = beta_at(idx);
            let v = mus.iter().fold(T::zero(), |r, mu| r.max(max_root_modulus(*mu, &beta)));
            (key(v), idx)
        })
        .reduce(
            || (T::max_value().unwrap(), usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    Ok((beta_at(best_idx), best_val))
}

/// Exhaustive search of `ρ(Ψ′(β))` over the grid `{lo, …, hi}^m`. Ties go
/// to the lexicographically smallest `β`.
pub fn brute_force_sweep<T: Real>(
    eigenvalues: &[Complex<T>],
    m: usize,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<OptimalSaaResult<T>> {
    if m == 0 {
        return Err(Error::InvalidParameter("sweep needs m >= 1".into()));
    }
    let axis = grid_points(lo, hi, step)?;
    let (beta, factor) = sweep_grid(eigenvalues, &vec![axis; m])?;
    Ok(grid_result(beta, factor, "grid"))
}

/// Coarse sweep followed by a finer sweep of half-width `radius` and step
/// `fine_step` around the coarse optimum.
pub fn refined_sweep<T: Real>(
    eigenvalues: &[Complex<T>],
    m: usize,
    coarse: (f64, f64, f64),
    radius: f64,
    fine_step: f64,
) -> Result<OptimalSaaResult<T>> {
    let first = brute_force_sweep(eigenvalues, m, coarse.0, coarse.1, coarse.2)?;
    refine_around(eigenvalues, &first, radius, fine_step)
}

/// Finer sweep of half-width `radius` and step `fine_step` around an earlier
/// sweep result. Never returns a worse factor than `coarse`.
pub fn refine_around<T: Real>(
    eigenvalues: &[Complex<T>],
    coarse: &OptimalSaaResult<T>,
    radius: f64,
    fine_step: f64,
) -> Result<OptimalSaaResult<T>> {
    let axes = coarse
        .beta
        .iter()
        .map(|b| grid_points(b.as_f64() - radius, b.as_f64() + radius, fine_step))
        .collect::<Result<Vec<_>>>()?;
    let (beta, factor) = sweep_grid(eigenvalues, &axes)?;
    // The fine grid contains the coarse optimum up to rounding; keep the better.
    if factor <= coarse.factor {
        Ok(grid_result(beta, factor, "grid_refined"))
    } else {
        Ok(OptimalSaaResult { case_label: "grid_refined".into(), ..coarse.clone() })
    }
}

fn grid_result<T: Real>(beta: Vec<T>, factor: T, label: &str) -> OptimalSaaResult<T> {
    let circle = if beta.len() == 1 { circle_params(beta[0]).ok() } else { None };
    OptimalSaaResult {
        beta,
        factor,
        kind: ResultKind::GridOptimum,
        case_label: label.to_string(),
        circle,
        lower_bound: None,
        measured: None,
    }
}

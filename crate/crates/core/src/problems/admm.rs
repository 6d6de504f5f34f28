use nalgebra::{DMatrix, DVector};

use super::instance::{ProblemInstance, ProblemKind};
use super::newton::{newton_inner_solve, NEWTON_MAX_ITER, NEWTON_TOL};
use super::prox::{project_box, project_nonneg, prox_l1};
use crate::fixed_point::{check_dim, FixedPointMap};
use crate::linalg::SpdSolver;
use crate::{Error, Real, Result};

/// Primal `x`, split `z` and scaled dual `u` of one ADMM iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState<T: Real> {
    pub x: DVector<T>,
    pub z: DVector<T>,
    pub u: DVector<T>,
}

#[derive(Clone, Debug)]
enum XStep<T: Real> {
    /// `x = S⁻¹(base + ρ·Kᵀ(z − u))` with `S` factored once.
    Linear { solver: SpdSolver<T>, base: DVector<T> },
    /// `x = argmin loss(x) + extra_l2‖x‖² + (ρ/2)‖x − (z − u)‖²`, sample matrix
    /// augmented with a leading column of ones for the bias.
    Logistic { samples: DMatrix<T>, labels: DVector<T>, extra_l2: T },
}

/// One ADMM sweep as a fixed-point map.
///
/// Ridge and regularized logistic regression iterate over `z` only; the
/// other four kinds iterate over the stacked vector `[z; u]`.
#[derive(Clone, Debug)]
pub struct AdmmMap<T: Real> {
    instance: ProblemInstance<T>,
    xstep: XStep<T>,
    /// Length of `z` (and `u`).
    split_dim: usize,
}

/// `Dv` for the forward-difference operator.
fn diff<T: Real>(x: &DVector<T>) -> DVector<T> {
    DVector::from_fn(x.len().saturating_sub(1), |i, _| x[i + 1] - x[i])
}

/// `Dᵀv` for the forward-difference operator.
fn diff_t<T: Real>(v: &DVector<T>) -> DVector<T> {
    let n = v.len() + 1;
    DVector::from_fn(n, |j, _| {
        let left = if j > 0 { v[j - 1] } else { T::zero() };
        let right = if j < n - 1 { v[j] } else { T::zero() };
        left - right
    })
}

/// Numerically stable logistic function.
fn sigmoid<T: Real>(s: T) -> T {
    if s >= T::zero() {
        T::one() / (T::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (T::one() + e)
    }
}

fn with_bias_column<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    let (m, n) = a.shape();
    DMatrix::from_fn(m, n + 1, |i, j| if j == 0 { T::one() } else { a[(i, j - 1)] })
}

impl<T: Real> AdmmMap<T> {
    /// Builds the sweep for a validated instance, factoring the x-step system once.
    pub fn new(instance: ProblemInstance<T>) -> Result<Self> {
        instance.validate()?;
        let rho = instance.penalty_rho;
        let a = &instance.data_matrix;
        let n = instance.cols();
        let normal = |scale: T| {
            let mut s = a.tr_mul(a) * scale;
            for i in 0..n {
                s[(i, i)] += rho;
            }
            s
        };
        let (xstep, split_dim) = match instance.kind {
            ProblemKind::Ridge | ProblemKind::Lasso => {
                let solver = SpdSolver::new(normal(T::one()))?;
                (XStep::Linear { solver, base: a.tr_mul(&instance.rhs) }, n)
            }
            ProblemKind::Nnls => {
                let two = T::lit(2.0);
                let solver = SpdSolver::new(normal(two))?;
                (XStep::Linear { solver, base: a.tr_mul(&instance.rhs) * two }, n)
            }
            ProblemKind::TotalVariation => {
                let mut s = a.tr_mul(a) * rho;
                for i in 0..n {
                    s[(i, i)] += T::one();
                }
                let solver = SpdSolver::new(s)?;
                (XStep::Linear { solver, base: instance.rhs.clone() }, n - 1)
            }
            ProblemKind::RegLogistic | ProblemKind::BoxLogistic => {
                let extra_l2 = if instance.kind == ProblemKind::BoxLogistic {
                    instance.reg_lambda
                } else {
                    T::zero()
                };
                let xs = XStep::Logistic { samples: with_bias_column(a), labels: instance.rhs.clone(), extra_l2 };
                (xs, n + 1)
            }
        };
        Ok(AdmmMap { instance, xstep, split_dim })
    }

    pub fn instance(&self) -> &ProblemInstance<T> {
        &self.instance
    }

    pub fn kind(&self) -> ProblemKind {
        self.instance.kind
    }

    /// Length of the split variable `z`.
    pub fn split_dim(&self) -> usize {
        self.split_dim
    }

    /// Length of the primal variable `x`.
    pub fn primal_dim(&self) -> usize {
        match self.instance.kind {
            ProblemKind::RegLogistic | ProblemKind::BoxLogistic => self.instance.cols() + 1,
            _ => self.instance.cols(),
        }
    }

    /// Zero initial guess.
    pub fn initial_point(&self) -> DVector<T> {
        DVector::zeros(self.dimension())
    }

    fn z_only_dual_scale(&self) -> T {
        T::lit(2.0) * self.instance.reg_lambda / self.instance.penalty_rho
    }

    /// Splits a map argument into `(z, u)`.
    pub fn unpack(&self, v: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
        check_dim(self.dimension(), v)?;
        if self.instance.kind.is_z_only() {
            Ok((v.clone(), v * self.z_only_dual_scale()))
        } else {
            let p = self.split_dim;
            Ok((v.rows(0, p).into_owned(), v.rows(p, p).into_owned()))
        }
    }

    /// The map argument encoding `(z, u)`.
    pub fn pack(&self, z: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        if self.instance.kind.is_z_only() {
            z.clone()
        } else {
            let p = z.len();
            DVector::from_fn(2 * p, |i, _| if i < p { z[i] } else { u[i - p] })
        }
    }

    /// The x-minimization step for given `(z, u)`.
    pub fn x_step(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        let rho = self.instance.penalty_rho;
        let center = z - u;
        match &self.xstep {
            XStep::Linear { solver, base } => {
                let pulled = if self.instance.kind == ProblemKind::TotalVariation {
                    diff_t(&center)
                } else {
                    center
                };
                Ok(solver.solve(&(base + pulled * rho)))
            }
            XStep::Logistic { samples, labels, extra_l2 } => {
                let inv_m = T::one() / T::from_usize_lossy(samples.nrows());
                let two_l2 = T::lit(2.0) * *extra_l2;
                let gradient = |x: &DVector<T>| {
                    let t = samples * x;
                    let w = DVector::from_fn(t.len(), |i, _| -labels[i] * sigmoid(-labels[i] * t[i]));
                    samples.tr_mul(&w) * inv_m + (x - &center) * rho + x * two_l2
                };
                let hessian = |x: &DVector<T>| {
                    let t = samples * x;
                    let mut weighted = samples.clone();
                    for i in 0..t.len() {
                        let p = sigmoid(t[i]);
                        let w = p * (T::one() - p) * inv_m;
                        weighted.row_mut(i).scale_mut(w);
                    }
                    let mut h = samples.tr_mul(&weighted);
                    for i in 0..h.nrows() {
                        h[(i, i)] += rho + two_l2;
                    }
                    h
                };
                let sol = newton_inner_solve(gradient, hessian, &center, T::lit(NEWTON_TOL), NEWTON_MAX_ITER)?;
                Ok(sol.x)
            }
        }
    }

    /// `Kx + u`, the argument of the z-step proximal operator (`K = D` for
    /// total variation, identity otherwise).
    pub fn prox_argument(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        if self.instance.kind == ProblemKind::TotalVariation {
            diff(x) + u
        } else {
            x + u
        }
    }

    /// Threshold of the l1 prox in the z-step (lasso and total variation).
    pub fn prox_threshold(&self) -> Option<T> {
        let inst = &self.instance;
        match inst.kind {
            ProblemKind::Lasso => Some(inst.reg_lambda / inst.penalty_rho),
            ProblemKind::TotalVariation => Some(inst.smoothing_alpha / inst.penalty_rho),
            _ => None,
        }
    }

    /// One full sweep from `(z, u)`: returns `(x_{k+1}, z_{k+1}, u_{k+1})`.
    pub fn sweep(&self, z: &DVector<T>, u: &DVector<T>) -> Result<AdmmState<T>> {
        let inst = &self.instance;
        let rho = inst.penalty_rho;
        let x = self.x_step(z, u)?;
        if inst.kind.is_z_only() {
            let two_lambda = T::lit(2.0) * inst.reg_lambda;
            let z_next = (&x + u) * (rho / (two_lambda + rho));
            let u_next = &z_next * self.z_only_dual_scale();
            return Ok(AdmmState { x, z: z_next, u: u_next });
        }
        let w = self.prox_argument(&x, u);
        let scale = if inst.scaled_projection { T::one() / rho } else { T::one() };
        let z_next = match inst.kind {
            ProblemKind::Lasso | ProblemKind::TotalVariation => {
                prox_l1(&w, self.prox_threshold().expect("l1 kinds have a threshold"))
            }
            ProblemKind::Nnls => project_nonneg(&w) * scale,
            ProblemKind::BoxLogistic => project_box(&w, -T::one(), T::one()) * scale,
            ProblemKind::Ridge | ProblemKind::RegLogistic => unreachable!(),
        };
        let u_next = w - &z_next;
        Ok(AdmmState { x, z: z_next, u: u_next })
    }

    /// Full ADMM state associated with a map argument (for a fixed point:
    /// the optimal triple).
    pub fn state_at(&self, v: &DVector<T>) -> Result<AdmmState<T>> {
        let (z, u) = self.unpack(v)?;
        let x = self.x_step(&z, &u)?;
        Ok(AdmmState { x, z, u })
    }

    /// Inverse of the factored x-step system, for the linear kinds.
    pub(crate) fn x_system_inverse(&self) -> Option<DMatrix<T>> {
        match &self.xstep {
            XStep::Linear { solver, .. } => Some(solver.inverse()),
            XStep::Logistic { .. } => None,
        }
    }

    /// Ridge iteration matrix `M` of `q(z) = Mz + b̂`.
    pub fn ridge_iteration_matrix(&self) -> Result<DMatrix<T>> {
        let XStep::Linear { solver, .. } = &self.xstep else {
            return Err(Error::UnsupportedKind(self.kind().to_string()));
        };
        if self.kind() != ProblemKind::Ridge {
            return Err(Error::UnsupportedKind(self.kind().to_string()));
        }
        let rho = self.instance.penalty_rho;
        let two_lambda = T::lit(2.0) * self.instance.reg_lambda;
        let denom = rho + two_lambda;
        let mut m = solver.inverse() * (rho * (rho - two_lambda) / denom);
        let diag = two_lambda / denom;
        for i in 0..m.nrows() {
            m[(i, i)] += diag;
        }
        Ok(m)
    }

    /// Ridge offset `b̂ = q(0)`.
    pub fn ridge_offset(&self) -> Result<DVector<T>> {
        if self.kind() != ProblemKind::Ridge {
            return Err(Error::UnsupportedKind(self.kind().to_string()));
        }
        self.evaluate(&DVector::zeros(self.dimension()))
    }

    /// Exact ridge minimizer `(AᵀA + 2λI)⁻¹Aᵀb`.
    pub fn ridge_closed_form(&self) -> Result<DVector<T>> {
        if self.kind() != ProblemKind::Ridge {
            return Err(Error::UnsupportedKind(self.kind().to_string()));
        }
        let a = &self.instance.data_matrix;
        let mut s = a.tr_mul(a);
        let two_lambda = T::lit(2.0) * self.instance.reg_lambda;
        for i in 0..s.nrows() {
            s[(i, i)] += two_lambda;
        }
        Ok(SpdSolver::new(s)?.solve(&a.tr_mul(&self.instance.rhs)))
    }
}

/// Primal and dual residuals between consecutive states:
/// `‖Kx_{k+1} − z_{k+1}‖` and `ρ‖Kᵀ(z_{k+1} − z_k)‖`.
pub fn residual_norms<T: Real>(instance: &ProblemInstance<T>, before: &AdmmState<T>, after: &AdmmState<T>) -> (T, T) {
    let dz = &after.z - &before.z;
    if instance.kind == ProblemKind::TotalVariation {
        ((diff(&after.x) - &after.z).norm(), diff_t(&dz).norm() * instance.penalty_rho)
    } else {
        ((&after.x - &after.z).norm(), dz.norm() * instance.penalty_rho)
    }
}

impl<T: Real> FixedPointMap<T> for AdmmMap<T> {
    fn dimension(&self) -> usize {
        if self.instance.kind.is_z_only() {
            self.split_dim
        } else {
            2 * self.split_dim
        }
    }

    fn evaluate(&self, v: &DVector<T>) -> Result<DVector<T>> {
        let (z, u) = self.unpack(v)?;
        let next = self.sweep(&z, &u)?;
        Ok(self.pack(&next.z, &next.u))
    }

    fn evaluate_with_residuals(&self, v: &DVector<T>) -> Result<(DVector<T>, Option<(T, T)>)> {
        let (z, u) = self.unpack(v)?;
        let next = self.sweep(&z, &u)?;
        let before = AdmmState { x: DVector::zeros(0), z, u };
        let res = residual_norms(&self.instance, &before, &next);
        Ok((self.pack(&next.z, &next.u), Some(res)))
    }
}

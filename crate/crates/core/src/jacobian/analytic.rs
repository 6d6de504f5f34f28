use nalgebra::{DMatrix, DVector};

use crate::problems::{AdmmMap, ProblemKind};
use crate::{Error, Real, Result};

/// Distance from the prox threshold below which the Jacobian is undefined.
pub const THRESHOLD_MARGIN: f64 = 1e-10;

/// Piecewise-exact Jacobian of the ADMM sweep at map argument `v`.
///
/// Ridge returns its constant iteration matrix. For lasso and total
/// variation the sweep is affine on each side of the soft-threshold kink:
/// with `G = ∂w/∂z` and `I − G = ∂w/∂u` for the prox argument `w = Kx + u`,
/// a component with `|w_j| > t` copies row `j` of `[G, I − G]` into the
/// `z`-block and leaves the `u`-row zero, and a component with `|w_j| < t`
/// does the opposite.
pub fn analytic_jacobian<T: Real>(map: &AdmmMap<T>, v: &DVector<T>) -> Result<DMatrix<T>> {
    let inst = map.instance();
    match inst.kind {
        ProblemKind::Ridge => return map.ridge_iteration_matrix(),
        ProblemKind::Lasso | ProblemKind::TotalVariation => {}
        kind => return Err(Error::UnsupportedKind(kind.to_string())),
    }
    let rho = inst.penalty_rho;
    let threshold = map.prox_threshold().expect("l1 kinds have a threshold");
    let state = map.state_at(v)?;
    let w = map.prox_argument(&state.x, &state.u);
    let r = map.x_system_inverse().expect("linear x-step");
    let g = if inst.kind == ProblemKind::TotalVariation {
        let d = &inst.data_matrix;
        (d * r * d.transpose()) * rho
    } else {
        r * rho
    };
    let p = map.split_dim();
    let margin = T::lit(THRESHOLD_MARGIN);
    let mut jac = DMatrix::zeros(2 * p, 2 * p);
    for j in 0..p {
        let gap = w[j].abs() - threshold;
        if gap.abs() < margin {
            return Err(Error::NonDifferentiable { index: j, margin: gap.abs().as_f64() });
        }
        let row = if gap > T::zero() { j } else { p + j };
        for c in 0..p {
            let gjc = g[(j, c)];
            jac[(row, c)] = gjc;
            jac[(row, p + c)] = if c == j { T::one() - gjc } else { -gjc };
        }
    }
    Ok(jac)
}

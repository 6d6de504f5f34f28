//! The six benchmark problems as ADMM fixed-point maps.

mod admm;
mod instance;
mod newton;
mod prox;

pub use admm::{residual_norms, AdmmMap, AdmmState};
pub use instance::{generate_instance, GenerateParams, ProblemInstance, ProblemKind};
pub use newton::{newton_inner_solve, NewtonSolution, NEWTON_MAX_ITER, NEWTON_TOL};
pub use prox::{project_box, project_nonneg, prox_l1, soft_threshold};

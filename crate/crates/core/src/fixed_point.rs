//! Fixed-point map contract, the iteration driver shared by every scheme,
//! reference solutions, and observed root-linear convergence factors.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::linalg::{all_finite, dist2};
use crate::{Error, Real, Result};

/// Error norm above which a run is declared divergent.
pub const BLOW_UP_CEILING: f64 = 1e12;

/// Default number of trailing ratios averaged by [`estimate_convergence_factor`].
pub const DEFAULT_WINDOW: usize = 20;

/// One sweep `x ↦ q(x)` of an iterative method on vectors of fixed length.
///
/// Implementations must be deterministic: the same input yields bit-identical
/// output, which the finite-difference Jacobian and the trace-equivalence
/// checks rely on.
pub trait FixedPointMap<T: Real>: Sync {
    fn dimension(&self) -> usize;

    fn evaluate(&self, x: &DVector<T>) -> Result<DVector<T>>;

    /// Evaluates the map and, when the map is an ADMM sweep, also returns the
    /// (primal, dual) residual norms of that sweep.
    fn evaluate_with_residuals(&self, x: &DVector<T>) -> Result<(DVector<T>, Option<(T, T)>)> {
        Ok((self.evaluate(x)?, None))
    }
}

impl<T: Real, M: FixedPointMap<T> + ?Sized> FixedPointMap<T> for &M {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn evaluate(&self, x: &DVector<T>) -> Result<DVector<T>> {
        (**self).evaluate(x)
    }
    fn evaluate_with_residuals(&self, x: &DVector<T>) -> Result<(DVector<T>, Option<(T, T)>)> {
        (**self).evaluate_with_residuals(x)
    }
}

/// Wraps a plain closure as a map.
pub struct FnMap<F> {
    dimension: usize,
    f: F,
}

impl<F> FnMap<F> {
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<T: Real, F> FixedPointMap<T> for FnMap<F>
where
    F: Fn(&DVector<T>) -> DVector<T> + Sync,
{
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn evaluate(&self, x: &DVector<T>) -> Result<DVector<T>> {
        check_dim(self.dimension, x)?;
        Ok((self.f)(x))
    }
}

/// `x ↦ M x + c`.
#[derive(Clone, Debug)]
pub struct AffineMap<T: Real> {
    pub matrix: DMatrix<T>,
    pub offset: DVector<T>,
}

impl<T: Real> AffineMap<T> {
    pub fn new(matrix: DMatrix<T>, offset: DVector<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidParameter("affine map matrix must be square".into()));
        }
        check_dim(matrix.nrows(), &offset)?;
        Ok(Self { matrix, offset })
    }
}

impl<T: Real> FixedPointMap<T> for AffineMap<T> {
    fn dimension(&self) -> usize {
        self.offset.len()
    }
    fn evaluate(&self, x: &DVector<T>) -> Result<DVector<T>> {
        check_dim(self.offset.len(), x)?;
        Ok(&self.matrix * x + &self.offset)
    }
}

pub(crate) fn check_dim<T: Real>(expected: usize, x: &DVector<T>) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: x.len() });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord<T> {
    pub k: usize,
    pub error_norm: T,
    pub primal_residual: Option<T>,
    pub dual_residual: Option<T>,
}

/// Per-iteration history of one solver run.
#[derive(Clone, Debug)]
pub struct IterationTrace<T: Real> {
    pub records: Vec<TraceRecord<T>>,
    pub status: TerminalStatus,
    /// Accuracy floor of the reference the errors were measured against.
    /// Ratios below `100 × floor` are ignored by the factor estimate.
    pub floor: T,
    /// The iterate the run stopped at.
    pub last_iterate: DVector<T>,
}

impl<T: Real> IterationTrace<T> {
    pub fn errors(&self) -> Vec<T> {
        self.records.iter().map(|r| r.error_norm).collect()
    }

    /// Number of map applications performed before stopping.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    /// Builds a trace from a bare error sequence, mainly for tests and replay.
    pub fn from_errors(errors: &[T], floor: T) -> Self {
        Self {
            records: errors
                .iter()
                .enumerate()
                .map(|(k, &e)| TraceRecord { k, error_norm: e, primal_residual: None, dual_residual: None })
                .collect(),
            status: TerminalStatus::MaxIterations,
            floor,
            last_iterate: DVector::zeros(0),
        }
    }

    /// Writes `k,error_norm,primal_residual,dual_residual` rows with 17
    /// significant digits; absent residuals are empty cells.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,error_norm,primal_residual,dual_residual")?;
        for r in &self.records {
            let opt = |v: Option<T>| v.map(|x| format!("{:.16e}", x)).unwrap_or_default();
            writeln!(
                w,
                "{},{:.16e},{},{}",
                r.k,
                r.error_norm,
                opt(r.primal_residual),
                opt(r.dual_residual)
            )?;
        }
        Ok(())
    }
}

/// Parses the CSV written by [`IterationTrace::write_csv`].
pub fn read_trace_csv<T: Real, R: BufRead>(r: R) -> Result<Vec<TraceRecord<T>>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "k,error_norm,primal_residual,dual_residual" {
                return Err(Error::Parse { line: 1, message: format!("unexpected header `{line}`") });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(Error::Parse { line: i + 1, message: "expected 4 cells".into() });
        }
        let bad = |m: &str| Error::Parse { line: i + 1, message: m.to_string() };
        let k = cells[0].parse::<usize>().map_err(|_| bad("bad k"))?;
        let num = |s: &str| -> Result<Option<T>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(|v| Some(T::lit(v))).map_err(|_| bad("bad float"))
            }
        };
        let error_norm = num(cells[1])?.ok_or_else(|| bad("missing error_norm"))?;
        out.push(TraceRecord { k, error_norm, primal_residual: num(cells[2])?, dual_residual: num(cells[3])? });
    }
    Ok(out)
}

/// Stopping and measurement settings for one run.
#[derive(Clone, Debug)]
pub struct RunOptions<T: Real> {
    pub max_iter: usize,
    pub tol: T,
    pub reference: Option<DVector<T>>,
    pub floor: T,
}

impl<T: Real> RunOptions<T> {
    pub fn new(max_iter: usize, tol: T) -> Self {
        Self { max_iter, tol, reference: None, floor: T::zero() }
    }

    pub fn with_reference(mut self, reference: DVector<T>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_floor(mut self, floor: T) -> Self {
        self.floor = floor;
        self
    }
}

/// Produces the next iterate from the current one and its image under the map.
pub trait Stepper<T: Real> {
    fn next(&mut self, x: &DVector<T>, qx: DVector<T>) -> Result<DVector<T>>;
}

/// `x_{k+1} = q(x_k)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlainStep;

impl<T: Real> Stepper<T> for PlainStep {
    fn next(&mut self, _x: &DVector<T>, qx: DVector<T>) -> Result<DVector<T>> {
        Ok(qx)
    }
}

/// Runs `stepper` on `map` from `x0`, recording one trace row per iterate.
///
/// The error column is `‖x_k − reference‖` when a reference is given and the
/// step norm `‖x_{k+1} − x_k‖` otherwise.
pub fn drive<T: Real, M: FixedPointMap<T> + ?Sized, S: Stepper<T> + ?Sized>(
    map: &M,
    x0: &DVector<T>,
    stepper: &mut S,
    opts: &RunOptions<T>,
) -> Result<IterationTrace<T>> {
    let n = map.dimension();
    check_dim(n, x0)?;
    if let Some(r) = &opts.reference {
        check_dim(n, r)?;
    }
    let ceiling = T::lit(BLOW_UP_CEILING);
    let mut records = Vec::new();
    let mut x = x0.clone();
    let mut status = TerminalStatus::MaxIterations;

    for k in 0..=opts.max_iter {
        if !all_finite(&x) {
            status = TerminalStatus::Diverged;
            break;
        }
        let (qx, residuals) = map.evaluate_with_residuals(&x)?;
        if !all_finite(&qx) {
            status = TerminalStatus::Diverged;
            break;
        }
        let error_norm = match &opts.reference {
            Some(r) => dist2(&x, r),
            None => T::zero(),
        };
        let next = stepper.next(&x, qx)?;
        let error_norm = if opts.reference.is_some() { error_norm } else { dist2(&next, &x) };
        if !error_norm.is_finite() {
            status = TerminalStatus::Diverged;
            break;
        }
        records.push(TraceRecord {
            k,
            error_norm,
            primal_residual: residuals.map(|r| r.0),
            dual_residual: residuals.map(|r| r.1),
        });
        if error_norm > ceiling {
            status = TerminalStatus::Diverged;
            break;
        }
        if error_norm <= opts.tol {
            status = TerminalStatus::Converged;
            break;
        }
        if k == opts.max_iter {
            break;
        }
        x = next;
    }
    Ok(IterationTrace { records, status, floor: opts.floor, last_iterate: x })
}

/// Plain fixed-point iteration `x_{k+1} = q(x_k)`.
pub fn iterate<T: Real, M: FixedPointMap<T> + ?Sized>(
    map: &M,
    x0: &DVector<T>,
    max_iter: usize,
    tol: T,
    reference: Option<&DVector<T>>,
) -> Result<IterationTrace<T>> {
    let mut opts = RunOptions::new(max_iter, tol);
    opts.reference = reference.cloned();
    drive(map, x0, &mut PlainStep, &opts)
}

/// Iterates the plain map to (near) machine precision.
///
/// Stops once the step norm is at most `floor_tol` or has not reached a new
/// minimum for 50 consecutive iterations (the rounding floor).
pub fn reference_solution<T: Real, M: FixedPointMap<T> + ?Sized>(
    map: &M,
    x0: &DVector<T>,
    floor_tol: T,
    max_iter: usize,
) -> Result<DVector<T>> {
    if floor_tol <= T::zero() {
        return Err(Error::InvalidParameter("floor_tol must be positive".into()));
    }
    check_dim(map.dimension(), x0)?;
    let ceiling = T::lit(BLOW_UP_CEILING);
    let mut x = x0.clone();
    let mut best = T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
    let mut since_best = 0usize;
    let mut last_step = T::zero();
    for _ in 0..max_iter {
        let qx = map.evaluate(&x)?;
        if !all_finite(&qx) {
            return Err(Error::Diverged { last_step_norm: last_step.as_f64() });
        }
        let step = dist2(&qx, &x);
        if step > ceiling {
            return Err(Error::Diverged { last_step_norm: last_step.as_f64() });
        }
        last_step = step;
        x = qx;
        if step <= floor_tol {
            return Ok(x);
        }
        if step < best {
            best = step;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 50 {
                return Ok(x);
            }
        }
    }
    Err(Error::ReferenceNotReached { iterations: max_iter, step_norm: last_step.as_f64() })
}

/// Observed root-linear convergence factor over the trailing window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceEstimate<T> {
    /// Geometric mean of the trailing ratios `e_{k+1}/e_k`; NaN when unreliable
    /// for lack of data.
    pub factor: T,
    pub window: usize,
    /// Number of ratios actually averaged.
    pub used: usize,
    pub reliable: bool,
    /// Standard deviation of the averaged ratios.
    pub ratio_std: T,
}

/// Ratios `e_{k+1}/e_k` over consecutive records that both sit above
/// `100 × trace.floor`.
pub fn usable_ratios<T: Real>(trace: &IterationTrace<T>) -> Vec<T> {
    let cutoff = T::lit(100.0) * trace.floor;
    trace
        .records
        .windows(2)
        .filter(|w| w[1].k == w[0].k + 1)
        .filter(|w| w[0].error_norm > cutoff && w[1].error_norm > cutoff && w[0].error_norm > T::zero())
        .map(|w| w[1].error_norm / w[0].error_norm)
        .collect()
}

pub fn estimate_convergence_factor<T: Real>(trace: &IterationTrace<T>, window: usize) -> ConvergenceEstimate<T> {
    assert!(window >= 2, "window must be at least 2");
    let ratios = usable_ratios(trace);
    if ratios.is_empty() {
        return ConvergenceEstimate {
            factor: T::lit(f64::NAN),
            window,
            used: 0,
            reliable: false,
            ratio_std: T::lit(f64::NAN),
        };
    }
    let tail = &ratios[ratios.len().saturating_sub(window)..];
    let n = T::from_usize_lossy(tail.len());
    let log_mean = tail.iter().fold(T::zero(), |s, r| s + r.ln()) / n;
    let mean = tail.iter().fold(T::zero(), |s, r| s + *r) / n;
    let var = tail.iter().fold(T::zero(), |s, r| s + (*r - mean) * (*r - mean)) / n;
    ConvergenceEstimate {
        factor: log_mean.exp(),
        window,
        used: tail.len(),
        reliable: tail.len() >= window,
        ratio_std: var.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn identity_converges_immediately() {
        let map = FnMap::new(3, |x: &DVector<f64>| x.clone());
        let x0 = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        let trace = iterate(&map, &x0, 10, 1e-12, None).unwrap();
        assert_eq!(trace.status, TerminalStatus::Converged);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].k, 0);
        assert_eq!(trace.records[0].error_norm, 0.0);
    }

    #[test]
    fn halving_map_errors_are_geometric() {
        let map = FnMap::new(1, |x: &DVector<f64>| x * 0.5);
        let trace = iterate(&map, &scalar(1.0), 10, 1e-300, Some(&scalar(0.0))).unwrap();
        let errs = trace.errors();
        assert_eq!(&errs[..4], &[1.0, 0.5, 0.25, 0.125]);
        let est = estimate_convergence_factor(&trace, 5);
        assert_relative_eq!(est.factor, 0.5, epsilon = 1e-12);
        assert!(est.reliable);
    }

    #[test]
    fn non_finite_iterate_is_divergence() {
        let map = FnMap::new(1, |x: &DVector<f64>| x * 1e300);
        let trace = iterate(&map, &scalar(1.0), 10, 1e-12, Some(&scalar(0.0))).unwrap();
        assert_eq!(trace.status, TerminalStatus::Diverged);
        assert!(trace.records.iter().all(|r| r.error_norm.is_finite()));
    }

    #[test]
    fn blow_up_is_divergence() {
        let map = FnMap::new(1, |x: &DVector<f64>| x * 10.0);
        let trace = iterate(&map, &scalar(1.0), 100, 1e-12, Some(&scalar(0.0))).unwrap();
        assert_eq!(trace.status, TerminalStatus::Diverged);
        assert!(trace.records.last().unwrap().error_norm > BLOW_UP_CEILING);
        assert_eq!(trace.records.len(), 14);
    }

    #[test]
    fn max_iterations_status() {
        let map = FnMap::new(1, |x: &DVector<f64>| x * 0.9);
        let trace = iterate(&map, &scalar(1.0), 5, 1e-12, None).unwrap();
        assert_eq!(trace.status, TerminalStatus::MaxIterations);
        assert_eq!(trace.records.len(), 6);
        assert_eq!(trace.iterations(), 5);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let map = FnMap::new(2, |x: &DVector<f64>| x.clone());
        assert!(matches!(
            iterate(&map, &scalar(1.0), 5, 1e-12, None),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn affine_reference_solution() {
        let map = FnMap::new(1, |x: &DVector<f64>| x * 0.5 + DVector::from_element(1, 1.0));
        let x = reference_solution(&map, &scalar(0.0), 1e-15, 1000).unwrap();
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-13);
    }

    #[test]
    fn reference_solution_reports_divergence() {
        let map = FnMap::new(1, |x: &DVector<f64>| x * 3.0 + DVector::from_element(1, 1.0));
        assert!(matches!(reference_solution(&map, &scalar(0.0), 1e-15, 1000), Err(Error::Diverged { .. })));
    }

    #[test]
    fn estimate_examples() {
        let t = IterationTrace::from_errors(&[1.0, 0.5, 0.25, 0.125], 0.0);
        assert_relative_eq!(estimate_convergence_factor(&t, 3).factor, 0.5, epsilon = 1e-15);
        let t = IterationTrace::from_errors(&[1.0, 0.4, 0.2, 0.1], 0.0);
        assert_relative_eq!(estimate_convergence_factor(&t, 2).factor, 0.5, epsilon = 1e-15);
        let t = IterationTrace::from_errors(&[1.0f64], 0.0);
        let e = estimate_convergence_factor(&t, 2);
        assert!(!e.reliable);
        assert!(e.factor.is_nan());
    }

    #[test]
    fn estimate_skips_floor_region() {
        // Plateau at 1e-14 is rounding noise, not convergence.
        let errs = [1.0, 0.5, 0.25, 0.125, 1e-14, 1e-14, 1e-14];
        let t = IterationTrace::from_errors(&errs, 1e-15);
        let e = estimate_convergence_factor(&t, 3);
        assert_relative_eq!(e.factor, 0.5, epsilon = 1e-14);
        assert!(e.reliable);
    }

    #[test]
    fn csv_round_trip() {
        let mut t = IterationTrace::from_errors(&[1.0, 1.0 / 3.0], 0.0);
        t.records[1].primal_residual = Some(0.1);
        t.records[1].dual_residual = Some(2.0 / 7.0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,error_norm,primal_residual,dual_residual\n0,1.0000000000000000e0,,\n"));
        let back: Vec<TraceRecord<f64>> = read_trace_csv(&buf[..]).unwrap();
        assert_eq!(back, t.records);
    }
}

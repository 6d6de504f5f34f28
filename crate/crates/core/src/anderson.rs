//! Windowed Anderson acceleration `AA(m)` and its stationary variant `sAA(m)`.
//!
//! Both extrapolate from the most recent map evaluations. `AA(m)` re-solves a
//! small least-squares problem for its coefficients every step; `sAA(m)` keeps
//! a fixed coefficient vector for the whole run:
//!
//! ```text
//! AA:   x_{k+1} = q(x_k) + Σ_{i<m_k} β_i^{(k)} (q(x_{k-i}) − q(x_{k-i-1}))
//! sAA:  x_{k+1} = (1 + Σ β_i) q(x_k) − Σ_{i=1..m} β_i q(x_{k-i})
//! ```

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::fixed_point::{check_dim, drive, FixedPointMap, IterationTrace, PlainStep, RunOptions, Stepper};
use crate::linalg::min_norm_lstsq;
use crate::{Error, Real, Result};

/// Relative rank threshold for the coefficient least-squares problem.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct WindowEntry<T: Real> {
    pub x: DVector<T>,
    pub q: DVector<T>,
    /// `x − q(x)`.
    pub r: DVector<T>,
}

/// The last `m + 1` iterates with their map images and residuals, oldest first.
#[derive(Clone, Debug)]
pub struct WindowBuffer<T: Real> {
    capacity: usize,
    entries: VecDeque<WindowEntry<T>>,
}

impl<T: Real> WindowBuffer<T> {
    /// Buffer for window size `m` (holds up to `m + 1` entries).
    pub fn new(m: usize) -> Self {
        Self { capacity: m + 1, entries: VecDeque::with_capacity(m + 1) }
    }

    pub fn window(&self) -> usize {
        self.capacity - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pushes `(x_k, q(x_k))`, evicting the oldest entry when full.
    pub fn push(&mut self, x: DVector<T>, q: DVector<T>) -> Result<()> {
        check_dim(x.len(), &q)?;
        if let Some(first) = self.entries.front() {
            check_dim(first.x.len(), &x)?;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        let r = &x - &q;
        self.entries.push_back(WindowEntry { x, q, r });
        Ok(())
    }

    /// Entry `i` steps back from the newest (`back(0)` is the current iterate).
    pub fn back(&self, i: usize) -> &WindowEntry<T> {
        &self.entries[self.entries.len() - 1 - i]
    }

    fn check_consistent(&self) -> Result<()> {
        let n = self.back(0).x.len();
        for e in &self.entries {
            check_dim(n, &e.x)?;
            check_dim(n, &e.q)?;
        }
        Ok(())
    }
}

/// Coefficients `β_0..β_{m_k−1}` minimizing
/// `‖r(x_k) + Σ β_i (r(x_{k−i}) − r(x_{k−i−1}))‖₂`, minimum-norm when the
/// residual differences are rank deficient.
pub fn aa_coefficients<T: Real>(buffer: &WindowBuffer<T>) -> Result<Vec<T>> {
    if buffer.len() < 2 {
        return Err(Error::InvalidParameter("AA coefficients need at least two buffered iterates".into()));
    }
    buffer.check_consistent()?;
    let mk = buffer.len() - 1;
    let n = buffer.back(0).r.len();
    let mut diffs = DMatrix::<T>::zeros(n, mk);
    for i in 0..mk {
        let col = &buffer.back(i).r - &buffer.back(i + 1).r;
        diffs.set_column(i, &col);
    }
    let rhs = -&buffer.back(0).r;
    Ok(min_norm_lstsq(&diffs, &rhs, T::lit(RANK_TOL)).iter().copied().collect())
}

/// One `AA` step from the buffered history; with a single entry this is the
/// plain step `q(x_k)`.
pub fn aa_step<T: Real>(buffer: &WindowBuffer<T>) -> Result<DVector<T>> {
    if buffer.is_empty() {
        return Err(Error::InvalidParameter("AA step needs a non-empty buffer".into()));
    }
    if buffer.len() == 1 {
        return Ok(buffer.back(0).q.clone());
    }
    let beta = aa_coefficients(buffer)?;
    let mut out = buffer.back(0).q.clone();
    for (i, b) in beta.iter().enumerate() {
        out += (&buffer.back(i).q - &buffer.back(i + 1).q) * *b;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    LowerBoundOnly,
    GridSweep,
    UserSupplied,
}

/// Fixed coefficients for `sAA(m)` and the factor they are predicted to give.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaaPlan<T> {
    pub m: usize,
    pub beta: Vec<T>,
    pub predicted_factor: T,
    pub provenance: Provenance,
}

impl<T: Real> SaaPlan<T> {
    pub fn new(beta: Vec<T>, predicted_factor: T, provenance: Provenance) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidParameter("sAA window must be at least 1".into()));
        }
        Ok(Self { m: beta.len(), beta, predicted_factor, provenance })
    }

    pub fn user(beta: Vec<T>) -> Result<Self> {
        Self::new(beta, T::lit(f64::NAN), Provenance::UserSupplied)
    }
}

/// One `sAA(m)` step. While fewer than `m` previous iterates exist the window
/// is truncated to the available history, using the leading coefficients.
pub fn saa_step<T: Real>(buffer: &WindowBuffer<T>, plan: &SaaPlan<T>) -> Result<DVector<T>> {
    if buffer.is_empty() {
        return Err(Error::InvalidParameter("sAA step needs a non-empty buffer".into()));
    }
    buffer.check_consistent()?;
    let h = plan.m.min(buffer.len() - 1);
    let active = &plan.beta[..h];
    let lead = T::one() + active.iter().fold(T::zero(), |s, b| s + *b);
    let mut out = &buffer.back(0).q * lead;
    for (i, b) in active.iter().enumerate() {
        out -= &buffer.back(i + 1).q * *b;
    }
    Ok(out)
}

pub struct AaStepper<T: Real> {
    buffer: WindowBuffer<T>,
}

impl<T: Real> AaStepper<T> {
    pub fn new(m: usize) -> Self {
        Self { buffer: WindowBuffer::new(m) }
    }
}

impl<T: Real> Stepper<T> for AaStepper<T> {
    fn next(&mut self, x: &DVector<T>, qx: DVector<T>) -> Result<DVector<T>> {
        if self.buffer.window() == 0 {
            return Ok(qx);
        }
        self.buffer.push(x.clone(), qx)?;
        aa_step(&self.buffer)
    }
}

pub struct SaaStepper<T: Real> {
    plan: SaaPlan<T>,
    buffer: WindowBuffer<T>,
}

impl<T: Real> SaaStepper<T> {
    pub fn new(plan: SaaPlan<T>) -> Self {
        let buffer = WindowBuffer::new(plan.m);
        Self { plan, buffer }
    }
}

impl<T: Real> Stepper<T> for SaaStepper<T> {
    fn next(&mut self, x: &DVector<T>, qx: DVector<T>) -> Result<DVector<T>> {
        self.buffer.push(x.clone(), qx)?;
        saa_step(&self.buffer, &self.plan)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scheme<T> {
    Plain,
    Aa { m: usize },
    Saa(SaaPlan<T>),
}

impl<T: Real> Scheme<T> {
    pub fn label(&self) -> String {
        match self {
            Scheme::Plain => "plain".to_string(),
            Scheme::Aa { m } => format!("AA({m})"),
            Scheme::Saa(p) => format!("sAA({})", p.m),
        }
    }
}

/// Runs `scheme` on `map`, producing a trace in the same format as
/// [`crate::fixed_point::iterate`].
pub fn run_accelerated<T: Real, M: FixedPointMap<T> + ?Sized>(
    map: &M,
    x0: &DVector<T>,
    scheme: &Scheme<T>,
    opts: &RunOptions<T>,
) -> Result<IterationTrace<T>> {
    match scheme {
        Scheme::Plain => drive(map, x0, &mut PlainStep, opts),
        Scheme::Aa { m } => drive(map, x0, &mut AaStepper::new(*m), opts),
        Scheme::Saa(plan) => drive(map, x0, &mut SaaStepper::new(plan.clone()), opts),
    }
}

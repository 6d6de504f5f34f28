use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Fraction of logistic labels flipped by the synthetic generator.
const LABEL_FLIP_RATE: f64 = 0.1;
/// Total-variation smoothing weight as a multiple of `‖y‖∞`.
const TV_ALPHA_SCALE: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Ridge,
    RegLogistic,
    TotalVariation,
    Lasso,
    Nnls,
    BoxLogistic,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 6] = [
        ProblemKind::Ridge,
        ProblemKind::RegLogistic,
        ProblemKind::TotalVariation,
        ProblemKind::Lasso,
        ProblemKind::Nnls,
        ProblemKind::BoxLogistic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Ridge => "ridge",
            ProblemKind::RegLogistic => "reg_logistic",
            ProblemKind::TotalVariation => "total_variation",
            ProblemKind::Lasso => "lasso",
            ProblemKind::Nnls => "nnls",
            ProblemKind::BoxLogistic => "box_logistic",
        }
    }

    /// Whether the ADMM map runs over `z` alone (`u` is a multiple of `z`).
    pub fn is_z_only(self) -> bool {
        matches!(self, ProblemKind::Ridge | ProblemKind::RegLogistic)
    }

    pub fn is_logistic(self) -> bool {
        matches!(self, ProblemKind::RegLogistic | ProblemKind::BoxLogistic)
    }

    /// Default finite-difference step for the Jacobian at the fixed point.
    pub fn default_fd_step(self) -> f64 {
        match self {
            ProblemKind::RegLogistic => 1e-4,
            ProblemKind::TotalVariation => 1e-5,
            _ => 1e-3,
        }
    }

    /// Default `(rows, cols)`. For total variation `cols` is the signal length.
    pub fn default_dims(self) -> (usize, usize) {
        match self {
            ProblemKind::Ridge | ProblemKind::Lasso | ProblemKind::Nnls => (150, 300),
            ProblemKind::RegLogistic | ProblemKind::BoxLogistic => (200, 50),
            ProblemKind::TotalVariation => (999, 1000),
        }
    }

    pub fn default_density(self) -> f64 {
        match self {
            ProblemKind::Ridge | ProblemKind::Lasso | ProblemKind::Nnls => 0.001,
            _ => 1.0,
        }
    }

    pub fn default_params(self) -> GenerateParams {
        let (lambda, rho) = match self {
            ProblemKind::Ridge | ProblemKind::Lasso => (1.0, 10.0),
            ProblemKind::RegLogistic | ProblemKind::BoxLogistic => (2.0, 10.0),
            ProblemKind::TotalVariation => (0.0, 10.0),
            ProblemKind::Nnls => (0.0, 2.0),
        };
        GenerateParams { lambda, rho, alpha: None, scaled_projection: false }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown problem kind `{s}`")))
    }
}

/// Scalar parameters for [`generate_instance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub lambda: f64,
    pub rho: f64,
    /// Total-variation weight; `None` means `0.001·‖y‖∞`.
    pub alpha: Option<f64>,
    /// Use `z = (1/ρ)Π(x+u)` instead of the projection for nnls and box-logistic.
    pub scaled_projection: bool,
}

/// Data and parameters of one benchmark problem.
///
/// `data_matrix` is `A` (ridge, lasso), `F` (nnls), the sample matrix
/// (logistic kinds, one sample per row) or the forward-difference operator
/// `D` (total variation). `rhs` holds `b`, `g`, the ±1 labels or the signal `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance<T: Real> {
    pub kind: ProblemKind,
    pub data_matrix: DMatrix<T>,
    pub rhs: DVector<T>,
    pub reg_lambda: T,
    pub smoothing_alpha: T,
    pub penalty_rho: T,
    pub seed: u64,
    pub density: f64,
    pub scaled_projection: bool,
}

/// Forward-difference operator: `(Dx)_i = x_{i+1} − x_i`, shape `(n−1)×n`.
pub(crate) fn difference_operator<T: Real>(n: usize) -> DMatrix<T> {
    let mut d = DMatrix::zeros(n.saturating_sub(1), n);
    for i in 0..n.saturating_sub(1) {
        d[(i, i)] = -T::one();
        d[(i, i + 1)] = T::one();
    }
    d
}

impl<T: Real> ProblemInstance<T> {
    /// The one-dimensional lasso `|x| + ½x²` (A = [1], b = [0], λ = 1).
    pub fn scalar_l1_demo(rho: T) -> Self {
        ProblemInstance {
            kind: ProblemKind::Lasso,
            data_matrix: DMatrix::from_element(1, 1, T::one()),
            rhs: DVector::zeros(1),
            reg_lambda: T::one(),
            smoothing_alpha: T::zero(),
            penalty_rho: rho,
            seed: 0,
            density: 1.0,
            scaled_projection: false,
        }
    }

    pub fn rows(&self) -> usize {
        self.data_matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data_matrix.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.penalty_rho > T::zero()) || !self.penalty_rho.is_finite() {
            return bad(format!("penalty rho must be positive, got {}", self.penalty_rho));
        }
        if !(self.reg_lambda >= T::zero()) || !self.reg_lambda.is_finite() {
            return bad(format!("lambda must be nonnegative, got {}", self.reg_lambda));
        }
        if !(self.smoothing_alpha >= T::zero()) || !self.smoothing_alpha.is_finite() {
            return bad(format!("alpha must be nonnegative, got {}", self.smoothing_alpha));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density must lie in (0, 1], got {}", self.density));
        }
        let (m, n) = self.data_matrix.shape();
        if m == 0 || n == 0 {
            return bad("empty data matrix".into());
        }
        if self.data_matrix.iter().chain(self.rhs.iter()).any(|v| !v.is_finite()) {
            return bad("non-finite entry in problem data".into());
        }
        match self.kind {
            ProblemKind::TotalVariation => {
                if m + 1 != n || self.data_matrix != difference_operator(n) {
                    return bad(format!("total variation needs the (n-1)x n difference operator, got {m}x{n}"));
                }
                if self.rhs.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: self.rhs.len() });
                }
                if !(self.smoothing_alpha > T::zero()) {
                    return bad("total variation needs alpha > 0".into());
                }
            }
            kind => {
                if self.rhs.len() != m {
                    return Err(Error::DimensionMismatch { expected: m, found: self.rhs.len() });
                }
                if kind == ProblemKind::Lasso && !(self.reg_lambda > T::zero()) {
                    return bad("lasso needs lambda > 0".into());
                }
                if kind.is_logistic() && self.rhs.iter().any(|&y| y != T::one() && y != -T::one()) {
                    return bad("logistic labels must be +1 or -1".into());
                }
            }
        }
        Ok(())
    }

    /// Writes the instance in the text persistence format (see `write_text`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Text persistence format:
    ///
    /// ```text
    /// # aa-admm instance
    /// format = 1
    /// kind = lasso
    /// rows = 150
    /// cols = 300
    /// seed = 7
    /// density = 1.0000000000000000e-3
    /// lambda = 1.0000000000000000e0
    /// alpha = 0.0000000000000000e0
    /// rho = 1.0000000000000000e1
    /// scaled_projection = false
    /// matrix coordinate 45        (or: matrix dense, then one row per line)
    /// 12 207 5.1234000000000000e-1
    /// ...
    /// rhs 150
    /// 3.2000000000000000e-1
    /// ...
    /// end
    /// ```
    ///
    /// Indices are zero-based; floats carry 17 significant digits so `f64`
    /// data round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (m, n) = self.data_matrix.shape();
        let _ = writeln!(s, "# aa-admm instance");
        let _ = writeln!(s, "format = 1");
        let _ = writeln!(s, "kind = {}", self.kind);
        let _ = writeln!(s, "rows = {m}");
        let _ = writeln!(s, "cols = {n}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "density = {:.16e}", self.density);
        let _ = writeln!(s, "lambda = {:.16e}", self.reg_lambda.as_f64());
        let _ = writeln!(s, "alpha = {:.16e}", self.smoothing_alpha.as_f64());
        let _ = writeln!(s, "rho = {:.16e}", self.penalty_rho.as_f64());
        let _ = writeln!(s, "scaled_projection = {}", self.scaled_projection);
        let nnz = self.data_matrix.iter().filter(|v| **v != T::zero()).count();
        if 2 * nnz < m * n {
            let _ = writeln!(s, "matrix coordinate {nnz}");
            for i in 0..m {
                for j in 0..n {
                    let v = self.data_matrix[(i, j)];
                    if v != T::zero() {
                        let _ = writeln!(s, "{i} {j} {:.16e}", v.as_f64());
                    }
                }
            }
        } else {
            let _ = writeln!(s, "matrix dense");
            for i in 0..m {
                let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", self.data_matrix[(i, j)].as_f64())).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        let _ = writeln!(s, "rhs {}", self.rhs.len());
        for v in self.rhs.iter() {
            let _ = writeln!(s, "{:.16e}", v.as_f64());
        }
        let _ = writeln!(s, "end");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line: usize, message: String| Error::Parse { line, message };
        fn num<V: FromStr>(line: usize, tok: &str) -> Result<V> {
            tok.parse().map_err(|_| Error::Parse { line, message: format!("bad number `{tok}`") })
        }

        let mut header = std::collections::BTreeMap::new();
        let (mline, mhead) = loop {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "missing matrix block".into()))?;
            if l.starts_with("matrix") {
                break (ln, l);
            }
            let (k, v) = l.split_once('=').ok_or_else(|| perr(ln, format!("expected `key = value`, got `{l}`")))?;
            let key = k.trim().to_string();
            if header.insert(key.clone(), (ln, v.trim().to_string())).is_some() {
                return Err(perr(ln, format!("duplicate key `{key}`")));
            }
        };
        let mut take = |key: &str| header.remove(key).ok_or_else(|| perr(mline, format!("missing key `{key}`")));
        let (ln, format) = take("format")?;
        if format != "1" {
            return Err(perr(ln, format!("unsupported format `{format}`")));
        }
        let (ln, kind) = take("kind")?;
        let kind: ProblemKind = kind.parse().map_err(|e: Error| perr(ln, e.to_string()))?;
        let (ln, v) = take("rows")?;
        let m: usize = num(ln, &v)?;
        let (ln, v) = take("cols")?;
        let n: usize = num(ln, &v)?;
        let (ln, v) = take("seed")?;
        let seed: u64 = num(ln, &v)?;
        let (ln, v) = take("density")?;
        let density: f64 = num(ln, &v)?;
        let (ln, v) = take("lambda")?;
        let lambda: f64 = num(ln, &v)?;
        let (ln, v) = take("alpha")?;
        let alpha: f64 = num(ln, &v)?;
        let (ln, v) = take("rho")?;
        let rho: f64 = num(ln, &v)?;
        let (ln, v) = take("scaled_projection")?;
        let scaled_projection: bool = v.parse().map_err(|_| perr(ln, format!("bad bool `{v}`")))?;
        if let Some((key, (ln, _))) = header.into_iter().next() {
            return Err(perr(ln, format!("unknown key `{key}`")));
        }

        let mut data = DMatrix::<T>::zeros(m, n);
        let parts: Vec<&str> = mhead.split_whitespace().collect();
        match parts.as_slice() {
            ["matrix", "coordinate", count] => {
                let count: usize = num(mline, count)?;
                for _ in 0..count {
                    let (ln, l) = lines.next().ok_or_else(|| perr(mline, "truncated matrix block".into()))?;
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    if toks.len() != 3 {
                        return Err(perr(ln, "expected `row col value`".into()));
                    }
                    let (i, j): (usize, usize) = (num(ln, toks[0])?, num(ln, toks[1])?);
                    if i >= m || j >= n {
                        return Err(perr(ln, format!("index ({i}, {j}) outside {m}x{n}")));
                    }
                    data[(i, j)] = T::lit(num(ln, toks[2])?);
                }
            }
            ["matrix", "dense"] => {
                for i in 0..m {
                    let (ln, l) = lines.next().ok_or_else(|| perr(mline, "truncated matrix block".into()))?;
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    if toks.len() != n {
                        return Err(perr(ln, format!("expected {n} values, got {}", toks.len())));
                    }
                    for (j, t) in toks.iter().enumerate() {
                        data[(i, j)] = T::lit(num(ln, t)?);
                    }
                }
            }
            _ => return Err(perr(mline, format!("bad matrix header `{mhead}`"))),
        }
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "missing rhs block".into()))?;
        let len: usize = match l.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["rhs", len] => num(ln, len)?,
            _ => return Err(perr(ln, format!("expected `rhs <len>`, got `{l}`"))),
        };
        let mut rhs = DVector::<T>::zeros(len);
        for k in 0..len {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated rhs block".into()))?;
            rhs[k] = T::lit(num(ln, l)?);
        }
        match lines.next() {
            Some((_, "end")) => {}
            Some((ln, l)) => return Err(perr(ln, format!("expected `end`, got `{l}`"))),
            None => return Err(perr(0, "missing `end`".into())),
        }
        if let Some((ln, _)) = lines.next() {
            return Err(perr(ln, "trailing content after `end`".into()));
        }
        let inst = ProblemInstance {
            kind,
            data_matrix: data,
            rhs,
            reg_lambda: T::lit(lambda),
            smoothing_alpha: T::lit(alpha),
            penalty_rho: T::lit(rho),
            seed,
            density,
            scaled_projection,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// `round(density·m·n)` distinct positions filled by `draw`, row-major order
/// of the sampled positions.
fn sparse_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64, mut draw: impl FnMut(&mut ChaCha8Rng) -> f64) -> DMatrix<f64> {
    let total = m * n;
    let k = ((density * total as f64).round() as usize).min(total);
    let mut positions = index::sample(rng, total, k).into_vec();
    positions.sort_unstable();
    let mut a = DMatrix::zeros(m, n);
    for p in positions {
        a[(p / n, p % n)] = draw(rng);
    }
    a
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Seeded synthetic data for one problem kind.
///
/// `m × n` is the data-matrix shape; for total variation `n` is the signal
/// length and `m` must be `n − 1` (or 0). Logistic kinds draw a dense
/// standard-normal sample matrix, a random hyperplane with offset, and flip
/// 10% of the resulting ±1 labels; `density` is ignored for them and recorded as 1.
pub fn generate_instance<T: Real>(
    kind: ProblemKind,
    m: usize,
    n: usize,
    density: f64,
    seed: u64,
    params: &GenerateParams,
) -> Result<ProblemInstance<T>> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!("density must lie in (0, 1], got {density}")));
    }
    if n == 0 || (m == 0 && kind != ProblemKind::TotalVariation) {
        return Err(Error::InvalidParameter(format!("invalid dimensions {m}x{n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, rhs, alpha, density) = match kind {
        ProblemKind::Ridge | ProblemKind::Nnls => {
            let a = sparse_matrix(&mut rng, m, n, density, normal);
            let b = DVector::from_fn(m, |_, _| normal(&mut rng));
            (a, b, 0.0, density)
        }
        ProblemKind::Lasso => {
            let a = sparse_matrix(&mut rng, m, n, density, |r| r.random::<f64>());
            let b = DVector::from_fn(m, |_, _| normal(&mut rng));
            (a, b, 0.0, density)
        }
        ProblemKind::TotalVariation => {
            if n < 2 || (m != 0 && m + 1 != n) {
                return Err(Error::InvalidParameter(format!(
                    "total variation uses an (n-1)x n operator; got {m}x{n}"
                )));
            }
            let y = DVector::from_fn(n, |_, _| normal(&mut rng));
            let alpha = params.alpha.unwrap_or(TV_ALPHA_SCALE * y.amax());
            (difference_operator(n), y, alpha, 1.0)
        }
        ProblemKind::RegLogistic | ProblemKind::BoxLogistic => {
            let a = DMatrix::from_fn(m, n, |_, _| normal(&mut rng));
            let w = DVector::from_fn(n, |_, _| normal(&mut rng));
            let offset = normal(&mut rng);
            let margins = &a * &w;
            let labels = DVector::from_fn(m, |i, _| {
                let y = if margins[i] + offset >= 0.0 { 1.0 } else { -1.0 };
                if rng.random::<f64>() < LABEL_FLIP_RATE { -y } else { y }
            });
            (a, labels, 0.0, 1.0)
        }
    };
    let inst = ProblemInstance {
        kind,
        data_matrix: a.map(T::lit),
        rhs: rhs.map(T::lit),
        reg_lambda: T::lit(params.lambda),
        smoothing_alpha: T::lit(alpha),
        penalty_rho: T::lit(params.rho),
        seed,
        density,
        scaled_projection: params.scaled_projection,
    };
    inst.validate()?;
    Ok(inst)
}

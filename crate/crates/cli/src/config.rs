//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 1
//! output_dir = "out/ridge"
//! max_iter = 5000
//! tol = 1e-10
//! schemes = ["plain", "aa1", "aa2", "saa1:theory", "saa2:sweep", "saa2:0.7,-0.1"]
//!
//! [problem]
//! kind = "ridge"          # ridge | reg_logistic | total_variation | lasso | nnls | box_logistic
//! rows = 150              # optional, per-kind default
//! cols = 300
//! density = 0.001
//! lambda = 1.0
//! rho = 10.0
//! # alpha = 0.05          # total variation only; default 0.001·‖y‖∞
//! # scaled_projection = false
//! # instance = "ridge.txt"   # load instead of generating
//!
//! [sweep]
//! lo = -1.0
//! hi = 1.0
//! step = 0.05             # m ≤ 2
//! step_m3 = 0.1           # m ≥ 3
//! refine = true           # second, finer pass around the coarse m ≥ 3 optimum
//! refine_radius = 0.1
//! refine_step = 0.01
//! ```
//!
//! Every table rejects unknown keys.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use aa_admm::problems::{GenerateParams, ProblemKind};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Stage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub problem: ProblemConfig,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeSpec>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Runs stop once `‖x_k − x*‖` drops to this value.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Finite-difference step; defaults per problem kind.
    #[serde(default)]
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub jacobian: JacobianSource,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Number of trailing error ratios averaged into the measured factor.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Relative imaginary-part tolerance used to call an eigenvalue real.
    #[serde(default = "default_imag_tolerance")]
    pub imag_tolerance: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: Option<ProblemKind>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub density: Option<f64>,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(default)]
    pub scaled_projection: bool,
    /// Instance file to load instead of generating one.
    pub instance: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianSource {
    /// Ridge uses its iteration matrix, everything else finite differences.
    #[default]
    Auto,
    Fd,
    Analytic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub step_m3: f64,
    pub refine: bool,
    pub refine_radius: f64,
    pub refine_step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { lo: -1.0, hi: 1.0, step: 0.05, step_m3: 0.1, refine: true, refine_radius: 0.1, refine_step: 0.01 }
    }
}

/// Where an `sAA(m)` scheme takes its coefficients from.
#[derive(Clone, Debug, PartialEq)]
pub enum BetaSource {
    Theory,
    Sweep,
    Explicit(Vec<f64>),
}

/// One scheme to run. Written `plain`, `aa<m>`, or `saa<m>:<source>` where
/// the source is `theory`, `sweep` or a comma-separated coefficient list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchemeSpec {
    Plain,
    Aa(usize),
    Saa(usize, BetaSource),
}

impl SchemeSpec {
    pub fn label(&self) -> String {
        match self {
            SchemeSpec::Plain => "plain".into(),
            SchemeSpec::Aa(m) => format!("AA({m})"),
            SchemeSpec::Saa(m, _) => format!("sAA({m})"),
        }
    }

    /// File-name friendly form of the label.
    pub fn slug(&self) -> String {
        match self {
            SchemeSpec::Plain => "plain".into(),
            SchemeSpec::Aa(m) => format!("aa{m}"),
            SchemeSpec::Saa(m, BetaSource::Theory) => format!("saa{m}_theory"),
            SchemeSpec::Saa(m, BetaSource::Sweep) => format!("saa{m}_sweep"),
            SchemeSpec::Saa(m, BetaSource::Explicit(_)) => format!("saa{m}_explicit"),
        }
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::Plain => f.write_str("plain"),
            SchemeSpec::Aa(m) => write!(f, "aa{m}"),
            SchemeSpec::Saa(m, BetaSource::Theory) => write!(f, "saa{m}:theory"),
            SchemeSpec::Saa(m, BetaSource::Sweep) => write!(f, "saa{m}:sweep"),
            SchemeSpec::Saa(m, BetaSource::Explicit(b)) => {
                let list: Vec<String> = b.iter().map(|v| v.to_string()).collect();
                write!(f, "saa{m}:{}", list.join(","))
            }
        }
    }
}

impl FromStr for SchemeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "plain" {
            return Ok(SchemeSpec::Plain);
        }
        let window = |digits: &str| digits.parse::<usize>().map_err(|_| format!("bad window size in scheme `{s}`"));
        if let Some(rest) = s.strip_prefix("saa") {
            let (m, source) = rest.split_once(':').ok_or_else(|| format!("scheme `{s}` needs a coefficient source, e.g. `saa1:theory`"))?;
            let m = window(m)?;
            if m == 0 {
                return Err("sAA needs a window of at least 1".into());
            }
            let source = match source {
                "theory" => BetaSource::Theory,
                "sweep" => BetaSource::Sweep,
                list => {
                    let beta = list
                        .split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad coefficient `{v}` in scheme `{s}`")))
                        .collect::<Result<Vec<_>, _>>()?;
                    if beta.len() != m {
                        return Err(format!("scheme `{s}` lists {} coefficients for window {m}", beta.len()));
                    }
                    BetaSource::Explicit(beta)
                }
            };
            return Ok(SchemeSpec::Saa(m, source));
        }
        if let Some(m) = s.strip_prefix("aa") {
            return Ok(SchemeSpec::Aa(window(m)?));
        }
        Err(format!("unknown scheme `{s}` (expected plain, aa<m> or saa<m>:<source>)"))
    }
}

impl TryFrom<String> for SchemeSpec {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<SchemeSpec> for String {
    fn from(s: SchemeSpec) -> String {
        s.to_string()
    }
}

pub fn default_schemes() -> Vec<SchemeSpec> {
    ["plain", "aa1", "aa2", "aa3", "saa1:theory", "saa2:sweep", "saa3:sweep"]
        .iter()
        .map(|s| s.parse().expect("built-in scheme list parses"))
        .collect()
}

fn default_max_iter() -> usize {
    5000
}

fn default_tol() -> f64 {
    1e-10
}

fn default_window() -> usize {
    20
}

fn default_imag_tolerance() -> f64 {
    aa_admm::jacobian::DEFAULT_IMAG_TOLERANCE
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Problem size and parameters with per-kind defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedProblem {
    pub kind: ProblemKind,
    pub rows: usize,
    pub cols: usize,
    pub density: f64,
    pub params: GenerateParams,
}

impl ProblemConfig {
    pub fn for_kind(kind: ProblemKind) -> Self {
        Self { kind: Some(kind), ..Self::default() }
    }

    pub fn resolve(&self) -> Result<ResolvedProblem, PipelineError> {
        let kind = self.kind.ok_or_else(|| PipelineError::new(Stage::Config, "problem.kind is required"))?;
        let (rows, cols) = kind.default_dims();
        let defaults = kind.default_params();
        let cols = self.cols.unwrap_or(cols);
        // Total variation has one difference row fewer than the signal length.
        let rows = match (kind, self.rows) {
            (ProblemKind::TotalVariation, None) => cols.saturating_sub(1),
            (_, r) => r.unwrap_or(rows),
        };
        Ok(ResolvedProblem {
            kind,
            rows,
            cols,
            density: self.density.unwrap_or(kind.default_density()),
            params: GenerateParams {
                lambda: self.lambda.unwrap_or(defaults.lambda),
                rho: self.rho.unwrap_or(defaults.rho),
                alpha: self.alpha,
                scaled_projection: self.scaled_projection,
            },
        })
    }
}

impl ExperimentConfig {
    /// Default experiment for one problem kind.
    pub fn for_kind(kind: ProblemKind, seed: u64) -> Self {
        Self {
            seed,
            problem: ProblemConfig::for_kind(kind),
            schemes: default_schemes(),
            max_iter: default_max_iter(),
            tol: default_tol(),
            fd_step: None,
            jacobian: JacobianSource::Auto,
            sweep: SweepConfig::default(),
            window: default_window(),
            imag_tolerance: default_imag_tolerance(),
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::new(Stage::Config, e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::new(Stage::Config, format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that can be checked before any numerical work.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::new(Stage::Config, msg));
        self.problem.resolve()?;
        if self.schemes.is_empty() {
            return bad("at least one scheme is required".into());
        }
        for s in &self.schemes {
            if let SchemeSpec::Saa(m, BetaSource::Theory) = s {
                if *m != 1 {
                    return bad(format!("closed-form coefficients exist only for sAA(1), not `{s}`; use `saa{m}:sweep`"));
                }
            }
        }
        let mut slugs: Vec<String> = self.schemes.iter().map(SchemeSpec::slug).collect();
        slugs.sort();
        if slugs.windows(2).any(|w| w[0] == w[1]) {
            return bad("scheme list contains duplicates".into());
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be nonnegative, got {}", self.tol));
        }
        if let Some(h) = self.fd_step {
            if !(h > 0.0) {
                return bad(format!("fd_step must be positive, got {h}"));
            }
        }
        if self.window < 2 {
            return bad("window must be at least 2".into());
        }
        let s = &self.sweep;
        if !(s.step > 0.0 && s.step_m3 > 0.0 && s.lo <= s.hi) || (s.refine && !(s.refine_step > 0.0 && s.refine_radius > 0.0)) {
            return bad("sweep grid needs lo <= hi and positive steps".into());
        }
        Ok(())
    }
}

use std::path::Path;

use aa_admm::anderson::Provenance;
use aa_admm::fixed_point::TerminalStatus;
use aa_admm::jacobian::Classification;
use aa_admm::problems::ProblemKind;
use aa_admm::theory::OptimalSaaResult;
use serde::{Deserialize, Serialize};

use crate::error::{AtStage, PipelineError, Stage};

/// Structured record of one experiment, written as `summary.json`.
///
/// File names are relative to the directory holding the summary. A summary
/// with `error` set was written by a run that aborted at that stage; the
/// fields for later stages are then empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: ProblemSummary,
    pub config_file: String,
    pub instance_file: Option<String>,
    pub reference: Option<ReferenceSummary>,
    pub jacobian: Option<JacobianSummary>,
    pub spectrum: Option<SpectrumSummary>,
    /// Closed-form (or lower-bound) `sAA(1)` coefficient for the spectrum.
    pub theory: Option<OptimalSaaResult<f64>>,
    pub sweeps: Vec<SweepSummary>,
    pub schemes: Vec<SchemeSummary>,
    /// Warnings about how far the predictions can be trusted.
    pub caveats: Vec<String>,
    pub plot_script: Option<String>,
    pub error: Option<PipelineError>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub kind: ProblemKind,
    pub rows: usize,
    pub cols: usize,
    pub density: f64,
    pub seed: u64,
    pub lambda: f64,
    pub rho: f64,
    pub alpha: f64,
    pub scaled_projection: bool,
    /// Length of the fixed-point vector.
    pub dimension: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub norm: f64,
    /// Ratios of errors below `100 × floor` are left out of measured factors.
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianSummary {
    /// `analytic` or `finite_difference`.
    pub source: String,
    pub fd_step: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub rho_q: f64,
    pub classification: Classification<f64>,
    pub imag_tolerance: f64,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub m: usize,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Set when a finer pass ran around the coarse optimum.
    pub refined: Option<Refinement>,
    pub beta: Vec<f64>,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub radius: f64,
    pub step: f64,
    pub coarse_beta: Vec<f64>,
    pub coarse_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    /// Config spelling, e.g. `saa1:theory`.
    pub spec: String,
    pub label: String,
    pub m: usize,
    pub beta: Option<Vec<f64>>,
    pub provenance: Option<Provenance>,
    /// `ρ_{q′}` for plain, `ρ(Ψ′(β))` for sAA, none for AA.
    pub predicted_factor: Option<f64>,
    pub measured_factor: Option<f64>,
    pub measured_reliable: bool,
    pub ratios_used: usize,
    pub iterations: usize,
    pub status: TerminalStatus,
    pub iterations_to_tol: Option<usize>,
    pub final_error: Option<f64>,
    pub trace_file: String,
    /// Eigenvalues of `Ψ′_m`, sAA only.
    pub spectrum_file: Option<String>,
}

impl Summary {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::new(Stage::Report, format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::new(Stage::Report, format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).at(Stage::Write)?;
        std::fs::write(path, text + "\n").map_err(|e| PipelineError::new(Stage::Write, format!("{}: {e}", path.display())))
    }

    pub fn scheme(&self, spec: &str) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|s| s.spec == spec)
    }
}

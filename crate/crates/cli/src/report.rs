use serde::Serialize;

use crate::error::{AtStage, PipelineError, Stage};
use crate::summary::Summary;

/// One row of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub problem: String,
    pub seed: u64,
    pub scheme: String,
    pub rho_q: Option<f64>,
    /// Coefficients joined with `;`.
    pub beta: String,
    pub predicted_factor: Option<f64>,
    pub measured_factor: Option<f64>,
    pub iterations_to_tol: Option<usize>,
}

pub fn report_rows(summaries: &[Summary]) -> Vec<ReportRow> {
    summaries
        .iter()
        .flat_map(|s| {
            let rho_q = s.spectrum.as_ref().map(|sp| sp.rho_q);
            s.schemes.iter().map(move |sc| ReportRow {
                problem: s.problem.kind.to_string(),
                seed: s.problem.seed,
                scheme: sc.label.clone(),
                rho_q,
                beta: sc.beta.as_ref().map(|b| b.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")).unwrap_or_default(),
                predicted_factor: sc.predicted_factor,
                measured_factor: sc.measured_factor,
                iterations_to_tol: sc.iterations_to_tol,
            })
        })
        .collect()
}

/// CSV table with one row per (problem, scheme) across `summaries`.
pub fn compare_report(summaries: &[Summary]) -> Result<String, PipelineError> {
    if summaries.is_empty() {
        return Err(PipelineError::new(Stage::Report, "at least one summary is required"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in report_rows(summaries) {
        w.serialize(row).at(Stage::Report)?;
    }
    let bytes = w.into_inner().at(Stage::Report)?;
    String::from_utf8(bytes).at(Stage::Report)
}

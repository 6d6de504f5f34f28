//! The full experiment: instance → reference → Jacobian → spectrum →
//! coefficients → runs → files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use aa_admm::anderson::{run_accelerated, Provenance, SaaPlan, Scheme};
use aa_admm::fixed_point::{
    estimate_convergence_factor, reference_solution, FixedPointMap, IterationTrace, RunOptions, TerminalStatus,
};
use aa_admm::jacobian::{analytic_jacobian, fd_jacobian, spectrum_with_tolerance, write_eigenvalues_csv, Spectrum};
use aa_admm::problems::{generate_instance, AdmmMap, ProblemInstance, ProblemKind};
use aa_admm::theory::{brute_force_sweep, lambda_roots, optimal_saa1, refine_around, rho_saa, OptimalSaaResult, ResultKind};
use aa_admm::{Complex, DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{BetaSource, ExperimentConfig, JacobianSource, SchemeSpec};
use crate::error::{AtStage, PipelineError, Stage};
use crate::plot::PLOT_SCRIPT;
use crate::summary::*;

/// Reference iterations stop at this step norm or at the rounding floor.
pub const REFERENCE_STEP_TOL: f64 = 1e-16;
pub const REFERENCE_MAX_ITER: usize = 2_000_000;
/// Error floor relative to `max(1, ‖x*‖)` for measured factors.
pub const FLOOR_RELATIVE: f64 = 1e-12;

pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const INSTANCE_FILE: &str = "instance.txt";
pub const Q_SPECTRUM_FILE: &str = "spectrum_q.csv";
pub const PLOT_FILE: &str = "plot.py";

/// Builds the problem the config describes, loading or generating it.
pub fn build_instance(config: &ExperimentConfig) -> Result<ProblemInstance<f64>, PipelineError> {
    let p = config.problem.resolve()?;
    match &config.problem.instance {
        Some(path) => {
            let inst = ProblemInstance::load(path).map_err(|e| PipelineError::new(Stage::Generate, format!("{}: {e}", path.display())))?;
            if inst.kind != p.kind {
                return Err(PipelineError::new(
                    Stage::Generate,
                    format!("instance file holds a {} problem but the config asks for {}", inst.kind, p.kind),
                ));
            }
            Ok(inst)
        }
        None => generate_instance(p.kind, p.rows, p.cols, p.density, config.seed, &p.params).at(Stage::Generate),
    }
}

/// Fixed point of the plain map to rounding accuracy, and the matching error floor.
pub fn reference_point(map: &AdmmMap<f64>) -> Result<(DVector<f64>, f64), PipelineError> {
    let xs = reference_solution(map, &map.initial_point(), REFERENCE_STEP_TOL, REFERENCE_MAX_ITER).at(Stage::Reference)?;
    let floor = FLOOR_RELATIVE * xs.norm().max(1.0);
    Ok((xs, floor))
}

/// Jacobian of the ADMM map at `v`. Returns the matrix and the FD step used.
pub fn jacobian_at(
    map: &AdmmMap<f64>,
    v: &DVector<f64>,
    source: JacobianSource,
    fd_step: Option<f64>,
) -> Result<(DMatrix<f64>, Option<f64>), PipelineError> {
    let kind = map.kind();
    match source {
        JacobianSource::Auto if kind == ProblemKind::Ridge => Ok((map.ridge_iteration_matrix().at(Stage::Jacobian)?, None)),
        JacobianSource::Analytic => Ok((analytic_jacobian(map, v).at(Stage::Jacobian)?, None)),
        _ => {
            let h = fd_step.unwrap_or(kind.default_fd_step());
            Ok((fd_jacobian(map, v, h).at(Stage::Jacobian)?, Some(h)))
        }
    }
}

/// Eigenvalues of `Ψ′` for `sAA(m)` with coefficients `beta`, from the roots
/// of the characteristic polynomial of each eigenvalue of `q′`.
pub fn psi_eigenvalues(spectrum: &Spectrum<f64>, beta: &[f64]) -> Vec<Complex<f64>> {
    spectrum.cleaned().into_iter().flat_map(|mu| lambda_roots(mu, beta)).collect()
}

/// Grid search for `sAA(m)`. Windows of three or more use the coarser step
/// and, when enabled, a refinement pass.
pub fn sweep_for(config: &ExperimentConfig, eigenvalues: &[Complex<f64>], m: usize) -> Result<SweepSummary, PipelineError> {
    let s = &config.sweep;
    let step = if m >= 3 { s.step_m3 } else { s.step };
    let coarse: OptimalSaaResult<f64> = brute_force_sweep(eigenvalues, m, s.lo, s.hi, step).at(Stage::Sweep)?;
    let (best, refined) = if m >= 3 && s.refine {
        let fine = refine_around(eigenvalues, &coarse, s.refine_radius, s.refine_step).at(Stage::Sweep)?;
        let refinement =
            Refinement { radius: s.refine_radius, step: s.refine_step, coarse_beta: coarse.beta.clone(), coarse_factor: coarse.factor };
        (fine, Some(refinement))
    } else {
        (coarse, None)
    };
    Ok(SweepSummary { m, lo: s.lo, hi: s.hi, step, refined, beta: best.beta, factor: best.factor })
}

struct ResolvedScheme {
    spec: SchemeSpec,
    scheme: Scheme<f64>,
    predicted: Option<f64>,
}

fn resolve_schemes(
    config: &ExperimentConfig,
    spectrum: &Spectrum<f64>,
    theory: Option<&OptimalSaaResult<f64>>,
    sweeps: &[SweepSummary],
) -> Result<Vec<ResolvedScheme>, PipelineError> {
    let eigs = spectrum.cleaned();
    config
        .schemes
        .iter()
        .map(|spec| {
            let (scheme, predicted) = match spec {
                SchemeSpec::Plain => (Scheme::Plain, Some(spectrum.spectral_radius)),
                SchemeSpec::Aa(m) => (Scheme::Aa { m: *m }, None),
                SchemeSpec::Saa(_, BetaSource::Theory) => {
                    let t = theory.ok_or_else(|| PipelineError::new(Stage::Theory, "no closed-form coefficient available"))?;
                    (Scheme::Saa(t.to_plan().at(Stage::Theory)?), Some(t.factor))
                }
                SchemeSpec::Saa(m, BetaSource::Sweep) => {
                    let s = sweeps
                        .iter()
                        .find(|s| s.m == *m)
                        .ok_or_else(|| PipelineError::new(Stage::Sweep, format!("no sweep for m = {m}")))?;
                    let plan = SaaPlan::new(s.beta.clone(), s.factor, Provenance::GridSweep).at(Stage::Sweep)?;
                    (Scheme::Saa(plan), Some(s.factor))
                }
                SchemeSpec::Saa(_, BetaSource::Explicit(beta)) => {
                    let factor = rho_saa(&eigs, beta);
                    let plan = SaaPlan::new(beta.clone(), factor, Provenance::UserSupplied).at(Stage::Config)?;
                    (Scheme::Saa(plan), Some(factor))
                }
            };
            Ok(ResolvedScheme { spec: spec.clone(), scheme, predicted })
        })
        .collect()
}

pub(crate) fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), PipelineError> {
    let run = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write(&mut w)?;
        w.flush()
    };
    run().map_err(|e| PipelineError::new(Stage::Write, format!("{}: {e}", path.display())))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn problem_summary(config: &ExperimentConfig, inst: Option<&ProblemInstance<f64>>) -> Result<ProblemSummary, PipelineError> {
    let p = config.problem.resolve()?;
    Ok(match inst {
        Some(i) => ProblemSummary {
            kind: i.kind,
            rows: i.rows(),
            cols: i.cols(),
            density: i.density,
            seed: i.seed,
            lambda: i.reg_lambda,
            rho: i.penalty_rho,
            alpha: i.smoothing_alpha,
            scaled_projection: i.scaled_projection,
            dimension: 0,
        },
        None => ProblemSummary {
            kind: p.kind,
            rows: p.rows,
            cols: p.cols,
            density: p.density,
            seed: config.seed,
            lambda: p.params.lambda,
            rho: p.params.rho,
            alpha: p.params.alpha.unwrap_or(0.0),
            scaled_projection: p.params.scaled_projection,
            dimension: 0,
        },
    })
}

/// Runs the whole experiment, writing every artifact into
/// `config.output_dir`. On failure the files produced so far, plus a
/// summary carrying the error, are left in place.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary, PipelineError> {
    config.validate()?;
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| PipelineError::new(Stage::Write, format!("{}: {e}", dir.display())))?;
    std::fs::write(dir.join(CONFIG_FILE), config.to_toml()).at(Stage::Write)?;
    let mut summary = Summary {
        problem: problem_summary(config, None)?,
        config_file: CONFIG_FILE.into(),
        instance_file: None,
        reference: None,
        jacobian: None,
        spectrum: None,
        theory: None,
        sweeps: Vec::new(),
        schemes: Vec::new(),
        caveats: Vec::new(),
        plot_script: None,
        error: None,
    };
    let outcome = stages(config, &dir, &mut summary);
    if let Err(e) = &outcome {
        summary.error = Some(e.clone());
    }
    summary.save(&dir.join(SUMMARY_FILE))?;
    outcome.map(|()| summary)
}

fn stages(config: &ExperimentConfig, dir: &Path, summary: &mut Summary) -> Result<(), PipelineError> {
    let instance = build_instance(config)?;
    instance.save(dir.join(INSTANCE_FILE)).at(Stage::Write)?;
    summary.instance_file = Some(INSTANCE_FILE.into());
    summary.problem = problem_summary(config, Some(&instance))?;
    let map = AdmmMap::new(instance).at(Stage::Generate)?;
    summary.problem.dimension = map.dimension();

    let (xs, floor) = reference_point(&map)?;
    summary.reference = Some(ReferenceSummary { norm: xs.norm(), floor });

    let (jac, h) = jacobian_at(&map, &xs, config.jacobian, config.fd_step)?;
    summary.jacobian = Some(JacobianSummary {
        source: if h.is_some() { "finite_difference" } else { "analytic" }.into(),
        fd_step: h,
    });

    let spectrum = spectrum_with_tolerance(&jac, config.imag_tolerance).at(Stage::Spectrum)?;
    drop(jac);
    write_file(&dir.join(Q_SPECTRUM_FILE), |w| spectrum.write_csv(w))?;
    summary.spectrum = Some(SpectrumSummary {
        rho_q: spectrum.spectral_radius,
        classification: spectrum.classification,
        imag_tolerance: config.imag_tolerance,
        file: Q_SPECTRUM_FILE.into(),
    });

    let theory = optimal_saa1(&spectrum).at(Stage::Theory)?;
    if theory.kind == ResultKind::LowerBoundOnly {
        let mu_plus = spectrum.mu_plus().unwrap_or(0.0);
        summary.caveats.push(format!(
            "lower_bound_only: complex eigenvalues of q' dominate the spectrum ({}); rho(Psi'(beta)) = {:.6} exceeds 1 - sqrt(1 - mu_plus) = {:.6}",
            theory.case_label,
            theory.factor,
            1.0 - (1.0 - mu_plus).sqrt()
        ));
    }
    summary.theory = Some(theory.clone());

    let eigs = spectrum.cleaned();
    let mut sweep_windows: Vec<usize> = config
        .schemes
        .iter()
        .filter_map(|s| match s {
            SchemeSpec::Saa(m, BetaSource::Sweep) => Some(*m),
            _ => None,
        })
        .collect();
    sweep_windows.sort_unstable();
    sweep_windows.dedup();
    for m in sweep_windows {
        summary.sweeps.push(sweep_for(config, &eigs, m)?);
    }

    let resolved = resolve_schemes(config, &spectrum, Some(&theory), &summary.sweeps)?;
    let x0 = map.initial_point();
    let opts = RunOptions::new(config.max_iter, config.tol).with_reference(xs).with_floor(floor);
    let runs: Vec<(usize, Result<IterationTrace<f64>, PipelineError>)> = resolved
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let trace = run_accelerated(&map, &x0, &r.scheme, &opts)
                .map_err(|e| PipelineError::new(Stage::Run, format!("{}: {e}", r.spec)));
            (i, trace)
        })
        .collect();

    let mut first_error = None;
    for (i, trace) in runs {
        let r = &resolved[i];
        let trace = match trace {
            Ok(t) => t,
            Err(e) => {
                first_error.get_or_insert(e);
                continue;
            }
        };
        let trace_path: PathBuf = dir.join(format!("trace_{}.csv", r.spec.slug()));
        write_file(&trace_path, |w| trace.write_csv(w))?;
        let (m, beta, provenance, spectrum_file) = match &r.scheme {
            Scheme::Plain => (0, None, None, None),
            Scheme::Aa { m } => (*m, None, None, None),
            Scheme::Saa(plan) => {
                let path = dir.join(format!("spectrum_psi_{}.csv", r.spec.slug()));
                write_file(&path, |w| write_eigenvalues_csv(&psi_eigenvalues(&spectrum, &plan.beta), w))?;
                (plan.m, Some(plan.beta.clone()), Some(plan.provenance), Some(file_name(&path)))
            }
        };
        let est = estimate_convergence_factor(&trace, config.window);
        summary.schemes.push(SchemeSummary {
            spec: r.spec.to_string(),
            label: r.spec.label(),
            m,
            beta,
            provenance,
            predicted_factor: r.predicted,
            measured_factor: est.factor.is_finite().then_some(est.factor),
            measured_reliable: est.reliable,
            ratios_used: est.used,
            iterations: trace.iterations(),
            status: trace.status,
            iterations_to_tol: (trace.status == TerminalStatus::Converged).then(|| trace.iterations()),
            final_error: trace.records.last().map(|r| r.error_norm),
            trace_file: file_name(&trace_path),
            spectrum_file,
        });
    }
    if let Some(e) = first_error {
        return Err(e);
    }

    std::fs::write(dir.join(PLOT_FILE), PLOT_SCRIPT).at(Stage::Write)?;
    summary.plot_script = Some(PLOT_FILE.into());
    Ok(())
}

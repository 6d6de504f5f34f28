use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use aa_admm::anderson::{run_accelerated, SaaPlan, Scheme};
use aa_admm::fixed_point::{estimate_convergence_factor, RunOptions};
use aa_admm::jacobian::{read_eigenvalues_csv, write_eigenvalues_csv, Spectrum, DEFAULT_IMAG_TOLERANCE};
use aa_admm::problems::{generate_instance, AdmmMap, GenerateParams, ProblemInstance, ProblemKind};
use aa_admm::theory::{brute_force_sweep, optimal_saa1, optimal_saa1_real, refined_sweep};
use aa_admm::Complex;
use aa_admm_cli::error::AtStage;
use aa_admm_cli::pipeline::{jacobian_at, reference_point, SUMMARY_FILE};
use aa_admm_cli::{compare_report, run_experiment, BetaSource, ExperimentConfig, JacobianSource, PipelineError, SchemeSpec, Stage, Summary};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "aa-admm", version, about = "ADMM with windowed and stationary Anderson acceleration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded problem instance file.
    Generate(GenerateArgs),
    /// Run one scheme on an instance and write its error trace.
    Solve(SolveArgs),
    /// Jacobian at the fixed point and its eigenvalues.
    Spectrum(SpectrumArgs),
    /// Closed-form sAA(1) coefficient for a spectrum.
    OptimalBeta(OptimalBetaArgs),
    /// Grid search of sAA(m) coefficients for a spectrum.
    Sweep(SweepArgs),
    /// Full pipeline: instance, spectrum, coefficients, runs, summary.
    Experiment(ExperimentArgs),
    /// Comparison table from one or more summaries.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    kind: ProblemKind,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Total variation weight (default 0.001·‖y‖∞).
    #[arg(long)]
    alpha: Option<f64>,
    /// Use z = (1/ρ)Π(x+u) for nnls and box_logistic.
    #[arg(long)]
    scaled_projection: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// `plain`, `aa<m>` or `saa<m>:<b1,b2,...>`.
    #[arg(long, default_value = "plain")]
    scheme: SchemeSpec,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 20)]
    window: usize,
    /// Trace CSV destination.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum JacobianArg {
    Auto,
    Fd,
    Analytic,
}

impl From<JacobianArg> for JacobianSource {
    fn from(a: JacobianArg) -> Self {
        match a {
            JacobianArg::Auto => JacobianSource::Auto,
            JacobianArg::Fd => JacobianSource::Fd,
            JacobianArg::Analytic => JacobianSource::Analytic,
        }
    }
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    jacobian: JacobianArg,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_IMAG_TOLERANCE)]
    imag_tolerance: f64,
    /// Eigenvalue CSV destination (`re,im`).
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimalBetaArgs {
    /// Eigenvalue CSV as written by `spectrum`.
    #[arg(long, conflicts_with_all = ["sigma_min", "sigma_max"])]
    eigenvalues: Option<PathBuf>,
    #[arg(long, requires = "sigma_max", allow_hyphen_values = true)]
    sigma_min: Option<f64>,
    #[arg(long, requires = "sigma_min", allow_hyphen_values = true)]
    sigma_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_IMAG_TOLERANCE)]
    imag_tolerance: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    eigenvalues: PathBuf,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// Half-width of a second, finer pass around the coarse optimum.
    #[arg(long, requires = "refine_step")]
    refine_radius: Option<f64>,
    #[arg(long, requires = "refine_radius")]
    refine_step: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<ProblemKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    scaled_projection: bool,
    /// Comma-separated scheme list, e.g. `plain,aa1,saa1:theory`.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn print_json(value: &impl serde::Serialize) -> Result<(), PipelineError> {
    println!("{}", serde_json::to_string_pretty(value).at(Stage::Write)?);
    Ok(())
}

fn load_map(path: &PathBuf) -> Result<AdmmMap<f64>, PipelineError> {
    let inst = ProblemInstance::load(path).map_err(|e| PipelineError::new(Stage::Generate, format!("{}: {e}", path.display())))?;
    AdmmMap::new(inst).at(Stage::Generate)
}

fn read_eigs(path: &PathBuf) -> Result<Vec<Complex<f64>>, PipelineError> {
    let file = File::open(path).map_err(|e| PipelineError::new(Stage::Spectrum, format!("{}: {e}", path.display())))?;
    read_eigenvalues_csv(BufReader::new(file)).map_err(|e| PipelineError::new(Stage::Spectrum, format!("{}: {e}", path.display())))
}

fn generate(a: GenerateArgs) -> Result<(), PipelineError> {
    let (rows, cols) = a.kind.default_dims();
    let defaults = a.kind.default_params();
    let cols = a.cols.unwrap_or(cols);
    let rows = a.rows.unwrap_or(if a.kind == ProblemKind::TotalVariation { cols.saturating_sub(1) } else { rows });
    let params = GenerateParams {
        lambda: a.lambda.unwrap_or(defaults.lambda),
        rho: a.rho.unwrap_or(defaults.rho),
        alpha: a.alpha,
        scaled_projection: a.scaled_projection,
    };
    let density = a.density.unwrap_or(a.kind.default_density());
    let inst: ProblemInstance<f64> = generate_instance(a.kind, rows, cols, density, a.seed, &params).at(Stage::Generate)?;
    inst.save(&a.out).at(Stage::Write)?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn solve(a: SolveArgs) -> Result<(), PipelineError> {
    let scheme = match &a.scheme {
        SchemeSpec::Plain => Scheme::Plain,
        SchemeSpec::Aa(m) => Scheme::Aa { m: *m },
        SchemeSpec::Saa(_, BetaSource::Explicit(beta)) => Scheme::Saa(SaaPlan::user(beta.clone()).at(Stage::Config)?),
        SchemeSpec::Saa(..) => {
            return Err(PipelineError::new(
                Stage::Config,
                "solve takes explicit sAA coefficients; use `optimal-beta`/`sweep` or `experiment` to derive them",
            ))
        }
    };
    let map = load_map(&a.instance)?;
    let (xs, floor) = reference_point(&map)?;
    let opts = RunOptions::new(a.max_iter, a.tol).with_reference(xs).with_floor(floor);
    let trace = run_accelerated(&map, &map.initial_point(), &scheme, &opts).at(Stage::Run)?;
    let file = File::create(&a.out).map_err(|e| PipelineError::new(Stage::Write, format!("{}: {e}", a.out.display())))?;
    trace.write_csv(std::io::BufWriter::new(file)).at(Stage::Write)?;
    let est = estimate_convergence_factor(&trace, a.window.max(2));
    print_json(&json!({
        "scheme": a.scheme.label(),
        "iterations": trace.iterations(),
        "status": trace.status,
        "final_error": trace.records.last().map(|r| r.error_norm),
        "measured_factor": est.factor.is_finite().then_some(est.factor),
        "measured_reliable": est.reliable,
        "trace_file": a.out,
    }))
}

fn spectrum(a: SpectrumArgs) -> Result<(), PipelineError> {
    let map = load_map(&a.instance)?;
    let (xs, _) = reference_point(&map)?;
    let (jac, h) = jacobian_at(&map, &xs, a.jacobian.into(), a.fd_step)?;
    let spec = aa_admm::jacobian::spectrum_with_tolerance(&jac, a.imag_tolerance).at(Stage::Spectrum)?;
    let file = File::create(&a.out).map_err(|e| PipelineError::new(Stage::Write, format!("{}: {e}", a.out.display())))?;
    write_eigenvalues_csv(&spec.eigenvalues, std::io::BufWriter::new(file)).at(Stage::Write)?;
    print_json(&json!({
        "rho_q": spec.spectral_radius,
        "classification": spec.classification,
        "fd_step": h,
        "eigenvalues_file": a.out,
    }))
}

fn optimal_beta(a: OptimalBetaArgs) -> Result<(), PipelineError> {
    let result = match (&a.eigenvalues, a.sigma_min, a.sigma_max) {
        (Some(path), _, _) => optimal_saa1(&Spectrum::from_eigenvalues(read_eigs(path)?, a.imag_tolerance)),
        (None, Some(lo), Some(hi)) => optimal_saa1_real(lo, hi),
        _ => return Err(PipelineError::new(Stage::Config, "give --eigenvalues or both --sigma-min and --sigma-max")),
    }
    .at(Stage::Theory)?;
    print_json(&result)
}

fn sweep(a: SweepArgs) -> Result<(), PipelineError> {
    let eigs = Spectrum::from_eigenvalues(read_eigs(&a.eigenvalues)?, DEFAULT_IMAG_TOLERANCE).cleaned();
    let result = match (a.refine_radius, a.refine_step) {
        (Some(r), Some(s)) => refined_sweep(&eigs, a.m, (a.lo, a.hi, a.step), r, s),
        _ => brute_force_sweep(&eigs, a.m, a.lo, a.hi, a.step),
    }
    .at(Stage::Sweep)?;
    print_json(&result)
}

fn experiment_config(a: ExperimentArgs) -> Result<ExperimentConfig, PipelineError> {
    let mut cfg = match (&a.config, a.kind, a.seed) {
        (Some(path), _, _) => ExperimentConfig::load(path)?,
        (None, Some(kind), Some(seed)) => ExperimentConfig::for_kind(kind, seed),
        _ => return Err(PipelineError::new(Stage::Config, "give --config, or both --kind and --seed")),
    };
    if a.config.is_some() {
        if let Some(k) = a.kind {
            cfg.problem.kind = Some(k);
        }
        if let Some(s) = a.seed {
            cfg.seed = s;
        }
    }
    let p = &mut cfg.problem;
    p.rows = a.rows.or(p.rows);
    p.cols = a.cols.or(p.cols);
    p.density = a.density.or(p.density);
    p.rho = a.rho.or(p.rho);
    p.lambda = a.lambda.or(p.lambda);
    p.scaled_projection |= a.scaled_projection;
    if let Some(list) = a.schemes {
        cfg.schemes = list
            .iter()
            .map(|s| s.parse::<SchemeSpec>().map_err(|e| PipelineError::new(Stage::Config, e)))
            .collect::<Result<_, _>>()?;
    }
    cfg.max_iter = a.max_iter.unwrap_or(cfg.max_iter);
    cfg.tol = a.tol.unwrap_or(cfg.tol);
    cfg.fd_step = a.fd_step.or(cfg.fd_step);
    if let Some(dir) = a.output_dir {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn experiment(a: ExperimentArgs) -> Result<(), PipelineError> {
    let cfg = experiment_config(a)?;
    let summary = run_experiment(&cfg)?;
    for s in &summary.schemes {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        eprintln!(
            "{:<8} predicted {:>7}  measured {:>7}  iterations {}",
            s.label,
            fmt(s.predicted_factor),
            fmt(s.measured_factor),
            s.iterations
        );
    }
    for c in &summary.caveats {
        eprintln!("caveat: {c}");
    }
    println!("{}", cfg.output_dir.join(SUMMARY_FILE).display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), PipelineError> {
    let summaries = a.summaries.iter().map(|p| Summary::load(p)).collect::<Result<Vec<_>, _>>()?;
    let table = compare_report(&summaries)?;
    match a.out {
        Some(path) => std::fs::write(&path, table).map_err(|e| PipelineError::new(Stage::Write, format!("{}: {e}", path.display()))),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Spectrum(a) => spectrum(a),
        Command::OptimalBeta(a) => optimal_beta(a),
        Command::Sweep(a) => sweep(a),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aa-admm: {} stage failed: {}", e.stage, e.message);
            ExitCode::FAILURE
        }
    }
}

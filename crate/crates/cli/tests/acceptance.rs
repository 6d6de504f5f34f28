//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Run alone with `cargo test -p aa-admm-cli --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use aa_admm::anderson::{aa_coefficients, run_accelerated, SaaPlan, Scheme, WindowBuffer};
use aa_admm::fixed_point::{iterate, reference_solution, FixedPointMap, RunOptions};
use aa_admm::jacobian::{analytic_jacobian, eigenvalues, fd_jacobian, Classification, Spectrum};
use aa_admm::problems::{generate_instance, project_box, project_nonneg, prox_l1, AdmmMap, ProblemInstance, ProblemKind};
use aa_admm::theory::{circle_params, companion_psi, lambda_roots, optimal_saa1, optimal_saa1_real, rho_saa, ResultKind};
use aa_admm::{Complex, DMatrix, DVector};
use aa_admm_cli::{run_experiment, ExperimentConfig, Summary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn round3(v: f64) -> f64 {
    (v * 1e3).round() / 1e3
}

fn multiset_gap(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("multisets of equal size");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn default_map(kind: ProblemKind, seed: u64) -> AdmmMap<f64> {
    let (m, n) = kind.default_dims();
    let inst = generate_instance(kind, m, n, kind.default_density(), seed, &kind.default_params()).unwrap();
    AdmmMap::new(inst).unwrap()
}

fn fixed_point(map: &AdmmMap<f64>) -> DVector<f64> {
    reference_solution(map, &map.initial_point(), 1e-16, 2_000_000).unwrap()
}

/// Published (σ, β*, ρ*) triples. The σ values carry one more digit than
/// printed so that every printed triple is consistent after rounding.
fn published_triples() -> Outcome {
    let real = [(0.8333, 0.420, 0.592), (0.714, 0.303, 0.465), (0.938, 0.601, 0.751), (0.8063, 0.389, 0.560), (0.900, 0.519, 0.684)];
    let complex = [(0.9756, 0.730, 0.844), (0.9962, 0.884, 0.938)];
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (sigma, beta, factor) in real {
        let eigs: Vec<_> = (0..=50).map(|i| c(sigma * i as f64 / 50.0, 0.0)).collect();
        let r = optimal_saa1(&Spectrum::from_eigenvalues(eigs, 1e-8)).map_err(|e| e.to_string())?;
        worst = worst.max((round3(r.beta[0]) - beta).abs()).max((round3(r.factor) - factor).abs());
        lines.push(format!("{sigma}->({:.3},{:.3})", r.beta[0], r.factor));
    }
    for (sigma, beta, bound) in complex {
        // Real eigenvalue on the radius plus a complex pair well inside.
        let eigs = vec![c(sigma, 0.0), c(0.2, 0.0), c(0.3, 0.35), c(0.3, -0.35)];
        let r = optimal_saa1(&Spectrum::from_eigenvalues(eigs, 1e-8)).map_err(|e| e.to_string())?;
        let lb = r.lower_bound.ok_or("complex path gave no lower bound")?;
        worst = worst.max((round3(r.beta[0]) - beta).abs()).max((round3(lb) - bound).abs());
        lines.push(format!("{sigma}->({:.3},{:.3},{})", r.beta[0], lb, r.kind.as_str()));
    }
    check(worst <= 5e-4, format!("max rounded deviation {worst:.1e}; {}", lines.join(" ")))
}

fn appendix_oracle() -> Outcome {
    let demo = AdmmMap::new(ProblemInstance::scalar_l1_demo(10.0)).unwrap();
    let j = fd_jacobian(&demo, &DVector::zeros(2), 1e-3).map_err(|e| e.to_string())?;
    let want = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 10.0 / 11.0, 1.0 / 11.0]);
    let demo_gap = (j - want).amax();
    let mut gaps = vec![format!("demo {demo_gap:.1e}")];
    let mut ok = demo_gap <= 1e-8;
    for kind in [ProblemKind::Lasso, ProblemKind::TotalVariation] {
        let map = default_map(kind, 1);
        let v = fixed_point(&map);
        let fd = fd_jacobian(&map, &v, kind.default_fd_step()).map_err(|e| e.to_string())?;
        let an = analytic_jacobian(&map, &v).map_err(|e| e.to_string())?;
        let gap = (fd - an).amax();
        ok &= gap <= 1e-6;
        gaps.push(format!("{kind} {gap:.1e}"));
    }
    check(ok, format!("entrywise gaps: {}", gaps.join(", ")))
}

fn companion_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let m = rng.random_range(1..=3);
        let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) / (n as f64).sqrt());
        let beta: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direct = eigenvalues(&companion_psi(&q, &beta).unwrap()).map_err(|e| e.to_string())?;
        let roots: Vec<_> = eigenvalues(&q).unwrap().into_iter().flat_map(|mu| lambda_roots(mu, &beta)).collect();
        worst = worst.max(multiset_gap(&direct, &roots));
    }
    check(worst <= 1e-8, format!("100 cases, max multiset gap {worst:.1e}"))
}

fn circle_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut cases, mut worst) = (0usize, 0.0f64);
    while cases < 10_000 {
        let mu: f64 = rng.random_range(-1.0..1.0);
        let beta: f64 = rng.random_range(-0.99..0.99);
        let p = (1.0 + beta) * mu;
        if p * p - 4.0 * beta * mu >= 0.0 {
            continue;
        }
        cases += 1;
        let (center, radius) = circle_params(beta).unwrap();
        for l in lambda_roots(c(mu, 0.0), &[beta]) {
            worst = worst.max(((l - center).norm() - radius).abs());
        }
    }
    check(worst <= 1e-10, format!("{cases} complex-root cases, max distance from circle {worst:.1e}"))
}

fn closed_form_vs_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut labels = std::collections::BTreeSet::new();
    let mut worst_gain = f64::NEG_INFINITY;
    for i in 0..200 {
        let a: f64 = rng.random_range(0.02..0.98);
        let b: f64 = rng.random_range(0.02..0.98);
        // Alternate between sign patterns so every branch gets exercised.
        let (lo, hi) = match i % 4 {
            0 => (a.min(b), a.max(b)),
            1 => (-a.max(b), -a.min(b)),
            2 => (-a, a),
            _ => (-a, b),
        };
        let r = optimal_saa1_real(lo, hi).map_err(|e| e.to_string())?;
        labels.insert(r.case_label.clone());
        let mut eigs = vec![c(lo, 0.0), c(hi, 0.0)];
        eigs.extend((0..8).map(|_| c(rng.random_range(lo..=hi), 0.0)));
        let closed = rho_saa(&eigs, &r.beta);
        let grid = (0..=20_000).map(|k| rho_saa(&eigs, &[-1.0 + k as f64 * 1e-4])).fold(f64::INFINITY, f64::min);
        worst_gain = worst_gain.max(closed - grid);
    }
    let all = ["nonnegative", "nonpositive", "a", "b1", "b2", "c1", "c2"].iter().all(|l| labels.contains(*l));
    check(
        worst_gain <= 1e-3 && all,
        format!("200 spectra, branches {labels:?}, largest grid improvement {worst_gain:.1e}"),
    )
}

fn end_to_end(kind: ProblemKind, scaled: bool) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::for_kind(kind, 1);
    cfg.problem.scaled_projection = scaled;
    cfg.schemes = ["plain", "aa1", "saa1:theory"].iter().map(|s| s.parse().unwrap()).collect();
    cfg.output_dir = dir.path().to_path_buf();
    let s = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let rho_q = s.spectrum.as_ref().unwrap().rho_q;
    let get = |spec: &str| s.scheme(spec).and_then(|x| x.measured_factor).unwrap_or(f64::NAN);
    let (plain, aa, saa) = (get("plain"), get("aa1"), get("saa1:theory"));
    let predicted = s.scheme("saa1:theory").and_then(|x| x.predicted_factor).unwrap_or(f64::NAN);
    let ok = (plain - rho_q).abs() <= 0.05 && (saa - predicted).abs() <= 0.05 && aa <= plain;
    check(
        ok,
        format!("rho_q {rho_q:.4} plain {plain:.4} | rho(Psi') {predicted:.4} sAA(1) {saa:.4} | AA(1) {aa:.4}"),
    )
}

fn prox_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_expansion = f64::NEG_INFINITY;
    let mut worst_idem = 0.0f64;
    for _ in 0..2000 {
        let n = rng.random_range(1..20);
        let a = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let b = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let t = rng.random_range(0.01..3.0);
        let d = (&a - &b).norm();
        worst_expansion = worst_expansion.max((prox_l1(&a, t) - prox_l1(&b, t)).norm() - d);
        worst_expansion = worst_expansion.max((project_nonneg(&a) - project_nonneg(&b)).norm() - d);
        worst_expansion = worst_expansion.max((project_box(&a, -1.0, 1.0) - project_box(&b, -1.0, 1.0)).norm() - d);
        let p = project_nonneg(&a);
        let q = project_box(&a, -1.0, 1.0);
        worst_idem = worst_idem.max((project_nonneg(&p) - &p).norm()).max((project_box(&q, -1.0, 1.0) - &q).norm());
    }
    let ridge = default_map(ProblemKind::Ridge, 1);
    let ridge_gap = (fixed_point(&ridge) - ridge.ridge_closed_form().unwrap()).amax();
    let mut dual_gap = 0.0f64;
    for kind in [ProblemKind::Ridge, ProblemKind::RegLogistic] {
        let map = default_map(kind, 1);
        let st = map.state_at(&fixed_point(&map)).unwrap();
        let next = map.sweep(&st.z, &st.u).unwrap();
        let admm_u = &st.u + &next.x - &next.z;
        let inst = map.instance();
        dual_gap = dual_gap.max((admm_u - &next.z * (2.0 * inst.reg_lambda / inst.penalty_rho)).amax());
    }
    check(
        worst_expansion <= 1e-12 && worst_idem == 0.0 && ridge_gap <= 1e-10 && dual_gap <= 1e-10,
        format!(
            "expansion {worst_expansion:.1e}, idempotence {worst_idem:.1e}, ridge closed form {ridge_gap:.1e}, u*-(2λ/ρ)z* {dual_gap:.1e}"
        ),
    )
}

fn equivalence_reductions() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for kind in [ProblemKind::Ridge, ProblemKind::Lasso] {
        let map = default_map(kind, 1);
        let x0 = map.initial_point();
        let xs = fixed_point(&map);
        let plain = iterate(&map, &x0, 300, 0.0, Some(&xs)).unwrap();
        let opts = RunOptions::new(300, 0.0).with_reference(xs);
        let aa0 = run_accelerated(&map, &x0, &Scheme::Aa { m: 0 }, &opts).unwrap();
        let saa0 = run_accelerated(&map, &x0, &Scheme::Saa(SaaPlan::user(vec![0.0]).unwrap()), &opts).unwrap();
        let same = plain.errors() == aa0.errors() && plain.errors() == saa0.errors() && plain.last_iterate == saa0.last_iterate;
        ok &= same;
        notes.push(format!("{kind} traces identical: {same}"));
    }
    // Coefficient optimality along a real AA(3) history on lasso.
    let map = default_map(ProblemKind::Lasso, 1);
    let mut buf = WindowBuffer::new(3);
    let mut x = map.initial_point();
    let mut worst_drop = f64::NEG_INFINITY;
    for k in 0..40 {
        let qx = map.evaluate(&x).unwrap();
        buf.push(x.clone(), qx.clone()).unwrap();
        if buf.len() >= 2 {
            let beta = aa_coefficients(&buf).unwrap();
            let objective = |b: &[f64]| {
                let mut r = buf.back(0).r.clone();
                for (i, bi) in b.iter().enumerate() {
                    r += (&buf.back(i).r - &buf.back(i + 1).r) * *bi;
                }
                r.norm_squared()
            };
            let f0 = objective(&beta);
            for i in 0..beta.len() {
                for d in [1e-4, -1e-4] {
                    let mut p = beta.clone();
                    p[i] += d;
                    worst_drop = worst_drop.max(f0 - objective(&p));
                }
            }
        }
        x = if k < 2 { qx } else { aa_admm::anderson::aa_step(&buf).unwrap() };
    }
    ok &= worst_drop <= 1e-12;
    notes.push(format!("largest objective decrease under ±1e-4 perturbation {worst_drop:.1e}"));
    check(ok, notes.join("; "))
}

fn failure_mode_detection() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::for_kind(ProblemKind::Lasso, 1);
    cfg.problem.density = Some(0.06);
    cfg.schemes = ["plain", "saa1:theory"].iter().map(|s| s.parse().unwrap()).collect();
    cfg.output_dir = dir.path().to_path_buf();
    let s = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let reread = Summary::load(&dir.path().join("summary.json")).map_err(|e| e.to_string())?;
    let theory = reread.theory.as_ref().ok_or("no theory record")?;
    let mu_plus = match reread.spectrum.as_ref().unwrap().classification {
        Classification::Complex { mu_plus, .. } => mu_plus.unwrap_or(0.0),
        Classification::Real { .. } => return Err("spectrum classified real".into()),
    };
    let bound = 1.0 - (1.0 - mu_plus).sqrt();
    let measured = theory.measured.unwrap_or(f64::NAN);
    let run = s.scheme("saa1:theory").and_then(|x| x.measured_factor).unwrap_or(f64::NAN);
    let flagged = theory.kind == ResultKind::LowerBoundOnly && reread.caveats.iter().any(|c| c.starts_with("lower_bound_only"));
    check(
        flagged && measured > bound,
        format!("kind {}, rho(Psi'(beta)) {measured:.4} vs 1-sqrt(1-mu+) {bound:.4}, sAA(1) run factor {run:.4}", theory.kind.as_str()),
    )
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(detail) => println!("PASS  {name} ({secs:.1}s): {detail}"),
        Err(detail) => println!("FAIL  {name} ({secs:.1}s): {detail}"),
    }
    outcome.is_ok()
}

fn main() {
    let mut passed = Vec::new();
    passed.push(run("criterion 1 published triples", published_triples));
    passed.push(run("criterion 2 jacobian oracles", appendix_oracle));
    passed.push(run("criterion 3 companion/root equivalence", companion_equivalence));
    passed.push(run("criterion 4 circle property", circle_property));
    passed.push(run("criterion 5 closed form vs grid", closed_form_vs_grid));
    let mut six = true;
    for kind in ProblemKind::ALL {
        six &= run(&format!("criterion 6 end-to-end {kind}"), || end_to_end(kind, false));
    }
    // Not part of the criterion: nnls with the scaled projection variant.
    run("info: end-to-end nnls, scaled projection", || end_to_end(ProblemKind::Nnls, true));
    passed.push(six);
    passed.push(run("criterion 7 prox and fixed-point properties", prox_suite));
    passed.push(run("criterion 8 equivalence reductions", equivalence_reductions));
    passed.push(run("criterion 9 complex-dominance detection", failure_mode_detection));
    let failed: Vec<usize> = passed.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    if failed.is_empty() {
        println!("acceptance: all 9 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}

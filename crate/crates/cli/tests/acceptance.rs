//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Run alone with `cargo test -p gcvae-cli --test acceptance`. Set
//! `ACCEPTANCE_ONLY=1,4,10` to run a subset.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use gcvae::fem::io::read_dataset;
use gcvae::fem::{
    assemble_biharmonic_ip, assemble_poisson_p1, generate_dataset, generate_mesh, penalty_min, sample_coefficient,
    CoefficientField, DatasetOptions, Family, TriMesh,
};
use gcvae::metrics::{benchmark_latent, condition_number, condition_number_with, density, EigenMethod};
use gcvae::model::{load_checkpoint, ModelConfig, ModelProfile};
use gcvae::pipeline::{cmd_bench, cmd_gen_data, cmd_train, RunConfig, SeedPlan, MODEL_FILE};
use gcvae::solvers::{cg_unpreconditioned, ic_droptol, pcg_observed, spai_precond, Preconditioner};
use gcvae::sparse::frobenius_residual;
use gcvae::training::{gradient_check, kl_divergence, total_loss, TrainProfile};
use gcvae::CsrMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget_s: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() <= budget_s, || {
        format!("{what} took {:.1} s, budget {budget_s} s", elapsed.as_secs_f64())
    })
}

fn random_spd_dense(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(n, n) * 0.5
}

fn dense_kl(mu: &[f64], lv: &[f64]) -> f64 {
    0.5 * mu.iter().zip(lv).map(|(m, l)| m * m + l.exp() - 1.0 - l).sum::<f64>()
}

fn dense_residual(a: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    (DMatrix::identity(n, n) - r.transpose() * a * r).norm()
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}

fn fem_stencil() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for m in [4usize, 8, 16] {
        let mesh = TriMesh::structured(m).map_err(|e| e.to_string())?;
        let a = assemble_poisson_p1(&mesh, &CoefficientField::constant(1.0)).map_err(|e| e.to_string())?;
        let k = m - 1;
        let mut d = DMatrix::zeros(k * k, k * k);
        for j in 0..k {
            for i in 0..k {
                let r = j * k + i;
                d[(r, r)] = 4.0;
                if i > 0 {
                    d[(r, r - 1)] = -1.0;
                }
                if i + 1 < k {
                    d[(r, r + 1)] = -1.0;
                }
                if j > 0 {
                    d[(r, r - k)] = -1.0;
                }
                if j + 1 < k {
                    d[(r, r + k)] = -1.0;
                }
            }
        }
        ensure(a.n_rows() == k * k, || {
            format!("m = {m}: n = {} expected {}", a.n_rows(), k * k)
        })?;
        worst = worst.max((a.to_dense() - d).abs().max());
    }
    ensure(worst < 1e-12, || format!("max abs diff {worst:e}"))?;
    within_budget(t.elapsed(), 1.0, "stencil check")?;
    Ok(format!("max abs diff {worst:.1e} on 3x3, 7x7, 15x15 interiors"))
}

fn loss_oracles() -> Outcome {
    let t = Instant::now();
    let kl = kl_divergence(&[1.0], &[0.0]).map_err(|e| e.to_string())?;
    ensure(kl == 0.5, || format!("kl(1, 0) = {kl}"))?;
    let a4 = CsrMatrix::from_diagonal(&[4.0]);
    let r1 = CsrMatrix::from_diagonal(&[1.0]);
    let l = total_loss(&a4, &r1, &[0.0], &[0.0], 0.1).map_err(|e| e.to_string())?;
    ensure(l == 9.0, || format!("loss(diag 4, diag 1) = {l}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let a = random_spd_dense(n, &mut rng);
        let r = DMatrix::from_fn(n, n, |i, j| {
            if i == j || rng.random::<f64>() < 0.3 {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        });
        let (a_csr, r_csr) = (CsrMatrix::from_dense(&a, 0.0), CsrMatrix::from_dense(&r, 0.0));
        let d = rng.random_range(1..=8);
        let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lv: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let alpha = rng.random_range(0.0..1.0);

        let f = frobenius_residual(&a_csr, &r_csr).map_err(|e| e.to_string())?;
        let f_ref = dense_residual(&a, &r);
        let k = kl_divergence(&mu, &lv).map_err(|e| e.to_string())?;
        let k_ref = dense_kl(&mu, &lv);
        let tl = total_loss(&a_csr, &r_csr, &mu, &lv, alpha).map_err(|e| e.to_string())?;
        let tl_ref = f_ref * f_ref + alpha * k_ref;
        worst = worst.max(rel(f, f_ref)).max(rel(k, k_ref)).max(rel(tl, tl_ref));
    }
    ensure(worst < 1e-12, || format!("max relative error {worst:e}"))?;
    within_budget(t.elapsed(), 10.0, "loss oracles")?;
    Ok(format!(
        "100 random instances, max relative error {worst:.1e}; hand values exact"
    ))
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let mesh = generate_mesh(10, 3).map_err(|e| e.to_string())?;
    let split =
        generate_dataset(Family::Poisson, &mesh, 5, 0.0, 3, &DatasetOptions::default()).map_err(|e| e.to_string())?;
    let s = &split.train[0];
    ensure(s.dim() == 10, || format!("n = {}", s.dim()))?;
    let cfg = ModelConfig::for_profile(ModelProfile::Small, 10, 17);
    let rep = gradient_check(&cfg, s, 1e-3).map_err(|e| e.to_string())?;
    ensure(rep.checked >= 200, || {
        format!("only {} parameters checked", rep.checked)
    })?;
    ensure(rep.max_rel_error < 1e-4, || {
        format!("max relative error {:e} ({rep:?})", rep.max_rel_error)
    })?;
    within_budget(t.elapsed(), 120.0, "gradient check")?;
    Ok(format!(
        "{} parameters, step 1e-3, max relative error {:.2e}",
        rep.checked, rep.max_rel_error
    ))
}

fn solvers() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);

    // Identity preconditioner against plain CG, iterate by iterate.
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let a = CsrMatrix::from_dense(&random_spd_dense(30, &mut rng), 0.0);
        let b: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut xs_p = Vec::new();
        let mut xs_c = Vec::new();
        let (_, rp) = pcg_observed(&a, &b, &Preconditioner::identity(30), 1e-10, 500, |_, x| {
            xs_p.push(x.to_vec())
        })
        .map_err(|e| e.to_string())?;
        let (_, rc) =
            cg_unpreconditioned(&a, &b, 1e-10, 500, |_, x| xs_c.push(x.to_vec())).map_err(|e| e.to_string())?;
        ensure(rp.iterations == rc.iterations && xs_p.len() == xs_c.len(), || {
            format!("iteration counts differ: {} vs {}", rp.iterations, rc.iterations)
        })?;
        for (u, v) in xs_p.iter().zip(&xs_c) {
            for (p, q) in u.iter().zip(v) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    ensure(worst < 1e-14, || {
        format!("identity-preconditioned iterates differ by {worst:e}")
    })?;

    // Exact inverse as P = C Cᵀ with C = L⁻ᵀ.
    let mut max_inv_iters = 0;
    for _ in 0..5 {
        let d = random_spd_dense(25, &mut rng);
        let l = nalgebra::Cholesky::new(d.clone()).ok_or("cholesky failed")?.l();
        let c = l.transpose().try_inverse().ok_or("triangular inverse failed")?;
        let a = CsrMatrix::from_dense(&d, 0.0);
        let p = spai_precond(&CsrMatrix::from_dense(&c, -1.0)).map_err(|e| e.to_string())?;
        let b: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, rep) = pcg_observed(&a, &b, &p, 1e-10, 50, |_, _| {}).map_err(|e| e.to_string())?;
        ensure(rep.converged, || "exact-inverse PCG did not converge".into())?;
        max_inv_iters = max_inv_iters.max(rep.iterations);
    }
    ensure(max_inv_iters <= 2, || {
        format!("P = A^-1 needed {max_inv_iters} iterations")
    })?;

    // Zero drop tolerance gives exact Cholesky.
    let mut max_ic_iters = 0;
    for _ in 0..5 {
        let mut d = random_spd_dense(20, &mut rng);
        for i in 0..20 {
            for j in 0..20 {
                if i != j && (i + 2 * j) % 3 == 0 {
                    d[(i, j)] = 0.0;
                    d[(j, i)] = 0.0;
                }
            }
        }
        let diag_boost: f64 = d.abs().row_sum().max();
        d += DMatrix::identity(20, 20) * diag_boost;
        let a = CsrMatrix::from_dense(&d, 0.0);
        let p = ic_droptol(&a, 0.0).map_err(|e| e.to_string())?;
        let b: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, rep) = pcg_observed(&a, &b, &p, 1e-10, 50, |_, _| {}).map_err(|e| e.to_string())?;
        ensure(rep.converged, || "IC(0) PCG did not converge".into())?;
        max_ic_iters = max_ic_iters.max(rep.iterations);
    }
    ensure(max_ic_iters == 1, || {
        format!("droptol 0 needed {max_ic_iters} iterations")
    })?;
    within_budget(t.elapsed(), 30.0, "solver checks")?;
    Ok(format!(
        "identity vs CG max diff {worst:.1e}; exact inverse <= {max_inv_iters} iterations; droptol 0 in {max_ic_iters}"
    ))
}

fn condition_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let d = random_spd_dense(30, &mut rng);
        let eig = nalgebra::SymmetricEigen::new(d.clone()).eigenvalues;
        let reference = eig.max() / eig.min();
        let a = CsrMatrix::from_dense(&d, 0.0);
        for method in [EigenMethod::Dense, EigenMethod::Lanczos] {
            let k = condition_number_with(&a, None, method).map_err(|e| e.to_string())?;
            worst = worst.max(rel(k, reference));
        }
    }
    ensure(worst < 1e-6, || format!("max relative error {worst:e}"))?;
    let tri = CsrMatrix::from_dense(
        &DMatrix::from_row_slice(3, 3, &[2., -1., 0., -1., 2., -1., 0., -1., 2.]),
        0.0,
    );
    let k3 = condition_number(&tri, None).map_err(|e| e.to_string())?;
    let closed = (2.0 + 2f64.sqrt()) / (2.0 - 2f64.sqrt());
    ensure((k3 - 5.8284).abs() <= 1e-4 && (k3 - closed).abs() < 1e-12, || {
        format!("kappa(tridiag 3) = {k3}")
    })?;
    within_budget(t.elapsed(), 10.0, "condition oracle")?;
    Ok(format!(
        "dense and Lanczos max relative error {worst:.1e}; kappa(tridiag 3) = {k3:.6}"
    ))
}

struct PoissonRun {
    dir: tempfile::TempDir,
    cfg: RunConfig,
    report: Option<gcvae::metrics::BenchmarkReport>,
    train_time: Duration,
    bench_time: Duration,
    epochs: usize,
    error: Option<String>,
}

fn poisson_run() -> PoissonRun {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut cfg = RunConfig::for_family(Family::Poisson, dir.path());
    cfg.target_n = 225;
    cfg.n_samples = 300;
    cfg.model_profile = ModelProfile::Small;
    cfg.train_profile = TrainProfile::Small;
    cfg.train.epochs = Some(60);
    cfg.bench.methods = "jacobi,gcvae,ic_matched".into();
    let mut run = PoissonRun {
        dir,
        cfg,
        report: None,
        train_time: Duration::ZERO,
        bench_time: Duration::ZERO,
        epochs: 0,
        error: None,
    };
    let result = (|| -> gcvae::Result<()> {
        cmd_gen_data(&run.cfg)?;
        let t = Instant::now();
        let summary = cmd_train(&run.cfg)?;
        run.train_time = t.elapsed();
        run.epochs = summary.records.len();
        let t = Instant::now();
        let bench = cmd_bench(&run.cfg)?;
        run.bench_time = t.elapsed();
        run.report = Some(bench.report);
        Ok(())
    })();
    if let Err(e) = result {
        run.error = Some(format!("category={} {e}", e.category()));
    }
    run
}

fn poisson_ordering(run: &PoissonRun, total: Duration) -> Outcome {
    if let Some(e) = &run.error {
        return Err(e.clone());
    }
    let report = run.report.as_ref().ok_or("no report")?;
    let jac = report.row("jacobi").ok_or("missing jacobi row")?;
    let gen = report.row("gcvae").ok_or("missing gcvae row")?;
    ensure(gen.sample_count == 60 && jac.sample_count == 60, || {
        format!("expected 60 test samples, got {}", gen.sample_count)
    })?;
    ensure(run.epochs <= 60, || format!("{} epochs", run.epochs))?;
    let ratio = gen.mean_iterations / jac.mean_iterations;
    let detail = format!(
        "n = {}, {} epochs; iterations gcvae {:.2} vs jacobi {:.2} (ratio {ratio:.3}); two-sided kappa {:.2} vs {:.2}; {:.0} s",
        gen.n,
        run.epochs,
        gen.mean_iterations,
        jac.mean_iterations,
        gen.mean_condition,
        jac.mean_condition,
        total.as_secs_f64()
    );
    ensure(ratio <= 0.85, || format!("iteration ratio above 0.85: {detail}"))?;
    ensure(gen.mean_condition < jac.mean_condition, || {
        format!("condition not below jacobi: {detail}")
    })?;
    within_budget(total, 45.0 * 60.0, "poisson pipeline")?;
    Ok(detail)
}

fn mask_enforcement(run: &PoissonRun) -> Outcome {
    if let Some(e) = &run.error {
        return Err(e.clone());
    }
    let report = run.report.as_ref().ok_or("no report")?;
    let model = load_checkpoint(run.cfg.paths.model_dir.join(MODEL_FILE)).map_err(|e| e.to_string())?;
    let split = read_dataset(&run.cfg.paths.data_dir, false).map_err(|e| e.to_string())?;
    let z_seed = SeedPlan::new(run.cfg.seed).bench;
    let f = run.cfg.extra_fraction();
    let mut checked = 0;
    for s in &split.test {
        let z = benchmark_latent(z_seed, s.id, model.config().latent_dim);
        let r = model.infer(&s.a, &s.mask, &z).map_err(|e| e.to_string())?;
        let n = s.dim();
        let stored: Vec<(usize, usize)> = (0..n).flat_map(|i| r.row(i).0.iter().map(move |&j| (i, j))).collect();
        let mask: Vec<(usize, usize)> = s.mask.positions().collect();
        ensure(stored == mask, || {
            format!("sample {}: stored pattern differs from mask", s.id)
        })?;
        let extras = (f * s.a.nnz() as f64).ceil() as usize;
        let expected = (s.a.nnz() + extras) as f64 / (n as f64 * n as f64);
        let p = spai_precond(&r).map_err(|e| e.to_string())?;
        ensure(density(&p) == expected, || {
            format!("sample {}: density {} != {expected}", s.id, density(&p))
        })?;
        let reported = report
            .samples
            .iter()
            .find(|x| x.method == "gcvae" && x.sample_id == s.id)
            .ok_or_else(|| format!("sample {} missing from report", s.id))?;
        ensure(reported.density == expected, || {
            format!("sample {}: reported density {}", s.id, reported.density)
        })?;
        checked += 1;
    }
    ensure(checked == 60, || format!("checked {checked} preconditioners"))?;
    Ok(format!(
        "{checked} generated factors: pattern equals mask, density exactly (nnz(A) + extras)/n^2"
    ))
}

fn matched_ic(run: &PoissonRun) -> Outcome {
    if let Some(e) = &run.error {
        return Err(e.clone());
    }
    let report = run.report.as_ref().ok_or("no report")?;
    let m = report.matched.as_ref().ok_or("no matched search in report")?;
    let detail = format!(
        "droptol {:.3e}: {:.2} iterations vs target {:.2} (gap {:.2}%), {} steps, bench {:.0} s",
        m.droptol,
        m.mean_iterations,
        m.target_iterations,
        100.0 * m.relative_gap,
        m.steps,
        run.bench_time.as_secs_f64()
    );
    ensure(m.relative_gap <= 0.05, || format!("outside 5%: {detail}"))?;
    within_budget(run.bench_time, 600.0, "benchmark with matched search")?;
    Ok(detail)
}

fn biharmonic_spd() -> Outcome {
    let t = Instant::now();
    let mesh = generate_mesh(Family::Biharmonic.mesh_nodes_for(300), 9).map_err(|e| e.to_string())?;
    let penalty = 2.0 * penalty_min(&mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut worst_asym, mut min_eig, mut n) = (0.0f64, f64::INFINITY, 0);
    for _ in 0..20 {
        let f = sample_coefficient(&mut rng).map_err(|e| e.to_string())?;
        let a = assemble_biharmonic_ip(&mesh, &f, penalty).map_err(|e| e.to_string())?;
        n = a.n_rows();
        let d = a.to_dense();
        worst_asym = worst_asym.max((&d - d.transpose()).abs().max());
        min_eig = min_eig.min(nalgebra::SymmetricEigen::new(d).eigenvalues.min());
    }
    ensure((250..=350).contains(&n), || format!("n = {n} is not near 300"))?;
    ensure(worst_asym < 1e-12, || format!("asymmetry {worst_asym:e}"))?;
    ensure(min_eig > 0.0, || format!("min eigenvalue {min_eig:e}"))?;
    within_budget(t.elapsed(), 300.0, "biharmonic check")?;
    Ok(format!(
        "n = {n}, 20 coefficients, asymmetry {worst_asym:.1e}, min eigenvalue {min_eig:.3e}"
    ))
}

fn sha256_file(path: &Path) -> Result<String, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Training log without the wall-clock column.
fn train_log_without_time(path: &Path) -> Result<Vec<String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty training log")?.split(',').collect();
    let skip = header
        .iter()
        .position(|h| *h == "wall_seconds")
        .ok_or("no wall_seconds column")?;
    Ok(text
        .lines()
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, v)| v)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect())
}

fn cli_run(out: &Path) -> Result<PathBuf, String> {
    let bin = env!("CARGO_BIN_EXE_gcvae");
    let common = [
        "--family",
        "poisson",
        "--n",
        "36",
        "--samples",
        "20",
        "--profile",
        "smoke",
        "--seed",
        "42",
    ];
    for verb in ["gen-data", "train", "bench"] {
        let mut cmd = Command::new(bin);
        cmd.arg(verb).args(common).arg("--out").arg(out).env("RUST_LOG", "warn");
        if verb == "bench" {
            cmd.args(["--methods", "jacobi,ic(0.1),gcvae,ic_matched"]);
        }
        let o = cmd.output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), || {
            format!("{verb} failed: {}", String::from_utf8_lossy(&o.stderr).trim())
        })?;
    }
    Ok(out.to_path_buf())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = cli_run(&tmp.path().join("first"))?;
    let b = cli_run(&tmp.path().join("second"))?;
    let manifest = |d: &Path| sha256_file(&d.join("data/manifest.json"));
    ensure(manifest(&a)? == manifest(&b)?, || "manifest hashes differ".into())?;
    let la = train_log_without_time(&a.join("model/train_log.csv"))?;
    let lb = train_log_without_time(&b.join("model/train_log.csv"))?;
    ensure(la == lb, || "training logs differ".into())?;
    let bench = |d: &Path| sha256_file(&d.join("bench/bench.csv"));
    ensure(bench(&a)? == bench(&b)?, || "benchmark CSVs differ".into())?;
    let ckpt = |d: &Path| sha256_file(&d.join("model/model.ckpt"));
    ensure(ckpt(&a)? == ckpt(&b)?, || "checkpoints differ".into())?;
    Ok(format!(
        "identical manifest hash, training CSV ({} rows; wall_seconds column excluded as it is clock time), benchmark CSV and checkpoint",
        la.len() - 1
    ))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default()
        )),
    }
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|v| v.contains(&k));

    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run_one = |k: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        if wanted(k) {
            let t = Instant::now();
            let r = guarded(f);
            let r = r.map(|d| format!("{d} [{:.1} s]", t.elapsed().as_secs_f64()));
            match &r {
                Ok(d) => println!("PASS  criterion {k:>2} {name}: {d}"),
                Err(e) => println!("FAIL  criterion {k:>2} {name}: {e}"),
            }
            results.push((k, name, r));
        }
    };
    run_one(1, "fem stencil oracle", &fem_stencil);
    run_one(2, "loss oracles", &loss_oracles);
    run_one(3, "gradient check", &gradients);
    run_one(4, "solver correctness", &solvers);
    run_one(5, "condition number oracle", &condition_oracle);
    if wanted(6) || wanted(7) || wanted(8) {
        let t = Instant::now();
        let run = guarded_run();
        let total = t.elapsed();
        run_one(6, "poisson ordering vs jacobi", &|| poisson_ordering(&run, total));
        run_one(7, "mask enforcement", &|| mask_enforcement(&run));
        run_one(8, "matched incomplete cholesky", &|| matched_ic(&run));
        drop(run.dir);
    }
    run_one(9, "biharmonic symmetry and definiteness", &biharmonic_spd);
    run_one(10, "determinism", &determinism);

    let failed = results.iter().filter(|(_, _, r)| r.is_err()).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn guarded_run() -> PoissonRun {
    match panic::catch_unwind(poisson_run) {
        Ok(r) => r,
        Err(_) => PoissonRun {
            dir: tempfile::tempdir().expect("temp dir"),
            cfg: RunConfig::for_family(Family::Poisson, Path::new(".")),
            report: None,
            train_time: Duration::ZERO,
            bench_time: Duration::ZERO,
            epochs: 0,
            error: Some("pipeline panicked".into()),
        },
    }
}

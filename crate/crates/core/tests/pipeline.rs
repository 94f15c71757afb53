//! Command pipeline on a tiny problem: generation, training, inference and
//! benchmarking through the library entry points.

use std::fs;
use std::path::Path;

use gcvae::fem::io::{read_dataset, Manifest};
use gcvae::fem::Family;
use gcvae::metrics::read_rows_csv;
use gcvae::model::{load_checkpoint, ModelProfile};
use gcvae::pipeline::{
    cmd_bench, cmd_gen_data, cmd_infer, cmd_plot, cmd_train, MaskPolicy, RunConfig, BENCH_CSV_FILE, PLOT_FILES,
    RESOLVED_CONFIG_FILE,
};
use gcvae::solvers::{pcg, spai_precond};
use gcvae::sparse::matrix_market;
use gcvae::training::TrainProfile;

fn smoke_config(root: &Path, family: Family, n: usize) -> RunConfig {
    let mut cfg = RunConfig::for_family(family, root);
    cfg.target_n = n;
    cfg.n_samples = 10;
    cfg.model_profile = ModelProfile::Smoke;
    cfg.train_profile = TrainProfile::Smoke;
    cfg.bench.methods = "jacobi,ic(0.1),gcvae,ic_matched".into();
    cfg
}

#[test]
fn smoke_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path(), Family::Poisson, 25);

    let manifest = cmd_gen_data(&cfg).unwrap();
    let m = Manifest::read(manifest.parent().unwrap()).unwrap();
    assert_eq!((m.train.len(), m.test.len(), m.n), (8, 2, 25));
    assert!(cfg.paths.data_dir.join(RESOLVED_CONFIG_FILE).exists());

    let summary = cmd_train(&cfg).unwrap();
    assert_eq!(summary.records.len(), 10);
    let model = load_checkpoint(&summary.checkpoint).unwrap();
    assert_eq!(model.config().matrix_dim, 25);

    let bench = cmd_bench(&cfg).unwrap();
    let rows = read_rows_csv(&bench.csv).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.sample_count == 2 && r.n == 25));
    let header = fs::read_to_string(&bench.csv).unwrap();
    assert!(header.starts_with("method,n,mean_iterations,mean_condition,mean_density,sample_count\n"));
    for f in PLOT_FILES {
        assert!(cfg.paths.bench_dir.join(f).exists(), "{f}");
    }
    let plots = cmd_plot(&[bench.csv.clone(), bench.csv.clone()], &dir.path().join("plots")).unwrap();
    assert_eq!(plots.len(), 3);

    // Inference on an unseen test matrix gives reproducible, distinct, mask-exact factors.
    let split = read_dataset(&cfg.paths.data_dir, false).unwrap();
    let s = &split.test[0];
    let a_path = dir.path().join("a.mtx");
    matrix_market::write_matrix(&a_path, &s.a).unwrap();
    let out1 = cmd_infer(
        &summary.checkpoint,
        &a_path,
        &MaskPolicy::Extend(0.0),
        3,
        9,
        &dir.path().join("i1"),
    )
    .unwrap();
    let out2 = cmd_infer(
        &summary.checkpoint,
        &a_path,
        &MaskPolicy::Extend(0.0),
        3,
        9,
        &dir.path().join("i2"),
    )
    .unwrap();
    assert_eq!(out1.len(), 3);
    assert!(out1[0].ends_with("R_000.mtx"));
    let texts: Vec<String> = out1.iter().map(|p| fs::read_to_string(p).unwrap()).collect();
    assert_ne!(texts[0], texts[1]);
    assert_ne!(texts[1], texts[2]);
    for (p, q) in out1.iter().zip(&out2) {
        assert_eq!(fs::read(p).unwrap(), fs::read(q).unwrap());
    }
    for p in &out1 {
        let r = matrix_market::read_matrix(p).unwrap();
        assert_eq!(r.nnz(), s.mask.nnz());
        assert!(s.mask.positions().all(|(i, j)| r.contains(i, j)));
        let (_, rep) = pcg(&s.a, &s.b, &spai_precond(&r).unwrap(), 1e-5, 10_000).unwrap();
        assert!(rep.converged);
    }
    let mask_path = dir.path().join("mask.mtx");
    matrix_market::write_mask(&mask_path, &s.mask).unwrap();
    let from_file = cmd_infer(
        &summary.checkpoint,
        &a_path,
        &MaskPolicy::File(mask_path),
        1,
        9,
        &dir.path().join("i3"),
    )
    .unwrap();
    assert_eq!(fs::read(&from_file[0]).unwrap(), fs::read(&out1[0]).unwrap());
}

#[test]
fn gen_data_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path(), Family::Biharmonic, 40);
    let first = fs::read(cmd_gen_data(&cfg).unwrap()).unwrap();
    let second = fs::read(cmd_gen_data(&cfg).unwrap()).unwrap();
    assert_eq!(first, second);
    let m = Manifest::read(&cfg.paths.data_dir).unwrap();
    assert_eq!(m.extra_fraction, 0.2);
    assert!(m.penalty.unwrap() > 0.0);
}

#[test]
fn infer_rejects_wrong_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path(), Family::Poisson, 16);
    cmd_gen_data(&cfg).unwrap();
    let summary = cmd_train(&cfg).unwrap();
    let a_path = dir.path().join("i.mtx");
    matrix_market::write_matrix(&a_path, &gcvae::CsrMatrix::identity(9)).unwrap();
    let err = cmd_infer(
        &summary.checkpoint,
        &a_path,
        &MaskPolicy::Extend(0.0),
        1,
        0,
        &dir.path().join("o"),
    )
    .unwrap_err();
    assert_eq!(err.category(), "dimension");
    assert!(err.to_string().contains("16x16"), "{err}");
}

#[test]
fn bench_requires_checkpoint_only_for_learned_methods() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke_config(dir.path(), Family::Poisson, 16);
    cmd_gen_data(&cfg).unwrap();
    let err = cmd_bench(&cfg).unwrap_err();
    assert_eq!(err.category(), "config");
    cfg.bench.methods = "jacobi".into();
    let out = cmd_bench(&cfg).unwrap();
    assert_eq!(out.report.rows.len(), 1);
    assert!(cfg.paths.bench_dir.join(BENCH_CSV_FILE).exists());
}

#[test]
fn invalid_config_leaves_existing_dataset_intact() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke_config(dir.path(), Family::Poisson, 16);
    cmd_gen_data(&cfg).unwrap();
    cfg.target_n = 0;
    assert!(cmd_gen_data(&cfg).is_err());
    assert!(read_dataset(&cfg.paths.data_dir, false).is_ok());
    assert!(!dir.path().join("data.partial").exists());
}

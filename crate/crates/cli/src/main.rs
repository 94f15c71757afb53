use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcvae::fem::Family;
use gcvae::model::ModelProfile;
use gcvae::pipeline::{cmd_bench, cmd_gen_data, cmd_infer, cmd_plot, cmd_train, MaskPolicy, Paths, RunConfig};
use gcvae::training::TrainProfile;
use gcvae::Result;

#[derive(Parser, Debug)]
#[command(
    name = "gcvae",
    version,
    about = "Learned sparse approximate inverse preconditioners"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset of stiffness matrices on one mesh.
    GenData(RunArgs),
    /// Train the generative model on a generated dataset.
    Train(RunArgs),
    /// Draw preconditioners for one matrix from a trained model.
    Infer(InferArgs),
    /// Compare preconditioners inside PCG on the test split.
    Bench(RunArgs),
    /// Plot one or more benchmark CSVs against n.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    family: Option<Family>,
    /// Target system size.
    #[arg(long)]
    n: Option<usize>,
    /// Number of matrices to generate.
    #[arg(long)]
    samples: Option<usize>,
    /// Fraction of extra mask entries relative to nnz(A).
    #[arg(long)]
    extra_fraction: Option<f64>,
    /// Model and training profile: poisson, biharmonic, small or smoke.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// PCG relative residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Comma-separated list, e.g. "jacobi,ic(0.12),gcvae,ic_matched".
    #[arg(long)]
    methods: Option<String>,
    /// Output root; data/, model/ and bench/ are created below it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Matrix Market file with the system matrix.
    #[arg(long)]
    matrix: PathBuf,
    /// Matrix Market pattern file; defaults to the pattern of the matrix.
    #[arg(long, conflicts_with = "extra_fraction")]
    mask: Option<PathBuf>,
    /// Extend the pattern of the matrix by this fraction of extra entries.
    #[arg(long)]
    extra_fraction: Option<f64>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Benchmark CSV files.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let root = args.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::for_family(args.family.unwrap_or(Family::Poisson), &root),
    };
    if let Some(f) = args.family {
        cfg.family = f;
    }
    if args.out.is_some() {
        cfg.paths = Paths::under(&root);
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.n {
        cfg.target_n = v;
    }
    if let Some(v) = args.samples {
        cfg.n_samples = v;
    }
    if let Some(v) = args.extra_fraction {
        cfg.extra_fraction = Some(v);
    }
    if let Some(p) = &args.profile {
        cfg.model_profile = p.parse::<ModelProfile>()?;
        cfg.train_profile = p.parse::<TrainProfile>()?;
    }
    if let Some(v) = args.epochs {
        cfg.train.epochs = Some(v);
    }
    if let Some(v) = args.learning_rate {
        cfg.train.learning_rate = Some(v);
    }
    if let Some(v) = args.tol {
        cfg.bench.tol = v;
    }
    if let Some(v) = args.max_iter {
        cfg.bench.max_iter = v;
    }
    if let Some(v) = &args.methods {
        cfg.bench.methods = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => {
            let manifest = cmd_gen_data(&resolve(&args)?)?;
            println!("manifest: {}", manifest.display());
        }
        Command::Train(args) => {
            let s = cmd_train(&resolve(&args)?)?;
            if let Some(last) = s.records.last() {
                println!(
                    "epochs: {} recon: {:.6e} kl: {:.4e}",
                    last.epoch, last.mean_recon, last.mean_kl
                );
            }
            println!("checkpoint: {}", s.checkpoint.display());
            println!("log: {}", s.log.display());
        }
        Command::Infer(args) => {
            let policy = match (&args.mask, args.extra_fraction) {
                (Some(p), _) => MaskPolicy::File(p.clone()),
                (None, f) => MaskPolicy::Extend(f.unwrap_or(0.0)),
            };
            let files = cmd_infer(
                &args.checkpoint,
                &args.matrix,
                &policy,
                args.count,
                args.seed,
                &args.out,
            )?;
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::Bench(args) => {
            let s = cmd_bench(&resolve(&args)?)?;
            println!("method,n,mean_iterations,mean_condition,mean_density,sample_count");
            for r in &s.report.rows {
                println!(
                    "{},{},{:.3},{:.6e},{:.6e},{}",
                    r.method, r.n, r.mean_iterations, r.mean_condition, r.mean_density, r.sample_count
                );
            }
            if let Some(m) = &s.report.matched {
                println!(
                    "matched droptol: {:.4e} iterations {:.3} target {:.3} gap {:.2}%",
                    m.droptol,
                    m.mean_iterations,
                    m.target_iterations,
                    100.0 * m.relative_gap
                );
            }
            println!("csv: {}", s.csv.display());
            println!("json: {}", s.json.display());
        }
        Command::Plot(args) => {
            for f in cmd_plot(&args.csv, &args.out)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn fail(category: &str, message: &str) -> ExitCode {
    let one_line = message.replace('\n', " ");
    eprintln!("error: category={category} message={}", one_line.trim());
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", &e.to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.category(), &e.to_string()),
    }
}

//! Reproducible end-to-end commands: dataset generation, training,
//! inference, benchmarking and plotting.

mod commands;
mod config;
mod plots;

pub use commands::{
    cmd_bench, cmd_gen_data, cmd_infer, cmd_plot, cmd_train, load_model_for, train_config, BenchSummary, MaskPolicy,
    SeedPlan, TrainSummary, BENCH_CSV_FILE, BENCH_JSON_FILE, CHECKPOINT_DIR, MODEL_FILE, TRAIN_LOG_FILE,
};
pub use config::{ensure_writable, BenchSettings, Paths, RunConfig, TrainOverrides, RESOLVED_CONFIG_FILE};
pub use plots::{plot_rows, PLOT_FILES};

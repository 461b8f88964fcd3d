//! End-to-end commands over a run directory: search, ensemble selection,
//! evaluation and convergence reporting.

mod commands;
mod config;
mod evaluate;
mod task;

pub use commands::{
    cmd_ensemble, cmd_evaluate, cmd_report, cmd_search, load_ensemble, load_run_config, EnsembleManifest,
    ManifestMember, RunFiles, SearchReport,
};
pub use config::{
    resolve_run_dir, DataConfig, EnsembleSection, Overrides, PodSection, RunConfig, SearchSection, SensorSection,
    SpaceConfig, SplitSection, TaskKind, TrainSection, RUN_ROOT_ENV,
};
pub use task::{prepare, PreparedTask, TrainingEvaluator};

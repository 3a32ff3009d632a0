//! Configuration, initial data, export and experiment pipelines.

pub mod config;
pub mod experiments;
pub mod export;
pub mod expr;
pub mod pgm;

pub use config::{parse_config, parse_config_with_overrides, ConfigIssue, ImmersionSpec, MomentumSpec, RunConfig};
pub use experiments::{run_config, run_experiment, Check, Experiment, ExperimentOutcome};
pub use export::{export_frames, obj_string, read_obj_vertices, write_obj, ExportSummary};
pub use expr::MomentumExpr;
pub use pgm::{momentum_from_gray, momentum_from_image, parse_pgm, read_pgm, GrayImage};

//! End-to-end audit runs, configuration and synthetic fixtures.

pub mod config;
pub mod run;
pub mod synth;

pub use config::{AuditConfig, MetricsConfig, Subset};
pub use run::{load_matrix, prepare, run_audit, sweep_command, AuditReport, GroupReport, Pipeline};
pub use synth::{synth_fixture, SynthFixture, SynthSpec, Template};

//! Config-driven experiments: parsing, execution, CSV output and the CLI.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;
pub mod presets;

pub use config::{ExperimentConfig, InitConfig, ProblemConfig, RawConfig, RunKind, RunSpec};
pub use experiment::{
    build_problem, compare, execute, execute_in, initial_point, median, repeat_seed, run_experiment, summarize,
    trace_slope, CompareRow, RunResult, SummaryRow,
};
pub use output::{
    compare_csv, compare_table, fmt_real, parse_trace_csv, summary_csv, trace_csv, write_run_outputs, TRACE_HEADER,
};
pub use presets::{find_preset, Preset, PRESETS};

//! Experiment harness: scenario runs, sweeps and result files.

pub mod emit;
pub mod scenario;
pub mod stats;
pub mod sweep;

pub use emit::{emit_results, read_csv, write_csv, write_markdown, CsvRow, Format, CSV_HEADER};
pub use scenario::{
    run_episode, run_scenario, run_scenario_with, summarize, EpisodeRecord, ScenarioConfig,
    ScenarioResult, ScenarioSummary,
};
pub use stats::{ci_disjoint, mean_ci95};
pub use sweep::{run_sweep, SweepAxis};

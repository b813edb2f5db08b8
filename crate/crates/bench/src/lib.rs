//! Harness around the dispatch solvers: single runs, parameter sweeps and
//! LR/ALR comparisons, with CSV traces and summary tables.

pub mod compare;
pub mod report;
pub mod run;
pub mod sweep;
pub mod table;
pub mod trace_csv;

pub use compare::{compare_methods, Comparison};
pub use report::{shared_values_per_iteration, Method, RunReport};
pub use run::{load_inputs, run_single, BenchError, ParamOverrides, RunOutput, RunParams};
pub use sweep::{load_sweep_spec, run_sweep, SweepParameter, SweepRow, SweepSpec};

//! Evaluation surface: metric reports, the linear probe, aggregated
//! posterior grids and the verification suite.

mod probe;
mod report;
pub mod verify;
mod viz;

pub use probe::{linear_probe, ProbeConfig, ProbeResult};
pub use report::{dump_metrics, evaluate, DumpReport, EvalReport, COLLAPSE_TOL, METRICS_SCHEMA_VERSION};
pub use verify::{run_verify, run_verify_with, CheckResult, VerifyReport, VerifySizes};
pub use viz::{aggregated_posterior_grid, grid_from_posteriors, VizGrid, DEFAULT_RESOLUTION, VIZ_EXTENT};

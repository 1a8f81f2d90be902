//! Benchmark Hamiltonians, scenarios and their reports.

pub mod presets;
pub mod report;
pub mod scenarios;

pub use presets::{load_hamiltonian, preset, HamiltonianSpec, DEFAULT_N, GOLDEN, PRESETS};
pub use report::{num, sha256_hex, Check, ExperimentReport, ManifestLine, RunManifest, Table, TOOL_VERSION};
pub use scenarios::{budget_secs, criteria, manifest_path, record_scenario, rerun_scenario, run_scenario, SCENARIOS};

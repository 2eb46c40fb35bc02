// SPDX-License-Identifier: Apache-2.0

//! Specification documents, the analysis pipeline and report emission.

mod analysis;
mod emit;
mod spec;

pub use analysis::{
    class_name, run_analysis, run_system, AnalysisOptions, AnalysisReport, Check, Relation, Section, SeriesArtifact,
    Stage, StageError,
};
pub use emit::{emit, series_csv, to_json_string, Format};
pub use spec::{
    from_matrix, parse_matrix, parse_spec, resolve, to_matrix, ChannelKind, ChannelSpec, MatrixSpec, ObservableSpec,
    StateKind, StateSpec, System, SystemSpec, SPEC_TOL,
};

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "QRECUR_THREADS";

/// Sizes the global rayon pool from `QRECUR_THREADS`. Returns the requested
/// count, or `None` when the variable is unset.
pub fn configure_threads_from_env() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| Error::BadParam(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

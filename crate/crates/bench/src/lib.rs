//! Fixtures shared by the benchmarks in `benches/`.

use pencil_transit::models::builtin;
use pencil_transit::{Analysis, AnalysisOptions, OracleOptions};

/// Analysis of a builtin model with default options.
pub fn analysis(name: &str) -> Analysis {
    Analysis::new(&builtin(name, &[]).expect("builtin model"), AnalysisOptions::default()).expect("analysis")
}

/// Oracle settings for a short run: a narrow window and a looser tolerance.
pub fn short_oracle() -> OracleOptions {
    OracleOptions { tol: 1e-9, match_distance: Some(0.5), ..Default::default() }
}

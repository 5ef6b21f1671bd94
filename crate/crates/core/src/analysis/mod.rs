//! Scale counting, prediction brackets, exponent fits and experiment runs.

mod brackets;
mod experiment;
mod exponent;
mod scales;

pub use brackets::{
    fast_separation_beta, fast_separation_curve, msd_prediction_bracket, BracketSource, PredictionBracket, Regime,
};
pub use experiment::{
    bracket_verdict, diffusivity_table, load_field, report, run_experiment, simulate_to_dir, write_csv_rows,
    AnalysisConfig, DiffusivityRow, ExperimentConfig, Manifest, RegimeKind, Resolved, RunRecord, ScaleRow, Verdict,
    VerdictRow, CODE_VERSION,
};
pub use exponent::{compare_to_curve, fit_exponent, ExponentRow, FitWindow, MIN_WINDOW};
pub use scales::{
    n_ef, n_ef_thresholds, n_simple, nu_pred, nu_window, nu_window_separated, p_of_t, p_of_t_constant, scale_count,
    ScaleCount, GAMMA_MINUS_ONE_CONVENTION,
};

//! Evaluation statistics for listening tests of rakugo TTS systems: score
//! normalisation anchored to the copy-synthesis reference, pairwise
//! Brunner-Munzel tests with Bonferroni correction, correlation and
//! regression, acoustic variability, and plot output.

pub mod acoustic;
pub mod error;
pub mod hypothesis;
pub mod normalize;
pub mod plots;
pub mod regression;
pub mod scores;

pub use acoustic::{
    acoustic_report, cov_entries, load_cov_csv, read_cov_csv, report_from_cov, write_cov_csv, AcousticReport, Association,
    CovEntry, CovRow, Measure, SystemAcoustics,
};
pub use error::{Result, StatsError};
pub use hypothesis::{
    bonferroni, brunner_munzel, midranks, pairwise_tests, write_results_csv, BrunnerMunzel, TestResult, DEFAULT_COMPARISONS,
    SIGNIFICANCE_LEVELS,
};
pub use normalize::{anchor_to_reference, mean_std, normalize_scores, normalize_scores_with, standardize_listeners, REFERENCE_SYSTEM};
pub use plots::{box_plot, emit_plots, scatter_plot, BoxStats, Plot, PlotInputs, Point};
pub use regression::{ols_regression, ols_regression_with, pearson_r, Regression};
pub use scores::{Question, Scale, ScoreRecord, ScoreTable};

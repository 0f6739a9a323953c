//! Nonparametric tests of "no regression" in a linear model whose errors
//! follow a nuisance autoregression, built on autoregression rank scores.

pub mod asymptotics;
pub mod data;
pub mod engine;
pub mod error;
pub mod lp;
pub mod quadrature;
pub mod rng;
pub mod scores;
pub mod simulation;
pub mod special;

pub use asymptotics::{
    chi2_cdf, chi2_quantile, chi2_sf, gamma_jf, noncentrality, predicted_power, InnovationDistribution,
    PowerPrediction,
};
pub use data::{
    ar_design_from_series, build_ar_design, design_diagnostics, load_dataset, AutoregressionDesign, Dataset,
    DesignDiagnostics, PresamplePolicy, RegressionDesign, Table,
};
pub use engine::{compute_statistic, project_design, run_test, run_test_full, ProjectedDesign, TestReport, TestRun};
pub use error::{Error, Result};
pub use lp::{
    check_feasibility, solve_quantile_fit, solve_rank_score_path, solve_rank_scores_at, QuantileFit,
    RankScorePath, RankScoreVector,
};
pub use scores::{eval_score, generate_scores, integrate_score, score_variance, ScoreKind, ScoreVector};
pub use simulation::{
    gen_ar_errors, gen_dataset, run_study, run_study_with_threads, DesignGenerator, SimulationConfig, StudyReport,
};

//! Monte Carlo checks of the large-volume behavior of the likelihood.
//!
//! Everything here runs at a fixed target density `mu`: each replication
//! simulates `l = floor(mu m)` points in a domain of volume `m`, replays it,
//! and keeps only small per-replication summaries. Reports are then reduced
//! from those summaries on a single thread.

mod algebra;
mod curves;
mod experiments;
mod martingale;

use thiserror::Error;

use crate::estimator::EstimatorError;
use crate::likelihood::LikelihoodError;
use crate::params::ParamsError;
use crate::simulator::SimulationError;
use crate::statistics::StatisticsError;

pub use algebra::{
    minor_determinant_check, q_matrix, random_minor_checks, rank_one_check, MinorCheck, MinorsReport, RankOneCheck,
};
pub use curves::{
    check_integral_relation, curves_from_replications, limit_curves, limit_information, IntegralResidual,
    LimitCurves,
};
pub use experiments::{
    jamming_density, mle_normality_experiment, mle_normality_report, run_replications, score_clt_experiment,
    score_clt_report, CltKind, CltReport, ExperimentConfig, FitRecord, IncrementMean, JammingEstimate, MleSummary,
    Replication, DEFAULT_NODES, MAX_FAILED_FIT_FRACTION,
};
pub use martingale::{martingale_mean_check, MartingaleReport};

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("replication {rep} (seed {seed}) jammed after {reached} of {requested} points; lower mu")]
    InfeasibleDensity {
        rep: usize,
        seed: u64,
        reached: usize,
        requested: usize,
    },
    #[error("{failed} of {reps} fits failed to converge")]
    UnstableRegime {
        failed: usize,
        reps: usize,
        report: Box<CltReport>,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Statistics(#[from] StatisticsError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Largest entrywise `|a - b| / |b|`.
pub fn max_relative_deviation(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max)
}

/// Trapezoid rule on a (not necessarily uniform) grid.
pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

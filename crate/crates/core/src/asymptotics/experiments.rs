use log::{debug, info};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curves::{curves_from_replications, limit_information, variance_bounds};
use super::martingale::centered_indicator;
use super::AsymptoticsError;
use crate::coverage::DEFAULT_RESOLUTION_FACTOR;
use crate::estimator::{confidence_intervals, fit_mle, EstimatorError, Existence, FitOptions};
use crate::likelihood::evaluate;
use crate::params::CsaParams;
use crate::simulator::{replication_seed, simulate_with, SimulationOptions, Stop};
use crate::statistics::replay;
use crate::stats;

pub const DEFAULT_NODES: usize = 64;
/// Fits may fail in at most this fraction of replications.
pub const MAX_FAILED_FIT_FRACTION: f64 = 0.05;
const PROJECTIONS: usize = 8;
const PROJECTION_SEED: u64 = 0x5EED_C0DE;

/// Settings shared by every replication experiment. The domain volume `m` is
/// the scale of `params.domain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: CsaParams,
    pub mu: f64,
    pub reps: usize,
    pub seed: u64,
    /// Grid edge for the Gamma quadrature; `R / 50` when absent.
    pub resolution: Option<f64>,
    pub nodes: usize,
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn new(params: CsaParams, mu: f64, reps: usize, seed: u64) -> Self {
        Self {
            params,
            mu,
            reps,
            seed,
            resolution: None,
            nodes: DEFAULT_NODES,
            jobs: 1,
        }
    }

    pub fn scale(&self) -> f64 {
        self.params.domain.scale()
    }

    /// `l = floor(mu m)`.
    pub fn target(&self) -> usize {
        (self.mu * self.scale()).floor() as usize
    }

    pub fn cell_edge(&self) -> f64 {
        self.resolution
            .unwrap_or(self.params.radius / DEFAULT_RESOLUTION_FACTOR)
    }

    /// `nodes` values `mu (i / (nodes - 1))^2`, from 0 to `mu` inclusive.
    ///
    /// The acceptance rates change fastest while the domain is still nearly
    /// empty, so the nodes are packed towards `lambda = 0`.
    pub fn lambda_grid(&self) -> Vec<f64> {
        let last = self.nodes - 1;
        (0..self.nodes)
            .map(|i| {
                if i == last {
                    self.mu
                } else {
                    let u = i as f64 / last as f64;
                    self.mu * u * u
                }
            })
            .collect()
    }

    /// Steps at which martingale increments are recorded.
    pub fn probe_steps(&self) -> Vec<usize> {
        let l = self.target();
        let mut s: Vec<usize> = [l / 4, l / 2, 3 * l / 4, l].into_iter().map(|s| s.max(1)).collect();
        s.dedup();
        s
    }

    fn validate(&self) -> Result<(), AsymptoticsError> {
        let bad = |m: String| Err(AsymptoticsError::InvalidInput(m));
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if self.target() < 1 {
            return bad("floor(mu m) is zero".into());
        }
        if self.reps < 2 {
            return bad("at least two replications are needed".into());
        }
        if self.nodes < 2 {
            return bad("the lambda grid needs at least two nodes".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub converged: bool,
    pub existence: Option<Existence>,
    /// Last Newton iterate (the estimate when converged).
    pub beta_hat: Vec<f64>,
    /// Whether the 95% interval of each component contains the true value.
    pub covered: Vec<bool>,
}

/// Summary of one simulated and replayed replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub rep: usize,
    pub seed: u64,
    /// Score at the true weights divided by `sqrt(m)`.
    pub score: Vec<f64>,
    /// Observed information at the true weights divided by `m`.
    pub information: Vec<Vec<f64>>,
    /// `Gamma_{., floor(lambda m)} / m` on the lambda grid.
    pub gamma_nodes: Vec<Vec<f64>>,
    /// `t_{., floor(lambda m)} / m` on the lambda grid.
    pub rho_nodes: Vec<Vec<f64>>,
    pub gamma0_monotone: bool,
    /// `xi_{k,i} - xibar_{k,i}` at the probe steps.
    pub increments: Vec<Vec<f64>>,
    pub fit: Option<FitRecord>,
}

fn run_one(cfg: &ExperimentConfig, rep: usize, fit: bool) -> Result<Replication, AsymptoticsError> {
    let seed = replication_seed(cfg.seed, rep as u64);
    let target = cfg.target();
    let order = cfg.params.order();
    let seq = simulate_with(&cfg.params, Stop::Count(target), seed, &SimulationOptions::default())?;
    if seq.len() < target {
        return Err(AsymptoticsError::InfeasibleDensity {
            rep,
            seed,
            reached: seq.len(),
            requested: target,
        });
    }
    let traj = replay(&seq, order, cfg.cell_edge())?;
    let m = cfg.scale();
    let beta = &cfg.params.beta;
    let eval = evaluate(&traj, beta)?;

    let mut gamma_nodes = Vec::with_capacity(cfg.nodes);
    let mut rho_nodes = Vec::with_capacity(cfg.nodes);
    for lambda in cfg.lambda_grid() {
        let k = ((lambda * m).floor() as usize).min(target);
        gamma_nodes.push(traj.gamma(k).iter().map(|g| g / m).collect());
        rho_nodes.push(traj.t_at(k).iter().map(|&t| t as f64 / m).collect());
    }
    let gamma0_monotone = (1..=target).all(|k| traj.gamma(k)[0] <= traj.gamma(k - 1)[0]);
    let increments = cfg
        .probe_steps()
        .into_iter()
        .map(|s| centered_indicator(&traj, beta.as_slice(), s))
        .collect();

    let fit = fit.then(|| {
        let outcome = fit_mle(&traj, &FitOptions::default());
        let result = match outcome {
            Ok(r) => r,
            Err(EstimatorError::NonConvergence { last }) => *last,
            Err(e) => {
                debug!("replication {rep}: fit failed: {e}");
                return FitRecord {
                    converged: false,
                    existence: None,
                    beta_hat: Vec::new(),
                    covered: Vec::new(),
                };
            }
        };
        let ok = result.converged && result.existence == Existence::Interior;
        let covered = match confidence_intervals(&result, 0.95) {
            Ok(ci) if ok => (0..order).map(|j| ci.contains(j, beta.as_slice()[j])).collect(),
            _ => Vec::new(),
        };
        FitRecord {
            converged: ok && covered.len() == order,
            existence: Some(result.existence),
            beta_hat: result.beta_hat.into_vec(),
            covered,
        }
    });

    let sm = m.sqrt();
    let info = &eval.information;
    Ok(Replication {
        rep,
        seed,
        score: eval.gradient.iter().map(|g| g / sm).collect(),
        information: (0..order)
            .map(|i| (0..order).map(|j| info[(i, j)] / m).collect())
            .collect(),
        gamma_nodes,
        rho_nodes,
        gamma0_monotone,
        increments,
        fit,
    })
}

/// Runs `cfg.reps` replications on `cfg.jobs` threads. Replication `r` uses
/// seed `replication_seed(cfg.seed, r)`, so results do not depend on the
/// thread count.
pub fn run_replications(cfg: &ExperimentConfig, fit: bool) -> Result<Vec<Replication>, AsymptoticsError> {
    cfg.validate()?;
    info!(
        "running {} replications of {} points at m = {} on {} thread(s)",
        cfg.reps,
        cfg.target(),
        cfg.scale(),
        cfg.jobs
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| AsymptoticsError::ThreadPool(e.to_string()))?;
    pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|r| run_one(cfg, r, fit))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltKind {
    /// `score(beta0) / sqrt(m)`.
    Score,
    /// `sqrt(m) (beta_hat - beta0)`.
    Mle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementMean {
    pub step: usize,
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleSummary {
    pub failed_fits: usize,
    /// Fraction of converged fits whose 95% interval contains the truth.
    pub coverage: Vec<f64>,
    /// Trapezoid limit information from the same replications.
    pub limit_information: Vec<Vec<f64>>,
    /// `1 / int lambda_i(Q) dlambda` with eigenvalues in increasing order.
    pub variance_bound_eigen: Vec<f64>,
    /// `1 / int Q_ii dlambda`.
    pub variance_bound_diagonal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub kind: CltKind,
    pub reps: usize,
    /// Replications entering the moments (converged fits for `Mle`).
    pub used: usize,
    pub seed: u64,
    pub scale: f64,
    pub mu: f64,
    pub radius: f64,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub reference_covariance: Vec<Vec<f64>>,
    pub skewness: Vec<f64>,
    pub excess_kurtosis: Vec<f64>,
    /// KS p-values of each studentized component against N(0, 1).
    pub ks_pvalues: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub projection_pvalues: Vec<f64>,
    pub increment_means: Vec<IncrementMean>,
    pub mle: Option<MleSummary>,
}

impl CltReport {
    pub fn max_relative_deviation(&self) -> f64 {
        super::max_relative_deviation(&self.covariance, &self.reference_covariance)
    }
}

fn projection_directions(n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
    (0..PROJECTIONS)
        .map(|_| {
            let v: Vec<f64> = (0..n)
                .map(|_| {
                    let u1: f64 = 1.0 - rng.gen::<f64>();
                    let u2: f64 = rng.gen();
                    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / norm).collect()
        })
        .collect()
}

fn moments(
    kind: CltKind,
    cfg: &ExperimentConfig,
    reps: usize,
    rows: &[Vec<f64>],
    reference_covariance: Vec<Vec<f64>>,
) -> CltReport {
    let n = cfg.params.order();
    let columns: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let sqrt_n = (rows.len() as f64).sqrt();
    let directions = projection_directions(n);
    let projection_pvalues = if n == 0 {
        Vec::new()
    } else {
        directions
            .iter()
            .map(|u| {
                let p: Vec<f64> = rows.iter().map(|r| r.iter().zip(u).map(|(a, b)| a * b).sum()).collect();
                stats::ks_normal_studentized(&p)
            })
            .collect()
    };
    CltReport {
        kind,
        reps,
        used: rows.len(),
        seed: cfg.seed,
        scale: cfg.scale(),
        mu: cfg.mu,
        radius: cfg.params.radius,
        beta: cfg.params.beta.as_slice().to_vec(),
        mean: stats::mean_vector(rows),
        standard_error: columns.iter().map(|c| (stats::variance(c)).sqrt() / sqrt_n).collect(),
        covariance: stats::covariance(rows),
        reference_covariance,
        skewness: columns.iter().map(|c| stats::skewness(c)).collect(),
        excess_kurtosis: columns.iter().map(|c| stats::excess_kurtosis(c)).collect(),
        ks_pvalues: columns.iter().map(|c| stats::ks_normal_studentized(c)).collect(),
        directions: if n == 0 { Vec::new() } else { directions },
        projection_pvalues,
        increment_means: Vec::new(),
        mle: None,
    }
}

/// Score moments against the mean scaled observed information.
pub fn score_clt_report(cfg: &ExperimentConfig, reps: &[Replication]) -> CltReport {
    let rows: Vec<Vec<f64>> = reps.iter().map(|r| r.score.clone()).collect();
    let n = cfg.params.order();
    let mut reference = vec![vec![0.0; n]; n];
    for r in reps {
        for i in 0..n {
            for j in 0..n {
                reference[i][j] += r.information[i][j] / reps.len() as f64;
            }
        }
    }
    let mut report = moments(CltKind::Score, cfg, reps.len(), &rows, reference);
    let sqrt_n = (reps.len() as f64).sqrt();
    report.increment_means = cfg
        .probe_steps()
        .into_iter()
        .enumerate()
        .map(|(p, step)| {
            let cols: Vec<Vec<f64>> = (0..n)
                .map(|k| reps.iter().map(|r| r.increments[p][k]).collect())
                .collect();
            IncrementMean {
                step,
                mean: cols.iter().map(|c| stats::mean(c)).collect(),
                standard_error: cols.iter().map(|c| stats::variance(c).sqrt() / sqrt_n).collect(),
            }
        })
        .collect();
    report
}

/// Moments of `sqrt(m) (beta_hat - beta0)` over converged fits against the
/// inverse limit information. Fails with `UnstableRegime` (carrying the
/// report) when more than 5% of fits did not converge.
pub fn mle_normality_report(cfg: &ExperimentConfig, reps: &[Replication]) -> Result<CltReport, AsymptoticsError> {
    let beta0 = cfg.params.beta.as_slice();
    let sm = cfg.scale().sqrt();
    let fits: Vec<&FitRecord> = reps
        .iter()
        .map(|r| {
            r.fit.as_ref().ok_or_else(|| {
                AsymptoticsError::InvalidInput("replications were run without fitting".into())
            })
        })
        .collect::<Result<_, _>>()?;
    let good: Vec<&FitRecord> = fits.iter().copied().filter(|f| f.converged).collect();
    let failed = fits.len() - good.len();
    if good.len() < 2 {
        return Err(AsymptoticsError::InvalidInput(format!("only {} fits converged", good.len())));
    }
    let rows: Vec<Vec<f64>> = good
        .iter()
        .map(|f| f.beta_hat.iter().zip(beta0).map(|(b, b0)| sm * (b - b0)).collect())
        .collect();

    let curves = curves_from_replications(cfg, reps);
    let j0 = limit_information(&curves, &cfg.params.beta, cfg.mu)?;
    let n = j0.nrows();
    let inverse = j0
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let to_rows = |m: &DMatrix<f64>| (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    let (eig, diag) = variance_bounds(&curves, &cfg.params.beta);

    let mut report = moments(CltKind::Mle, cfg, reps.len(), &rows, to_rows(&inverse));
    report.mle = Some(MleSummary {
        failed_fits: failed,
        coverage: (0..n)
            .map(|j| good.iter().filter(|f| f.covered[j]).count() as f64 / good.len() as f64)
            .collect(),
        limit_information: to_rows(&j0),
        variance_bound_eigen: eig,
        variance_bound_diagonal: diag,
    });
    if failed as f64 > MAX_FAILED_FIT_FRACTION * reps.len() as f64 {
        return Err(AsymptoticsError::UnstableRegime {
            failed,
            reps: reps.len(),
            report: Box::new(report),
        });
    }
    Ok(report)
}

pub fn score_clt_experiment(cfg: &ExperimentConfig) -> Result<CltReport, AsymptoticsError> {
    let reps = run_replications(cfg, false)?;
    Ok(score_clt_report(cfg, &reps))
}

pub fn mle_normality_experiment(cfg: &ExperimentConfig) -> Result<CltReport, AsymptoticsError> {
    let reps = run_replications(cfg, true)?;
    mle_normality_report(cfg, &reps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JammingEstimate {
    pub counts: Vec<usize>,
    pub mean_count: f64,
    /// `mean_count / m`.
    pub density: f64,
}

/// Empirical jamming density from `runs` until-jamming simulations with seeds
/// `replication_seed(seed, 0..runs)`.
pub fn jamming_density(
    params: &CsaParams,
    runs: usize,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<JammingEstimate, AsymptoticsError> {
    if runs == 0 {
        return Err(AsymptoticsError::InvalidInput("need at least one run".into()));
    }
    let counts = (0..runs)
        .map(|r| simulate_with(params, Stop::UntilJamming, replication_seed(seed, r as u64), opts).map(|s| s.len()))
        .collect::<Result<Vec<_>, _>>()?;
    let mean_count = counts.iter().sum::<usize>() as f64 / runs as f64;
    Ok(JammingEstimate {
        density: mean_count / params.domain.scale(),
        counts,
        mean_count,
    })
}

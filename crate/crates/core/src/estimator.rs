//! Maximum-likelihood fitting and normal-theory confidence intervals.
//!
//! The log-likelihood is concave in `theta = log beta` (a linear term minus a
//! log-sum-exp), so a damped Newton iteration on `theta` with a backtracking
//! line search converges to the unique maximizer whenever one exists, and
//! keeps every iterate positive.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::likelihood::{self, LikelihoodError};
use crate::params::{BetaVector, ParamsError};
use crate::statistics::Trajectory;

/// `z_{0.975}` to six decimals.
pub const Z_975: f64 = 1.959964;

/// Log-parameter magnitude beyond which the maximizer is taken to lie on the
/// boundary of the parameter space.
const DRIFT_LIMIT: f64 = 30.0;
/// Largest Newton step in log-parameter units.
const MAX_STEP: f64 = 5.0;
/// Largest remaining Newton step (log units) accepted at convergence.
const MAX_FINAL_STEP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("no convergence after {} iterations (|score| = {:.3e})", .last.iterations, .last.gradient_norm)]
    NonConvergence { last: Box<MleResult> },
    #[error("observed information is singular")]
    SingularInformation,
    #[error("confidence level {0} is outside (0, 1)")]
    BadLevel(f64),
    #[error("initial point: {0}")]
    BadInit(#[from] ParamsError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

/// Whether, and how, a positive maximizer exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum Existence {
    Interior,
    /// The likelihood increases as `beta_j -> 0` (typically `t_j = 0`).
    BoundaryZero(usize),
    /// The likelihood increases without bound as `beta_j -> infinity`.
    Divergent(usize),
    /// `beta_j` never enters the likelihood (`t_j = 0` and `Gamma_j = 0`).
    Unidentified(usize),
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub init: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub beta_hat: BetaVector,
    /// Observed information at `beta_hat`, row-major.
    pub information: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `max_j |dL/dbeta_j|` at exit.
    pub gradient_norm: f64,
    pub existence: Existence,
}

impl MleResult {
    pub fn information_matrix(&self) -> DMatrix<f64> {
        let n = self.information.len();
        DMatrix::from_fn(n, n, |i, j| self.information[i][j])
    }

    /// Inverse observed information.
    pub fn covariance(&self) -> Result<DMatrix<f64>, EstimatorError> {
        let info = self.information_matrix();
        if info.nrows() == 0 {
            return Ok(info);
        }
        info.cholesky()
            .map(|c| c.inverse())
            .ok_or(EstimatorError::SingularInformation)
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

struct Point {
    theta: Vec<f64>,
    beta: BetaVector,
    value: f64,
    gradient: Vec<f64>,
    information: DMatrix<f64>,
}

fn eval_at(traj: &Trajectory, theta: Vec<f64>) -> Result<Option<Point>, EstimatorError> {
    let beta = match BetaVector::new(theta.iter().map(|t| t.exp()).collect()) {
        Ok(b) => b,
        Err(_) => return Ok(None),
    };
    match likelihood::evaluate(traj, &beta) {
        Ok(e) => Ok(Some(Point {
            theta,
            beta,
            value: e.log_likelihood.value(),
            gradient: e.gradient,
            information: e.information,
        })),
        Err(LikelihoodError::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Sign analysis for components with `t_j = 0`.
fn structural_existence(traj: &Trajectory) -> Option<Existence> {
    for j in 1..=traj.order() {
        if traj.t()[j] == 0 {
            let touched = traj.gamma_rows().any(|row| row[j] > 0.0);
            return Some(if touched {
                Existence::BoundaryZero(j)
            } else {
                Existence::Unidentified(j)
            });
        }
    }
    None
}

fn result_from(p: &Point, iterations: usize, converged: bool, existence: Existence) -> MleResult {
    MleResult {
        beta_hat: p.beta.clone(),
        information: to_rows(&p.information),
        log_likelihood: p.value,
        iterations,
        converged,
        gradient_norm: inf_norm(&p.gradient),
        existence,
    }
}

/// Newton direction on `theta` for the concave objective; falls back to a
/// ridge-regularized system when the curvature is not numerically definite.
fn newton_direction(p: &Point) -> Vec<f64> {
    let n = p.theta.len();
    let b = p.beta.as_slice();
    let g = DVector::from_fn(n, |i, _| b[i] * p.gradient[i]);
    // -Hessian in theta
    let mut neg_h = DMatrix::from_fn(n, n, |i, j| b[i] * p.information[(i, j)] * b[j]);
    for i in 0..n {
        neg_h[(i, i)] -= b[i] * p.gradient[i];
    }
    let scale = (0..n).map(|i| neg_h[(i, i)].abs()).fold(1e-12, f64::max);
    let mut ridge = 0.0;
    for _ in 0..60 {
        let mut m = neg_h.clone();
        for i in 0..n {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&g);
            if d.iter().all(|v| v.is_finite()) {
                return d.iter().copied().collect();
            }
        }
        ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 10.0 };
    }
    g.iter().copied().collect()
}

pub fn fit_mle(traj: &Trajectory, opts: &FitOptions) -> Result<MleResult, EstimatorError> {
    let n = traj.order();
    let init = match &opts.init {
        Some(v) => BetaVector::new(v.clone())?,
        None => BetaVector::ones(n),
    };
    if init.order() != n {
        return Err(LikelihoodError::OrderMismatch {
            beta: init.order(),
            trajectory: n,
        }
        .into());
    }
    let theta0: Vec<f64> = init.as_slice().iter().map(|b| b.ln()).collect();
    let mut cur = eval_at(traj, theta0)?.ok_or(LikelihoodError::Infeasible { step: 0, value: 0.0 })?;

    if let Some(ex) = structural_existence(traj) {
        return Ok(result_from(&cur, 0, false, ex));
    }

    for iter in 0..opts.max_iter {
        let mut dir = newton_direction(&cur);
        // A small score alone is not enough: along a divergent direction the
        // score decays like 1/beta while the Newton step stays of order one.
        if inf_norm(&cur.gradient) <= opts.tol && inf_norm(&dir) <= MAX_FINAL_STEP {
            // One more full step costs a single evaluation and, being inside
            // the quadratic basin, takes the iterate to rounding level.
            let theta: Vec<f64> = cur.theta.iter().zip(&dir).map(|(t, d)| t + d).collect();
            if let Some(p) = eval_at(traj, theta)? {
                if inf_norm(&p.gradient) <= inf_norm(&cur.gradient) {
                    cur = p;
                }
            }
            let pd = n == 0 || cur.information.clone().cholesky().is_some();
            return Ok(result_from(&cur, iter, pd, Existence::Interior));
        }
        if let Some(j) = cur.theta.iter().position(|t| t.abs() > DRIFT_LIMIT) {
            let ex = if cur.theta[j] > 0.0 {
                Existence::Divergent(j + 1)
            } else {
                Existence::BoundaryZero(j + 1)
            };
            return Ok(result_from(&cur, iter, false, ex));
        }
        let big = inf_norm(&dir);
        if big > MAX_STEP {
            dir.iter_mut().for_each(|d| *d *= MAX_STEP / big);
        }
        let slope: f64 = dir
            .iter()
            .zip(cur.beta.as_slice())
            .zip(&cur.gradient)
            .map(|((d, b), g)| d * b * g)
            .sum();
        let mut step = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let theta: Vec<f64> = cur.theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            if let Some(p) = eval_at(traj, theta)? {
                let ascent = p.value >= cur.value + 1e-4 * step * slope.max(0.0);
                // Near the optimum the value is flat to rounding; accept steps
                // that shrink the score without a measurable loss.
                let flat = p.value >= cur.value - 1e-13 * cur.value.abs().max(1.0)
                    && inf_norm(&p.gradient) < inf_norm(&cur.gradient);
                if ascent || flat {
                    next = Some(p);
                    break;
                }
            }
            step *= 0.5;
        }
        match next {
            Some(p) => cur = p,
            // No ascent left in floating point: the iterate is as good as it gets.
            None => break,
        }
    }
    let last = result_from(&cur, opts.max_iter, false, Existence::Interior);
    if last.gradient_norm <= opts.tol && inf_norm(&newton_direction(&cur)) <= MAX_FINAL_STEP {
        let pd = cur.information.clone().cholesky().is_some();
        return Ok(MleResult { converged: pd, ..last });
    }
    Err(EstimatorError::NonConvergence { last: Box::new(last) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceIntervals {
    pub level: f64,
    pub estimate: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ConfidenceIntervals {
    pub fn contains(&self, j: usize, value: f64) -> bool {
        self.lower[j] <= value && value <= self.upper[j]
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }
}

/// `beta_hat_j +- z_{(1+level)/2} sqrt((J^{-1})_jj)`.
pub fn confidence_intervals(result: &MleResult, level: f64) -> Result<ConfidenceIntervals, EstimatorError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EstimatorError::BadLevel(level));
    }
    let cov = result.covariance()?;
    let z = normal_quantile(0.5 * (1.0 + level));
    let est = result.beta_hat.as_slice().to_vec();
    let mut lower = Vec::with_capacity(est.len());
    let mut upper = Vec::with_capacity(est.len());
    for (j, b) in est.iter().enumerate() {
        let var = cov[(j, j)];
        if !(var.is_finite() && var >= 0.0) {
            return Err(EstimatorError::SingularInformation);
        }
        let half = z * var.sqrt();
        lower.push(b - half);
        upper.push(b + half);
    }
    Ok(ConfidenceIntervals {
        level,
        estimate: est,
        lower,
        upper,
    })
}

/// Standard normal quantile, Wichura's AS 241 (PPND16); relative accuracy
/// about `1e-16` over `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

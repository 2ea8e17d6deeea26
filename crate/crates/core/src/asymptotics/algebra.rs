//! The information integrand `Q(beta, gamma)` and its determinant identities.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AsymptoticsError;
use crate::params::BetaVector;

fn validate(beta: &BetaVector, gamma: &[f64]) -> Result<f64, AsymptoticsError> {
    if gamma.len() != beta.order() + 1 {
        return Err(AsymptoticsError::InvalidInput(format!(
            "gamma has {} entries for order {}",
            gamma.len(),
            beta.order()
        )));
    }
    if let Some(g) = gamma.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(AsymptoticsError::InvalidInput(format!("gamma entry {g} is not a finite non-negative number")));
    }
    let z = total_weight(beta.as_slice(), gamma);
    if !(z > 0.0) {
        return Err(AsymptoticsError::InvalidInput("total weight is zero".into()));
    }
    Ok(z)
}

pub(crate) fn total_weight(beta: &[f64], gamma: &[f64]) -> f64 {
    gamma[0] + beta.iter().zip(&gamma[1..]).map(|(b, g)| b * g).sum::<f64>()
}

pub(crate) fn q_unchecked(beta: &[f64], gamma: &[f64]) -> DMatrix<f64> {
    let n = beta.len();
    let z = total_weight(beta, gamma);
    let g = &gamma[1..];
    DMatrix::from_fn(n, n, |i, j| {
        let cross = g[i] * g[j] / (z * z);
        if i == j {
            g[i] / (beta[i] * z) - cross
        } else {
            -cross
        }
    })
}

/// `Q_ij = delta_ij gamma_i / (beta_i Z) - gamma_i gamma_j / Z^2` with
/// `Z = gamma_0 + sum beta_i gamma_i`.
///
/// `gamma` holds `gamma_0 .. gamma_N`. Zero entries are accepted (the matrix
/// is then only semidefinite), negative or non-finite ones are rejected.
pub fn q_matrix(beta: &BetaVector, gamma: &[f64]) -> Result<DMatrix<f64>, AsymptoticsError> {
    validate(beta, gamma)?;
    Ok(q_unchecked(beta.as_slice(), gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorCheck {
    pub k: usize,
    pub closed_form: f64,
    pub numeric: f64,
}

impl MinorCheck {
    pub fn relative_error(&self) -> f64 {
        (self.closed_form - self.numeric).abs() / self.closed_form.abs()
    }
}

/// Leading `k x k` principal minor of `Q`, from the product formula and from
/// an LU factorization.
pub fn minor_determinant_check(beta: &BetaVector, gamma: &[f64], k: usize) -> Result<MinorCheck, AsymptoticsError> {
    let z = validate(beta, gamma)?;
    let n = beta.order();
    if k == 0 || k > n {
        return Err(AsymptoticsError::InvalidInput(format!("minor size {k} outside 1..={n}")));
    }
    let b = beta.as_slice();
    let tail: f64 = (k..n).map(|i| b[i] * gamma[i + 1]).sum();
    let prod: f64 = (0..k).map(|i| gamma[i + 1] / b[i]).product();
    let closed_form = (gamma[0] + tail) / z.powi(k as i32 + 1) * prod;
    let q = q_unchecked(b, gamma);
    let numeric = q.view((0, 0), (k, k)).clone_owned().lu().determinant();
    Ok(MinorCheck { k, closed_form, numeric })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneCheck {
    /// `a^T b`.
    pub predicted: f64,
    /// Real parts of the eigenvalues of `a b^T`, largest first.
    pub eigenvalues: Vec<f64>,
    pub max_imaginary: f64,
}

impl RankOneCheck {
    /// Largest deviation from `{a^T b, 0, ..., 0}`, relative to `|a^T b|`.
    pub fn relative_error(&self) -> f64 {
        let scale = self.predicted.abs().max(f64::MIN_POSITIVE);
        let head = (self.eigenvalues[0] - self.predicted).abs();
        let rest = self.eigenvalues[1..].iter().fold(0.0f64, |m, e| m.max(e.abs()));
        head.max(rest).max(self.max_imaginary) / scale
    }
}

/// Eigenvalues of the outer product `a b^T`.
pub fn rank_one_check(a: &[f64], b: &[f64]) -> Result<RankOneCheck, AsymptoticsError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(AsymptoticsError::InvalidInput("vectors must be non-empty and of equal length".into()));
    }
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i] * b[j]);
    let eig = m.complex_eigenvalues();
    let mut eigenvalues: Vec<f64> = eig.iter().map(|c| c.re).collect();
    eigenvalues.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
    Ok(RankOneCheck {
        predicted: a.iter().zip(b).map(|(x, y)| x * y).sum(),
        eigenvalues,
        max_imaginary: eig.iter().fold(0.0f64, |m, c| m.max(c.im.abs())),
    })
}

/// Determinant identities and definiteness on random inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorsReport {
    pub cases: usize,
    pub seed: u64,
    pub checks: Vec<MinorCheck>,
    pub max_relative_error: f64,
    pub cholesky_failures: usize,
    pub rank_one_max_error: f64,
}

/// Random positive inputs with `N <= 5`, every leading minor and one rank-one
/// product per case.
pub fn random_minor_checks(cases: usize, seed: u64) -> Result<MinorsReport, AsymptoticsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let mut cholesky_failures = 0;
    let mut rank_one_max_error: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.gen_range(1..=5);
        let beta: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-2.0..3.0))).collect();
        let gamma: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let beta = BetaVector::new(beta)?;
        let q = q_matrix(&beta, &gamma)?;
        if q.cholesky().is_none() {
            cholesky_failures += 1;
        }
        for k in 1..=n {
            checks.push(minor_determinant_check(&beta, &gamma, k)?);
        }
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        rank_one_max_error = rank_one_max_error.max(rank_one_check(&a, &b)?.relative_error());
    }
    let max_relative_error = checks.iter().map(|c| c.relative_error()).fold(0.0, f64::max);
    Ok(MinorsReport {
        cases,
        seed,
        checks,
        max_relative_error,
        cholesky_failures,
        rank_one_max_error,
    })
}

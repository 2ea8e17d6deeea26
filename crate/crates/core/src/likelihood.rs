//! Exact log-likelihood, score and observed information.
//!
//! With `Z_k = Gamma_{0,k} + sum_j beta_j Gamma_{j,k}`,
//!
//! ```text
//! L(beta)        = sum_j t_j log beta_j - sum_{k<l} log Z_k
//! dL/dbeta_i     = t_i / beta_i - sum_k Gamma_{i,k} / Z_k
//! J_ij = -d2L    = delta_ij t_i / beta_i^2 - sum_k Gamma_{i,k} Gamma_{j,k} / Z_k^2
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::BetaVector;
use crate::statistics::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("beta has order {beta}, trajectory has order {trajectory}")]
    OrderMismatch { beta: usize, trajectory: usize },
    #[error("denominator Z_{step} = {value} is not positive")]
    Infeasible { step: usize, value: f64 },
    #[error("beta_{index} = {value} is negative or non-finite")]
    InvalidBoundary { index: usize, value: f64 },
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Log-likelihood value; `NegInfinity` marks parameters outside the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LogLikelihood {
    Finite(f64),
    NegInfinity,
}

impl LogLikelihood {
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(v) => v,
            Self::NegInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Self::Finite(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub gradient: Vec<f64>,
    /// `Z_k`, `k = 0..l`.
    pub denominators: Vec<f64>,
}

fn check_order(traj: &Trajectory, beta: &BetaVector) -> Result<(), LikelihoodError> {
    if beta.order() != traj.order() {
        return Err(LikelihoodError::OrderMismatch {
            beta: beta.order(),
            trajectory: traj.order(),
        });
    }
    Ok(())
}

/// `Z = Gamma_0 + sum_j beta_j Gamma_j` for one Gamma row.
#[inline]
pub fn denominator(gamma: &[f64], beta: &[f64]) -> f64 {
    let mut s = CompensatedSum::default();
    s.add(gamma[0]);
    for (g, b) in gamma[1..].iter().zip(beta) {
        s.add(b * g);
    }
    s.value()
}

fn weighted_t(traj: &Trajectory, beta: &[f64]) -> CompensatedSum {
    traj.t()[1..]
        .iter()
        .zip(beta)
        .filter(|(&t, _)| t > 0)
        .map(|(&t, b)| t as f64 * b.ln())
        .collect()
}

pub fn log_likelihood(traj: &Trajectory, beta: &BetaVector) -> Result<LogLikelihood, LikelihoodError> {
    check_order(traj, beta)?;
    let b = beta.as_slice();
    let mut acc = weighted_t(traj, b);
    for row in traj.gamma_rows() {
        let z = denominator(row, b);
        if !(z > 0.0) {
            return Ok(LogLikelihood::NegInfinity);
        }
        acc.add(-z.ln());
    }
    Ok(LogLikelihood::Finite(acc.value()))
}

/// Limit evaluation allowing `beta_j = 0`: `-inf` whenever a zero weight
/// meets `t_j > 0`, otherwise the same formula with `0 log 0 = 0`.
pub fn boundary_log_likelihood(traj: &Trajectory, beta: &[f64]) -> Result<LogLikelihood, LikelihoodError> {
    if beta.len() != traj.order() {
        return Err(LikelihoodError::OrderMismatch {
            beta: beta.len(),
            trajectory: traj.order(),
        });
    }
    for (i, &b) in beta.iter().enumerate() {
        if !(b.is_finite() && b >= 0.0) {
            return Err(LikelihoodError::InvalidBoundary { index: i + 1, value: b });
        }
        if b == 0.0 && traj.t()[i + 1] > 0 {
            return Ok(LogLikelihood::NegInfinity);
        }
    }
    let mut acc = weighted_t(traj, beta);
    for row in traj.gamma_rows() {
        let z = denominator(row, beta);
        if !(z > 0.0) {
            return Ok(LogLikelihood::NegInfinity);
        }
        acc.add(-z.ln());
    }
    Ok(LogLikelihood::Finite(acc.value()))
}

pub fn score(traj: &Trajectory, beta: &BetaVector) -> Result<ScoreReport, LikelihoodError> {
    check_order(traj, beta)?;
    let b = beta.as_slice();
    let n = traj.order();
    let mut sums = vec![CompensatedSum::default(); n];
    let mut denominators = Vec::with_capacity(traj.len());
    for (k, row) in traj.gamma_rows().enumerate() {
        let z = denominator(row, b);
        if !(z > 0.0) {
            return Err(LikelihoodError::Infeasible { step: k, value: z });
        }
        denominators.push(z);
        for (s, g) in sums.iter_mut().zip(&row[1..]) {
            if *g != 0.0 {
                s.add(g / z);
            }
        }
    }
    let gradient = (0..n)
        .map(|i| traj.t()[i + 1] as f64 / b[i] - sums[i].value())
        .collect();
    Ok(ScoreReport {
        gradient,
        denominators,
    })
}

pub fn observed_information(traj: &Trajectory, beta: &BetaVector) -> Result<DMatrix<f64>, LikelihoodError> {
    Ok(evaluate(traj, beta)?.information)
}

/// Value, gradient and observed information from a single pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub log_likelihood: LogLikelihood,
    pub gradient: Vec<f64>,
    pub information: DMatrix<f64>,
}

pub fn evaluate(traj: &Trajectory, beta: &BetaVector) -> Result<Evaluation, LikelihoodError> {
    check_order(traj, beta)?;
    let b = beta.as_slice();
    let n = traj.order();
    let mut value = weighted_t(traj, b);
    let mut grad = vec![CompensatedSum::default(); n];
    let mut cross = vec![CompensatedSum::default(); n * n];
    for (k, row) in traj.gamma_rows().enumerate() {
        let z = denominator(row, b);
        if !(z > 0.0) {
            return Err(LikelihoodError::Infeasible { step: k, value: z });
        }
        value.add(-z.ln());
        let g = &row[1..];
        for i in 0..n {
            if g[i] == 0.0 {
                continue;
            }
            let ri = g[i] / z;
            grad[i].add(ri);
            for j in i..n {
                if g[j] != 0.0 {
                    cross[i * n + j].add(ri * (g[j] / z));
                }
            }
        }
    }
    let t = traj.t();
    let gradient = (0..n).map(|i| t[i + 1] as f64 / b[i] - grad[i].value()).collect();
    let mut info = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut v = -cross[i * n + j].value();
            if i == j {
                v += t[i + 1] as f64 / (b[i] * b[i]);
            }
            info[(i, j)] = v;
            info[(j, i)] = v;
        }
    }
    Ok(Evaluation {
        log_likelihood: LogLikelihood::Finite(value.value()),
        gradient,
        information: info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two points, the second a neighbor of the first.
    fn two_point() -> Trajectory {
        Trajectory::from_parts(1.0, 0.1, vec![vec![1.0, 0.0], vec![0.97, 0.03]], vec![0.95, 0.04], vec![0, 1])
            .unwrap()
    }

    #[test]
    fn hand_case() {
        let tr = two_point();
        for b1 in [0.3, 1.0, 7.5] {
            let l = log_likelihood(&tr, &BetaVector::new(vec![b1]).unwrap()).unwrap().value();
            let want = b1.ln() - (0.97 + b1 * 0.03f64).ln() - 1.0f64.ln();
            assert!((l - want).abs() < 1e-14);
        }
    }

    #[test]
    fn no_interaction_is_constant_in_beta() {
        let tr = Trajectory::from_parts(
            2.0,
            0.1,
            vec![vec![2.0, 0.0], vec![2.0, 0.0], vec![2.0, 0.0]],
            vec![2.0, 0.0],
            vec![0, 0, 0],
        )
        .unwrap();
        let want = -3.0 * 2.0f64.ln();
        for b in [0.01, 1.0, 100.0] {
            let beta = BetaVector::new(vec![b]).unwrap();
            assert!((log_likelihood(&tr, &beta).unwrap().value() - want).abs() < 1e-14);
            assert_eq!(observed_information(&tr, &beta).unwrap()[(0, 0)], 0.0);
        }
    }

    #[test]
    fn score_is_negative_when_t_vanishes() {
        let tr = Trajectory::from_parts(1.0, 0.1, vec![vec![1.0, 0.0], vec![0.97, 0.03]], vec![0.94, 0.06], vec![0, 0])
            .unwrap();
        for b in [1e-3, 1.0, 1e3] {
            let s = score(&tr, &BetaVector::new(vec![b]).unwrap()).unwrap();
            assert!(s.gradient[0] < 0.0);
        }
    }

    #[test]
    fn order_mismatch() {
        let tr = two_point();
        assert!(matches!(
            log_likelihood(&tr, &BetaVector::new(vec![1.0, 2.0]).unwrap()),
            Err(LikelihoodError::OrderMismatch { .. })
        ));
    }

    #[test]
    fn zero_denominator_is_typed_negative_infinity() {
        let tr = Trajectory::from_parts(1.0, 0.1, vec![vec![0.0, 0.0]], vec![0.0, 0.0], vec![0]).unwrap();
        let b = BetaVector::new(vec![1.0]).unwrap();
        assert_eq!(log_likelihood(&tr, &b).unwrap(), LogLikelihood::NegInfinity);
        assert!(matches!(score(&tr, &b), Err(LikelihoodError::Infeasible { .. })));
    }

    #[test]
    fn boundary_evaluation() {
        let tr = two_point();
        assert_eq!(boundary_log_likelihood(&tr, &[0.0]).unwrap(), LogLikelihood::NegInfinity);
        let tr0 = Trajectory::from_parts(1.0, 0.1, vec![vec![1.0, 0.0], vec![0.97, 0.03]], vec![0.94, 0.06], vec![0, 0])
            .unwrap();
        let v = boundary_log_likelihood(&tr0, &[0.0]).unwrap().value();
        assert!((v - (-(0.97f64).ln())).abs() < 1e-15);
        assert!(boundary_log_likelihood(&tr0, &[-1.0]).is_err());
    }

    #[test]
    fn information_is_symmetric() {
        let tr = Trajectory::from_parts(
            1.0,
            0.1,
            vec![vec![1.0, 0.0, 0.0], vec![0.9, 0.1, 0.0], vec![0.85, 0.1, 0.05]],
            vec![0.8, 0.12, 0.08],
            vec![0, 1, 2],
        )
        .unwrap();
        let j = observed_information(&tr, &BetaVector::new(vec![2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(j, j.transpose());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum = [1e16, 1.0, -1e16].into_iter().collect();
        assert_eq!(s.value(), 1.0);
    }
}

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::algebra::{q_unchecked, total_weight};
use super::experiments::{run_replications, ExperimentConfig, Replication};
use super::{trapezoid, AsymptoticsError};
use crate::params::BetaVector;

/// Replication averages of `Gamma_{j, floor(lambda m)} / m` and
/// `t_{j, floor(lambda m)} / m` on a grid `0 = lambda_0 < ... = mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCurves {
    pub lambda: Vec<f64>,
    /// `gamma[node][j]`, `j = 0..=N`.
    pub gamma: Vec<Vec<f64>>,
    /// `rho[node][j]`, `j = 0..=N`.
    pub rho: Vec<Vec<f64>>,
    pub reps: usize,
    pub scale: f64,
    pub mu: f64,
    pub seed: u64,
    /// `Gamma_0` never increased along any replication.
    pub gamma0_monotone: bool,
}

impl LimitCurves {
    pub fn order(&self) -> usize {
        self.gamma[0].len() - 1
    }

    fn check_order(&self, beta: &BetaVector) -> Result<(), AsymptoticsError> {
        if beta.order() != self.order() {
            return Err(AsymptoticsError::InvalidInput(format!(
                "beta of order {} for curves of order {}",
                beta.order(),
                self.order()
            )));
        }
        Ok(())
    }

    /// Nodes up to `upto`, with the last one linearly interpolated if `upto`
    /// falls between nodes.
    fn truncated(&self, upto: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut xs = Vec::new();
        let mut gs = Vec::new();
        for (i, &l) in self.lambda.iter().enumerate() {
            if l <= upto {
                xs.push(l);
                gs.push(self.gamma[i].clone());
            } else {
                if let (Some(&l0), Some(g0)) = (xs.last(), gs.last().cloned()) {
                    if upto > l0 {
                        let w = (upto - l0) / (l - l0);
                        let g = g0.iter().zip(&self.gamma[i]).map(|(a, b)| a + w * (b - a)).collect();
                        xs.push(upto);
                        gs.push(g);
                    }
                }
                break;
            }
        }
        (xs, gs)
    }
}

pub fn curves_from_replications(cfg: &ExperimentConfig, reps: &[Replication]) -> LimitCurves {
    let lambda = cfg.lambda_grid();
    let width = cfg.params.order() + 1;
    let mut gamma = vec![vec![0.0; width]; lambda.len()];
    let mut rho = vec![vec![0.0; width]; lambda.len()];
    for r in reps {
        for (acc, row) in gamma.iter_mut().zip(&r.gamma_nodes) {
            acc.iter_mut().zip(row).for_each(|(a, x)| *a += x);
        }
        for (acc, row) in rho.iter_mut().zip(&r.rho_nodes) {
            acc.iter_mut().zip(row).for_each(|(a, x)| *a += x);
        }
    }
    let n = reps.len() as f64;
    gamma.iter_mut().chain(rho.iter_mut()).flatten().for_each(|v| *v /= n);
    LimitCurves {
        lambda,
        gamma,
        rho,
        reps: reps.len(),
        scale: cfg.scale(),
        mu: cfg.mu,
        seed: cfg.seed,
        gamma0_monotone: reps.iter().all(|r| r.gamma0_monotone),
    }
}

pub fn limit_curves(cfg: &ExperimentConfig) -> Result<LimitCurves, AsymptoticsError> {
    let reps = run_replications(cfg, false)?;
    Ok(curves_from_replications(cfg, &reps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResidual {
    pub j: usize,
    /// `rho_j(mu)`.
    pub rho: f64,
    /// `int_0^mu beta_j gamma_j / Z dlambda`.
    pub integral: f64,
    pub residual: f64,
}

impl IntegralResidual {
    pub fn relative(&self) -> f64 {
        self.residual / self.rho
    }
}

/// Compares `rho_j(mu)` with the trapezoid integral of the acceptance rate of
/// `j`-neighbor locations, for `j = 1..=N`.
pub fn check_integral_relation(
    curves: &LimitCurves,
    beta: &BetaVector,
) -> Result<Vec<IntegralResidual>, AsymptoticsError> {
    curves.check_order(beta)?;
    let b = beta.as_slice();
    let last = curves.rho.last().expect("curves have nodes");
    Ok((1..=b.len())
        .map(|j| {
            let f: Vec<f64> = curves
                .gamma
                .iter()
                .map(|g| b[j - 1] * g[j] / total_weight(b, g))
                .collect();
            let integral = trapezoid(&curves.lambda, &f);
            IntegralResidual {
                j,
                rho: last[j],
                integral,
                residual: (last[j] - integral).abs(),
            }
        })
        .collect())
}

/// `int_0^mu Q(beta, gamma(lambda)) dlambda` by the trapezoid rule; `mu` may
/// not exceed the curves' own `mu`.
pub fn limit_information(curves: &LimitCurves, beta: &BetaVector, mu: f64) -> Result<DMatrix<f64>, AsymptoticsError> {
    curves.check_order(beta)?;
    if !(mu >= 0.0 && mu <= curves.mu * (1.0 + 1e-12)) {
        return Err(AsymptoticsError::InvalidInput(format!(
            "mu = {mu} outside [0, {}]",
            curves.mu
        )));
    }
    let (xs, gs) = curves.truncated(mu);
    let n = beta.order();
    let qs: Vec<DMatrix<f64>> = gs.iter().map(|g| q_unchecked(beta.as_slice(), g)).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let y: Vec<f64> = qs.iter().map(|q| q[(i, j)]).collect();
        trapezoid(&xs, &y)
    }))
}

/// Per-component variance lower bounds `1 / int g_ii dlambda`, once with
/// `g_ii` the `i`-th smallest eigenvalue of `Q(lambda)` and once with the
/// diagonal entry `Q_ii(lambda)`.
pub(crate) fn variance_bounds(curves: &LimitCurves, beta: &BetaVector) -> (Vec<f64>, Vec<f64>) {
    let n = beta.order();
    let mut eig_paths = vec![Vec::with_capacity(curves.lambda.len()); n];
    let mut diag_paths = vec![Vec::with_capacity(curves.lambda.len()); n];
    for g in &curves.gamma {
        let q = q_unchecked(beta.as_slice(), g);
        let mut ev: Vec<f64> = q.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for i in 0..n {
            eig_paths[i].push(ev[i]);
            diag_paths[i].push(q[(i, i)]);
        }
    }
    let inv = |paths: &[Vec<f64>]| paths.iter().map(|p| 1.0 / trapezoid(&curves.lambda, p)).collect();
    (inv(&eig_paths), inv(&diag_paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n_nodes: usize) -> LimitCurves {
        // Exact curves for the no-interaction model with beta = (1): a single
        // point covers area a, so gamma_0 = exp(-a lambda) in the Poisson
        // approximation, and the rest is gamma_1.
        let a: f64 = 0.5;
        let mu = 1.0;
        let lambda: Vec<f64> = (0..n_nodes).map(|i| mu * i as f64 / (n_nodes - 1) as f64).collect();
        let gamma = lambda.iter().map(|l| vec![(-a * l).exp(), 1.0 - (-a * l).exp()]).collect();
        let rho = lambda
            .iter()
            .map(|l| {
                let r1 = l - (1.0 - (-a * l).exp()) / a;
                vec![l - r1, r1]
            })
            .collect();
        LimitCurves {
            lambda,
            gamma,
            rho,
            reps: 1,
            scale: 1.0,
            mu,
            seed: 0,
            gamma0_monotone: true,
        }
    }

    #[test]
    fn integral_relation_on_exact_curves() {
        let c = synthetic(64);
        let beta = BetaVector::new(vec![1.0]).unwrap();
        let r = check_integral_relation(&c, &beta).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].relative() < 1e-3, "{r:?}");
    }

    #[test]
    fn information_is_monotone_in_mu() {
        let c = synthetic(64);
        let beta = BetaVector::new(vec![2.0]).unwrap();
        let j1 = limit_information(&c, &beta, 0.37).unwrap();
        let j2 = limit_information(&c, &beta, 1.0).unwrap();
        assert!(j2[(0, 0)] > j1[(0, 0)] && j1[(0, 0)] > 0.0);
        assert_eq!(limit_information(&c, &beta, 0.0).unwrap()[(0, 0)], 0.0);
        assert!(limit_information(&c, &beta, 1.5).is_err());
        assert!(limit_information(&c, &BetaVector::new(vec![]).unwrap(), 1.0).is_err());
    }

    #[test]
    fn bounds_coincide_in_one_dimension() {
        let c = synthetic(16);
        let beta = BetaVector::new(vec![2.0]).unwrap();
        let (e, d) = variance_bounds(&c, &beta);
        assert!((e[0] - d[0]).abs() <= 1e-12 * d[0]);
        let j = limit_information(&c, &beta, 1.0).unwrap();
        assert!((d[0] * j[(0, 0)] - 1.0).abs() < 1e-12);
    }
}

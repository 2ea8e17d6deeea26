//! Martingale decomposition of the score.
//!
//! With `xi_{k,i}` the indicator that point `i` had `k` neighbors and
//! `xibar_{k,i} = beta_k Gamma_{k,i-1} / Z_{i-1}` its conditional mean, the
//! increments `zeta_{k,i} = (xi_{k,i} - xibar_{k,i}) / beta_k` sum to the
//! score component `k` and satisfy `|zeta_{k,i}| <= 2 / beta_k`.

use serde::{Deserialize, Serialize};

use super::AsymptoticsError;
use crate::likelihood::{denominator, score, CompensatedSum};
use crate::params::BetaVector;
use crate::statistics::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    /// `zeta_{k,i}` for steps `i = 1..=l` (rows) and `k = 1..=N` (columns).
    pub increments: Vec<Vec<f64>>,
    pub score: Vec<f64>,
    pub reconstructed: Vec<f64>,
    /// `max_i |zeta_{k,i}|` per `k`.
    pub max_increment: Vec<f64>,
    /// `2 / beta_k` per `k`.
    pub bound: Vec<f64>,
}

impl MartingaleReport {
    /// Largest `|score_k - sum_i zeta_{k,i}| / max(1, |score_k|)`.
    pub fn reconstruction_error(&self) -> f64 {
        self.score
            .iter()
            .zip(&self.reconstructed)
            .map(|(s, r)| (s - r).abs() / s.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    pub fn within_bound(&self) -> bool {
        self.max_increment.iter().zip(&self.bound).all(|(m, b)| m <= b)
    }
}

/// `xi_{k,i} - xibar_{k,i}` for `k = 1..=N` at step `i` (1-based).
pub(crate) fn centered_indicator(traj: &Trajectory, beta: &[f64], step: usize) -> Vec<f64> {
    let row = traj.gamma(step - 1);
    let z = denominator(row, beta);
    let xi = traj.xi_path()[step - 1] as usize;
    (1..=beta.len())
        .map(|k| f64::from(u8::from(xi == k)) - beta[k - 1] * row[k] / z)
        .collect()
}

pub fn martingale_mean_check(traj: &Trajectory, beta: &BetaVector) -> Result<MartingaleReport, AsymptoticsError> {
    let s = score(traj, beta)?;
    let b = beta.as_slice();
    let n = b.len();
    let mut sums = vec![CompensatedSum::default(); n];
    let mut max_increment = vec![0.0f64; n];
    let mut increments = Vec::with_capacity(traj.len());
    for (i, (row, &z)) in traj.gamma_rows().zip(&s.denominators).enumerate() {
        let xi = traj.xi_path()[i] as usize;
        let zeta: Vec<f64> = (0..n)
            .map(|k| {
                let ind = if xi == k + 1 { 1.0 / b[k] } else { 0.0 };
                ind - row[k + 1] / z
            })
            .collect();
        for k in 0..n {
            sums[k].add(zeta[k]);
            max_increment[k] = max_increment[k].max(zeta[k].abs());
        }
        increments.push(zeta);
    }
    Ok(MartingaleReport {
        increments,
        score: s.gradient,
        reconstructed: sums.iter().map(CompensatedSum::value).collect(),
        max_increment,
        bound: b.iter().map(|b| 2.0 / b).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::params::CsaParams;
    use crate::simulator::simulate;
    use crate::statistics::replay;

    #[test]
    fn score_is_the_sum_of_increments() {
        let params = CsaParams::new(0.05, vec![4.0, 9.0], Domain::unit_square()).unwrap();
        let seq = simulate(&params, crate::simulator::Stop::Count(150), 3).unwrap();
        let traj = replay(&seq, 2, 0.001).unwrap();
        for beta in [vec![4.0, 9.0], vec![0.5, 30.0]] {
            let r = martingale_mean_check(&traj, &BetaVector::new(beta).unwrap()).unwrap();
            assert!(r.reconstruction_error() <= 1e-12);
            assert!(r.within_bound());
            assert_eq!(r.increments.len(), 150);
        }
        let c = centered_indicator(&traj, &[4.0, 9.0], 1);
        assert_eq!(c, vec![0.0, 0.0]);
    }
}

//! Model parameters: interaction radius, acceptance weights and domain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, GeometryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("beta_{index} = {value} must be strictly positive and finite")]
    NonPositiveBeta { index: usize, value: f64 },
    #[error("beta has {found} components, expected {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Weights `(beta_1, ..., beta_N)`, all strictly positive. `beta_0 = 1` is
/// implicit and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BetaVector(Vec<f64>);

impl BetaVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ParamsError> {
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(ParamsError::NonPositiveBeta {
                    index: i + 1,
                    value: v,
                });
            }
        }
        Ok(Self(values))
    }

    pub fn ones(order: usize) -> Self {
        Self(vec![1.0; order])
    }

    /// `N`.
    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `beta_j` with `beta_0 = 1` and `beta_j = 0` for `j > N`.
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.0.get(j - 1).copied().unwrap_or(0.0)
        }
    }

    /// `max_j beta_j` including `beta_0`.
    pub fn max_weight(&self) -> f64 {
        self.0.iter().copied().fold(1.0, f64::max)
    }

    pub fn min_weight(&self) -> f64 {
        self.0.iter().copied().fold(1.0, f64::min)
    }
}

impl TryFrom<Vec<f64>> for BetaVector {
    type Error = ParamsError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<BetaVector> for Vec<f64> {
    fn from(b: BetaVector) -> Self {
        b.0
    }
}

/// Full model specification for one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsaParams {
    pub radius: f64,
    pub beta: BetaVector,
    pub domain: Domain,
}

impl CsaParams {
    pub fn new(radius: f64, beta: Vec<f64>, domain: Domain) -> Result<Self, ParamsError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidRadius(radius).into());
        }
        Ok(Self {
            radius,
            beta: BetaVector::new(beta)?,
            domain,
        })
    }

    /// Hard-core special case: only `beta_0 = 1` is positive.
    pub fn rsa(radius: f64, domain: Domain) -> Result<Self, ParamsError> {
        Self::new(radius, Vec::new(), domain)
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.beta.order()
    }

    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        self.beta.weight(j)
    }

    /// Same model on a domain of a different volume.
    pub fn with_scale(&self, scale: f64) -> Result<Self, ParamsError> {
        Ok(Self {
            domain: Domain::new(self.domain.dim(), scale)?,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_follow_the_truncation_convention() {
        let b = BetaVector::new(vec![300.0, 500.0]).unwrap();
        assert_eq!(b.weight(0), 1.0);
        assert_eq!(b.weight(2), 500.0);
        assert_eq!(b.weight(3), 0.0);
        assert_eq!(b.max_weight(), 500.0);
        assert_eq!(BetaVector::new(vec![]).unwrap().max_weight(), 1.0);
    }

    #[test]
    fn rejects_non_positive_weights() {
        assert!(matches!(
            BetaVector::new(vec![1.0, 0.0]),
            Err(ParamsError::NonPositiveBeta { index: 2, .. })
        ));
        assert!(BetaVector::new(vec![f64::NAN]).is_err());
        assert!(CsaParams::new(-0.1, vec![], Domain::unit_square()).is_err());
    }

    #[test]
    fn serde_validates() {
        let ok: BetaVector = serde_json::from_str("[2.0, 3.5]").unwrap();
        assert_eq!(ok.as_slice(), &[2.0, 3.5]);
        assert!(serde_json::from_str::<BetaVector>("[2.0, -1]").is_err());
    }
}

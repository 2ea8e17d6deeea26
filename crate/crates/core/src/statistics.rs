//! Replay of an observed sequence into its sufficient statistics.
//!
//! The log-likelihood depends on the data only through the counts
//! `t_j = #{i : n(X_i, X(i-1)) = j}` and the areas `Gamma_{j,k}` of the
//! regions with exactly `j` neighbors among the first `k` points. A replay
//! feeds the points one by one through a [`CoverageField`] and records the
//! Gamma vector before every insertion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{CoverageError, CoverageField};
use crate::geometry::{Domain, GeometryError, Point, SpatialIndex};
use crate::simulator::PointSequence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatisticsError {
    #[error("point {index} has {count} neighbors at insertion, above the model order {order}")]
    OrderExceeded {
        index: usize,
        count: usize,
        order: usize,
    },
    #[error("stored insertion count of point {index} is {stored}, replay gives {replayed}")]
    CountMismatch {
        index: usize,
        stored: u32,
        replayed: usize,
    },
    #[error("inconsistent trajectory: {0}")]
    Inconsistent(String),
    #[error("empty point sequence")]
    Empty,
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-step statistics of one replayed sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    scale: f64,
    radius: f64,
    cell_edge: f64,
    order: usize,
    t: Vec<u64>,
    /// Row `k` (`k = 0..len`) holds `Gamma_{0,k} .. Gamma_{N,k}`.
    gamma_path: Vec<f64>,
    /// Gamma vector after the last point.
    final_gamma: Vec<f64>,
    xi_path: Vec<u32>,
}

impl Trajectory {
    /// Assembles a trajectory from precomputed statistics, checking the
    /// structural identities.
    pub fn from_parts(
        scale: f64,
        radius: f64,
        gamma_path: Vec<Vec<f64>>,
        final_gamma: Vec<f64>,
        xi_path: Vec<u32>,
    ) -> Result<Self, StatisticsError> {
        let width = final_gamma.len();
        if width == 0 {
            return Err(StatisticsError::Inconsistent("empty Gamma vector".into()));
        }
        if gamma_path.len() != xi_path.len() {
            return Err(StatisticsError::Inconsistent(format!(
                "{} Gamma rows for {} points",
                gamma_path.len(),
                xi_path.len()
            )));
        }
        if gamma_path.iter().any(|row| row.len() != width) {
            return Err(StatisticsError::Inconsistent("ragged Gamma rows".into()));
        }
        if gamma_path
            .iter()
            .flatten()
            .chain(&final_gamma)
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return Err(StatisticsError::Inconsistent("negative or non-finite Gamma".into()));
        }
        let order = width - 1;
        let mut t = vec![0u64; width];
        for (i, &xi) in xi_path.iter().enumerate() {
            let xi = xi as usize;
            if xi > order {
                return Err(StatisticsError::OrderExceeded {
                    index: i,
                    count: xi,
                    order,
                });
            }
            t[xi] += 1;
        }
        Ok(Self {
            scale,
            radius,
            cell_edge: 0.0,
            order,
            t,
            gamma_path: gamma_path.into_iter().flatten().collect(),
            final_gamma,
            xi_path,
        })
    }

    /// Number of points `l`.
    pub fn len(&self) -> usize {
        self.xi_path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi_path.is_empty()
    }

    /// Model order `N` used for the replay.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Domain volume `m`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Grid edge used for the Gamma quadrature (0 for assembled trajectories).
    pub fn cell_edge(&self) -> f64 {
        self.cell_edge
    }

    /// `t_0 .. t_N` over the full sequence.
    pub fn t(&self) -> &[u64] {
        &self.t
    }

    /// Insertion neighbor counts `n(X_i, X(i-1))`, `i = 1..=l`.
    pub fn xi_path(&self) -> &[u32] {
        &self.xi_path
    }

    /// `Gamma_{.,k}` for `k = 0..=l`.
    pub fn gamma(&self, k: usize) -> &[f64] {
        let w = self.order + 1;
        if k == self.len() {
            &self.final_gamma
        } else {
            &self.gamma_path[k * w..(k + 1) * w]
        }
    }

    /// Rows `Gamma_{.,0} .. Gamma_{.,l-1}`.
    pub fn gamma_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.gamma_path.chunks_exact(self.order + 1)
    }

    /// `t` over the first `k` points.
    pub fn t_at(&self, k: usize) -> Vec<u64> {
        let mut t = vec![0u64; self.order + 1];
        for &xi in &self.xi_path[..k] {
            t[xi as usize] += 1;
        }
        t
    }

    /// Copy with every area and the volume multiplied by `c`.
    pub fn rescaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        out.gamma_path.iter_mut().for_each(|g| *g *= c);
        out.final_gamma.iter_mut().for_each(|g| *g *= c);
        out
    }
}

/// Replays `points` (in acceptance order) at model order `order` with grid
/// edge `h`.
pub fn replay_points(
    domain: Domain,
    radius: f64,
    points: &[Point],
    order: usize,
    h: f64,
) -> Result<Trajectory, StatisticsError> {
    replay_inner(domain, radius, points, None, order, h)
}

/// Replays a sequence; stored insertion counts, if any, must agree with the
/// recomputed ones.
pub fn replay(seq: &PointSequence, order: usize, h: f64) -> Result<Trajectory, StatisticsError> {
    replay_inner(
        seq.domain,
        seq.radius,
        &seq.points,
        seq.insertion_counts.as_deref(),
        order,
        h,
    )
}

fn replay_inner(
    domain: Domain,
    radius: f64,
    points: &[Point],
    stored: Option<&[u32]>,
    order: usize,
    h: f64,
) -> Result<Trajectory, StatisticsError> {
    if points.is_empty() {
        return Err(StatisticsError::Empty);
    }
    let w = order + 1;
    let mut field = CoverageField::new(domain, radius, h)?;
    let mut index = SpatialIndex::new(domain, radius)?;
    let mut gamma_path = vec![0.0; points.len() * w];
    let mut xi_path = Vec::with_capacity(points.len());
    let mut t = vec![0u64; w];
    for (i, x) in points.iter().enumerate() {
        domain.check(x)?;
        let n = index.count_unchecked(x, radius);
        if n > order {
            return Err(StatisticsError::OrderExceeded {
                index: i,
                count: n,
                order,
            });
        }
        if let Some(&s) = stored.and_then(|s| s.get(i)) {
            if s as usize != n {
                return Err(StatisticsError::CountMismatch {
                    index: i,
                    stored: s,
                    replayed: n,
                });
            }
        }
        field.write_gamma(&mut gamma_path[i * w..(i + 1) * w]);
        field.add_point(x)?;
        index.insert(i, *x)?;
        xi_path.push(n as u32);
        t[n] += 1;
    }
    let mut final_gamma = vec![0.0; w];
    field.write_gamma(&mut final_gamma);
    if t[order] < 5 && order > 0 {
        log::warn!("t_{order} = {}: beta_{order} is weakly identified", t[order]);
    }
    Ok(Trajectory {
        scale: domain.scale(),
        radius,
        cell_edge: field.cell_edge(),
        order,
        t,
        gamma_path,
        final_gamma,
        xi_path,
    })
}

/// `t_j = sum_i 1{xi_i = j}`.
pub fn t_statistics(traj: &Trajectory) -> Vec<u64> {
    traj.t().to_vec()
}

/// `max_i n(X_i, X(i-1))`, a lower bound for the model order.
pub fn estimate_order(points: &[Point], radius: f64) -> Result<usize, StatisticsError> {
    let first = points.first().ok_or(StatisticsError::Empty)?;
    let dim = first.dim();
    let half = points
        .iter()
        .flat_map(|p| p.coords().iter().map(|c| c.abs()))
        .fold(0.0f64, f64::max)
        .max(radius)
        * (1.0 + 1e-9);
    let domain = Domain::new(dim, (2.0 * half).powi(dim as i32))?;
    let mut index = SpatialIndex::new(domain, radius)?;
    let mut best = 0;
    for (i, x) in points.iter().enumerate() {
        if x.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: x.dim(),
            }
            .into());
        }
        best = best.max(index.count_unchecked(x, radius));
        // Rounding in side() can put an extreme point a hair outside.
        let clamped: Vec<f64> = x
            .coords()
            .iter()
            .map(|c| c.clamp(-domain.half_side(), domain.half_side()))
            .collect();
        index.insert(i, Point::new(&clamped)?)?;
    }
    Ok(best)
}

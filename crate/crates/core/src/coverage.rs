//! Midpoint-grid quadrature of the neighbor-count field `u -> n(u, config)`.
//!
//! The domain is cut into `k^d` equal cells. Each cell carries the neighbor
//! count of its center; a histogram of those counts is kept current so the
//! areas `Gamma_j` (measure of the region with exactly `j` neighbors) are
//! available in `O(N)` after every insertion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, GeometryError, Point, MAX_DIM};
use crate::params::CsaParams;

/// Hard cap on the number of grid cells (about 2 GiB of counters).
const MAX_CELLS: usize = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverageError {
    #[error("grid resolution h = {h} must satisfy 0 < h <= R = {radius}")]
    BadResolution { h: f64, radius: f64 },
    #[error("grid of {0} cells is too large; increase h")]
    TooManyCells(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Default cell edge as a fraction of `R`.
pub const DEFAULT_RESOLUTION_FACTOR: f64 = 50.0;

/// Areas `Gamma_0 .. Gamma_N`, plus the area with more than `N` neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaVector {
    pub values: Vec<f64>,
    pub overflow: f64,
}

impl GammaVector {
    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() + self.overflow
    }
}

#[derive(Debug, Clone)]
struct LowerBounds {
    radius: f64,
    counts: Vec<u16>,
    tallies: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct CoverageField {
    domain: Domain,
    radius: f64,
    per_axis: usize,
    cell_edge: f64,
    cell_measure: f64,
    counts: Vec<u16>,
    tallies: Vec<u64>,
    inserted: usize,
    lower: Option<LowerBounds>,
}

fn bump(counts: &mut [u16], tallies: &mut Vec<u64>, cell: usize) {
    let old = counts[cell];
    let new = old
        .checked_add(1)
        .expect("cell neighbor count exceeded u16::MAX");
    counts[cell] = new;
    tallies[old as usize] -= 1;
    if tallies.len() <= new as usize {
        tallies.resize(new as usize + 1, 0);
    }
    tallies[new as usize] += 1;
}

impl CoverageField {
    /// Empty field with cell edge close to `h`; the realized edge is
    /// `side / round(side / h)` so the cells tile the domain exactly.
    pub fn new(domain: Domain, radius: f64, h: f64) -> Result<Self, CoverageError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidRadius(radius).into());
        }
        if !(h.is_finite() && h > 0.0 && h <= radius) {
            return Err(CoverageError::BadResolution { h, radius });
        }
        if h > radius / 10.0 {
            log::warn!("coarse coverage grid: h = {h} > R/10");
        }
        let side = domain.side();
        let per_axis = ((side / h).round() as usize).max(1);
        let total = per_axis
            .checked_pow(domain.dim() as u32)
            .filter(|&t| t <= MAX_CELLS)
            .ok_or(CoverageError::TooManyCells(usize::MAX))?;
        let cell_edge = side / per_axis as f64;
        let cell_measure = cell_edge.powi(domain.dim() as i32);
        Ok(Self {
            domain,
            radius,
            per_axis,
            cell_edge,
            cell_measure,
            counts: vec![0; total],
            tallies: vec![total as u64],
            inserted: 0,
            lower: None,
        })
    }

    /// Field at the default resolution `R / 50`.
    pub fn with_default_resolution(domain: Domain, radius: f64) -> Result<Self, CoverageError> {
        Self::new(domain, radius, radius / DEFAULT_RESOLUTION_FACTOR)
    }

    /// Additionally track, per cell, how many points lie within
    /// `R - half_diagonal` of its center. Every location inside the cell has
    /// at least that many neighbors. Must be enabled before any insertion.
    pub fn track_lower_bounds(&mut self) {
        assert_eq!(self.inserted, 0, "lower bounds must be enabled on an empty field");
        let half_diag = 0.5 * self.cell_edge * (self.domain.dim() as f64).sqrt();
        self.lower = Some(LowerBounds {
            radius: self.radius - half_diag * (1.0 + 1e-9),
            counts: vec![0; self.counts.len()],
            tallies: vec![self.counts.len() as u64],
        });
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Realized cell edge.
    pub fn cell_edge(&self) -> f64 {
        self.cell_edge
    }

    /// `h^d`.
    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    pub fn cells_per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn cell_count(&self) -> usize {
        self.counts.len()
    }

    pub fn inserted(&self) -> usize {
        self.inserted
    }

    #[inline]
    fn center_coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.cell_edge - self.domain.half_side()
    }

    fn split(&self, mut cell: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for slot in idx.iter_mut().take(self.domain.dim()) {
            *slot = cell % self.per_axis;
            cell /= self.per_axis;
        }
        idx
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let idx = self.split(cell);
        let mut c = [0.0; MAX_DIM];
        for k in 0..self.domain.dim() {
            c[k] = self.center_coord(idx[k]);
        }
        Point::from_array(c, self.domain.dim())
    }

    /// Maps `u` in `[0,1)^d` onto cell `cell`.
    pub(crate) fn point_in_cell(&self, cell: usize, u: [f64; MAX_DIM]) -> Point {
        let idx = self.split(cell);
        let h = self.domain.half_side();
        let mut c = [0.0; MAX_DIM];
        for k in 0..self.domain.dim() {
            c[k] = ((idx[k] as f64 + u[k]) * self.cell_edge - h).clamp(-h, h);
        }
        Point::from_array(c, self.domain.dim())
    }

    /// Stored neighbor count of the center of `cell`.
    pub fn count_at(&self, cell: usize) -> u16 {
        self.counts[cell]
    }

    /// Lower bound on the neighbor count over all of `cell`, if tracked.
    pub fn lower_bound_at(&self, cell: usize) -> Option<u16> {
        self.lower.as_ref().map(|l| l.counts[cell])
    }

    /// Inclusive index range of cell centers within `reach` of `x` along one
    /// axis, padded by one cell; the exact distance test happens per cell.
    fn axis_range(&self, x: f64, reach: f64) -> (usize, usize) {
        let h = self.domain.half_side();
        let lo = ((x - reach + h) / self.cell_edge - 0.5).floor() - 1.0;
        let hi = ((x + reach + h) / self.cell_edge - 0.5).ceil() + 1.0;
        let max = (self.per_axis - 1) as f64;
        (lo.clamp(0.0, max) as usize, hi.clamp(0.0, max) as usize)
    }

    /// Visits every cell whose center lies within `radius` of `x`
    /// (inclusive), using the same arithmetic as [`Point::dist_sq`].
    fn for_each_cell_within(&self, x: &Point, radius: f64, mut f: impl FnMut(usize)) {
        if radius < 0.0 {
            return;
        }
        let d = self.domain.dim();
        let raw = x.raw();
        let r2 = radius * radius;
        let n = self.per_axis;
        let (z0, z1) = if d > 2 { self.axis_range(raw[2], radius) } else { (0, 0) };
        let (y0, y1) = if d > 1 { self.axis_range(raw[1], radius) } else { (0, 0) };
        for iz in z0..=z1 {
            let dz = if d > 2 { self.center_coord(iz) - raw[2] } else { 0.0 };
            let dz2 = dz * dz;
            if dz2 > r2 {
                continue;
            }
            for iy in y0..=y1 {
                let dy = if d > 1 { self.center_coord(iy) - raw[1] } else { 0.0 };
                let dy2 = dy * dy;
                if dy2 + dz2 > r2 * (1.0 + 1e-12) {
                    continue;
                }
                let reach = (r2 - dy2 - dz2).max(0.0).sqrt();
                let (x0, x1) = self.axis_range(raw[0], reach);
                let row = n * (iy + n * iz);
                for ix in x0..=x1 {
                    let dx = self.center_coord(ix) - raw[0];
                    if dx * dx + dy2 + dz2 <= r2 {
                        f(row + ix);
                    }
                }
            }
        }
    }

    /// Increments the count of every cell whose center is within `R` of `x`.
    pub fn add_point(&mut self, x: &Point) -> Result<(), CoverageError> {
        self.domain.check(x)?;
        let mut counts = std::mem::take(&mut self.counts);
        let mut tallies = std::mem::take(&mut self.tallies);
        self.for_each_cell_within(x, self.radius, |c| bump(&mut counts, &mut tallies, c));
        self.counts = counts;
        self.tallies = tallies;
        if let Some(mut lower) = self.lower.take() {
            self.for_each_cell_within(x, lower.radius, |c| {
                bump(&mut lower.counts, &mut lower.tallies, c)
            });
            self.lower = Some(lower);
        }
        self.inserted += 1;
        Ok(())
    }

    /// Number of cells whose center has exactly `j` neighbors.
    pub fn tally(&self, j: usize) -> u64 {
        self.tallies.get(j).copied().unwrap_or(0)
    }

    pub fn tallies(&self) -> &[u64] {
        &self.tallies
    }

    /// `Gamma_j = h^d * #{cells with count j}`, `j = 0..=order`.
    pub fn gamma_stats(&self, order: usize) -> GammaVector {
        let mut values = vec![0.0; order + 1];
        self.write_gamma(&mut values);
        let over: u64 = self.tallies.iter().skip(order + 1).sum();
        GammaVector {
            values,
            overflow: over as f64 * self.cell_measure,
        }
    }

    /// Writes `Gamma_0 ..= Gamma_{out.len()-1}` into `out`.
    pub fn write_gamma(&self, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.tally(j) as f64 * self.cell_measure;
        }
    }

    /// Cells whose center count is at most `order`.
    pub fn admissible_cells(&self, order: usize) -> u64 {
        self.tallies.iter().take(order + 1).sum()
    }

    /// Total area with positive acceptance weight, `sum_{j: beta_j > 0} Gamma_j`.
    pub fn admissible_area(&self, params: &CsaParams) -> f64 {
        self.admissible_cells(params.order()) as f64 * self.cell_measure
    }

    /// Jamming: less than one cell of admissible area remains.
    pub fn is_jammed(&self, order: usize) -> bool {
        self.admissible_cells(order) == 0
    }

    /// Cells that may contain admissible locations (lower bound `<= order`).
    pub fn candidate_cells(&self, order: usize) -> Option<u64> {
        self.lower
            .as_ref()
            .map(|l| l.tallies.iter().take(order + 1).sum())
    }

    /// Histogram of counts recomputed from scratch.
    pub fn recount_tallies(&self) -> Vec<u64> {
        let max = self.counts.iter().copied().max().unwrap_or(0) as usize;
        let mut out = vec![0u64; max + 1];
        for &c in &self.counts {
            out[c as usize] += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::neighbor_count;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn lens_area(r: f64, s: f64) -> f64 {
        2.0 * r * r * (s / (2.0 * r)).acos() - 0.5 * s * (4.0 * r * r - s * s).sqrt()
    }

    #[test]
    fn empty_field_is_all_gamma_zero() {
        let f = CoverageField::with_default_resolution(Domain::unit_square(), 0.02).unwrap();
        assert_eq!(f.cells_per_axis(), 2500);
        assert_eq!(f.cell_count(), 2500 * 2500);
        let g = f.gamma_stats(2);
        assert!((g.values[0] - 1.0).abs() < 1e-12);
        assert_eq!(&g.values[1..], &[0.0, 0.0]);
    }

    #[test]
    fn cell_count_is_product_of_rounded_axes() {
        let dom = Domain::new(3, 2.0).unwrap();
        let f = CoverageField::new(dom, 0.2, 0.03).unwrap();
        let k = (dom.side() / 0.03).round() as usize;
        assert_eq!(f.cell_count(), k * k * k);
    }

    #[test]
    fn rejects_bad_resolution() {
        let d = Domain::unit_square();
        assert!(CoverageField::new(d, 0.02, 0.0).is_err());
        assert!(CoverageField::new(d, 0.02, -1.0).is_err());
        assert!(CoverageField::new(d, 0.02, 0.03).is_err());
    }

    #[test]
    fn single_disk_area() {
        let r = 0.05;
        let mut f = CoverageField::with_default_resolution(Domain::unit_square(), r).unwrap();
        f.add_point(&Point::xy(0.013, -0.021)).unwrap();
        let g1 = f.gamma_stats(1).values[1];
        assert!((g1 / (PI * r * r) - 1.0).abs() < 0.01, "{g1}");
    }

    #[test]
    fn lens_area_matches() {
        let r = 0.05;
        let s = 0.06;
        let mut f = CoverageField::with_default_resolution(Domain::unit_square(), r).unwrap();
        f.add_point(&Point::xy(-0.03, 0.0)).unwrap();
        f.add_point(&Point::xy(-0.03 + s, 0.0)).unwrap();
        let g = f.gamma_stats(2);
        let want = lens_area(r, s);
        assert!((g.values[2] / want - 1.0).abs() < 0.01);
        assert!((g.values[1] - (2.0 * PI * r * r - 2.0 * want)).abs() < 0.01 * PI * r * r);
    }

    #[test]
    fn halving_h_stays_within_perimeter_bound() {
        let r = 0.05;
        let mut prev_err = f64::INFINITY;
        let mut prev = None;
        for k in [10.0, 20.0, 40.0] {
            let h = r / k;
            let mut f = CoverageField::new(Domain::unit_square(), r, h).unwrap();
            f.add_point(&Point::xy(0.1234, 0.0567)).unwrap();
            let g1 = f.gamma_stats(1).values[1];
            if let Some(p) = prev {
                let diff: f64 = g1 - p;
                assert!(diff.abs() < 2.0 * (2.0 * h) * (2.0 * PI * r));
            }
            let err = (g1 - PI * r * r).abs();
            assert!(err <= prev_err * 1.5 + 1e-12, "{err} {prev_err}");
            prev_err = err;
            prev = Some(g1);
        }
    }

    #[test]
    fn partition_and_incremental_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dom = Domain::unit_square();
        let r = 0.08;
        let mut f = CoverageField::new(dom, r, r / 20.0).unwrap();
        let mut pts = Vec::new();
        for _ in 0..100 {
            let p = dom.from_unit([rng.gen(), rng.gen(), 0.0]);
            f.add_point(&p).unwrap();
            pts.push(p);
            assert_eq!(f.tallies().iter().sum::<u64>(), f.cell_count() as u64);
            let fresh = f.recount_tallies();
            let n = fresh.len().max(f.tallies().len());
            for j in 0..n {
                assert_eq!(fresh.get(j).copied().unwrap_or(0), f.tally(j));
            }
            let g = f.gamma_stats(3);
            assert!((g.total() - 1.0).abs() < 1e-9);
        }
        for _ in 0..100 {
            let cell = rng.gen_range(0..f.cell_count());
            let c = f.cell_center(cell);
            assert_eq!(f.count_at(cell) as usize, neighbor_count(&c, &pts, r).unwrap());
        }
    }

    #[test]
    fn lower_bounds_never_exceed_counts_anywhere_in_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dom = Domain::unit_square();
        let r = 0.1;
        let mut f = CoverageField::new(dom, r, r / 10.0).unwrap();
        f.track_lower_bounds();
        let mut pts = Vec::new();
        for _ in 0..60 {
            let p = dom.from_unit([rng.gen(), rng.gen(), 0.0]);
            f.add_point(&p).unwrap();
            pts.push(p);
        }
        for _ in 0..2000 {
            let cell = rng.gen_range(0..f.cell_count());
            let q = f.point_in_cell(cell, [rng.gen(), rng.gen(), 0.0]);
            let n = neighbor_count(&q, &pts, r).unwrap();
            assert!(f.lower_bound_at(cell).unwrap() as usize <= n);
        }
    }

    #[test]
    fn works_in_one_and_three_dimensions() {
        let d1 = Domain::new(1, 1.0).unwrap();
        let mut f = CoverageField::new(d1, 0.1, 0.001).unwrap();
        f.add_point(&Point::new(&[0.0]).unwrap()).unwrap();
        assert!((f.gamma_stats(1).values[1] - 0.2).abs() < 2e-3);

        let d3 = Domain::new(3, 1.0).unwrap();
        let mut f = CoverageField::new(d3, 0.2, 0.01).unwrap();
        f.add_point(&Point::new(&[0.0, 0.0, 0.0]).unwrap()).unwrap();
        let ball = 4.0 / 3.0 * PI * 0.2f64.powi(3);
        assert!((f.gamma_stats(1).values[1] / ball - 1.0).abs() < 0.01);
    }

    #[test]
    fn outside_point_is_rejected() {
        let mut f = CoverageField::new(Domain::unit_square(), 0.1, 0.01).unwrap();
        assert!(f.add_point(&Point::xy(0.0, 0.7)).is_err());
        assert_eq!(f.inserted(), 0);
    }
}

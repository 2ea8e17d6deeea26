//! Points, cubic domains, and fixed-radius neighbor counting.
//!
//! Neighbors are counted with an inclusive Euclidean test: `y` is a neighbor
//! of `x` iff `|x - y| <= R`. A point exactly at distance `R` counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported dimension {0} (must be 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("non-finite coordinate in point")]
    NonFinite,
    #[error("domain scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
}

/// A point in `R^d`, `d <= 3`. Unused trailing coordinates are held at zero
/// so distances can be computed over the full backing array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self, GeometryError> {
        let dim = coords.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut buf = [0.0; MAX_DIM];
        buf[..dim].copy_from_slice(coords);
        Ok(Self {
            coords: buf,
            dim: dim as u8,
        })
    }

    /// Planar shorthand.
    pub fn xy(x: f64, y: f64) -> Self {
        Self {
            coords: [x, y, 0.0],
            dim: 2,
        }
    }

    pub(crate) fn from_array(coords: [f64; MAX_DIM], dim: usize) -> Self {
        debug_assert!((1..=MAX_DIM).contains(&dim));
        Self {
            coords,
            dim: dim as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub(crate) fn raw(&self) -> &[f64; MAX_DIM] {
        &self.coords
    }

    #[inline]
    pub fn dist_sq(&self, other: &Point) -> f64 {
        let a = &self.coords;
        let b = &other.coords;
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        let dz = a[2] - b[2];
        dx * dx + dy * dy + dz * dz
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Point::new(&v).map_err(serde::de::Error::custom)
    }
}

/// The cube `m^{1/d} [-1/2, 1/2]^d`, volume exactly `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    dim: usize,
    scale: f64,
}

impl Domain {
    pub fn new(dim: usize, scale: f64) -> Result<Self, GeometryError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::InvalidScale(scale));
        }
        Ok(Self { dim, scale })
    }

    /// Unit square.
    pub fn unit_square() -> Self {
        Self { dim: 2, scale: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Volume `m`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn side(&self) -> f64 {
        match self.dim {
            1 => self.scale,
            2 => self.scale.sqrt(),
            _ => self.scale.cbrt(),
        }
    }

    pub fn half_side(&self) -> f64 {
        0.5 * self.side()
    }

    pub fn contains(&self, p: &Point) -> bool {
        let h = self.half_side();
        p.dim() == self.dim && p.coords().iter().all(|&c| (-h..=h).contains(&c))
    }

    pub fn check(&self, p: &Point) -> Result<(), GeometryError> {
        if p.dim() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        if !self.contains(p) {
            return Err(GeometryError::OutsideDomain(p.coords().to_vec()));
        }
        Ok(())
    }

    /// Maps `u` in `[0,1)^d` affinely onto the domain.
    pub(crate) fn from_unit(&self, u: [f64; MAX_DIM]) -> Point {
        let side = self.side();
        let h = 0.5 * side;
        let mut c = [0.0; MAX_DIM];
        for k in 0..self.dim {
            c[k] = u[k] * side - h;
        }
        Point::from_array(c, self.dim)
    }
}

fn check_radius(radius: f64) -> Result<(), GeometryError> {
    if radius.is_finite() && radius > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidRadius(radius))
    }
}

/// `#{ i : |x - y_i| <= R }` by direct scan.
pub fn neighbor_count(x: &Point, config: &[Point], radius: f64) -> Result<usize, GeometryError> {
    check_radius(radius)?;
    let r2 = radius * radius;
    let mut n = 0;
    for y in config {
        if y.dim() != x.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: x.dim(),
                found: y.dim(),
            });
        }
        if x.dist_sq(y) <= r2 {
            n += 1;
        }
    }
    Ok(n)
}

/// Exact minimum distance over all pairs; `f64::INFINITY` for fewer than two
/// points.
pub fn min_pairwise_distance(points: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = a.dist_sq(b);
            if d < best {
                best = d;
            }
        }
    }
    best.sqrt()
}

/// Uniform grid over a [`Domain`] with cell edge `>= R`, so a radius-`R`
/// query only visits the `3^d` cells around the query point.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    domain: Domain,
    radius: f64,
    cell: f64,
    per_axis: usize,
    buckets: Vec<Vec<(usize, Point)>>,
    len: usize,
}

impl SpatialIndex {
    pub fn new(domain: Domain, radius: f64) -> Result<Self, GeometryError> {
        check_radius(radius)?;
        let side = domain.side();
        // floor keeps the cell edge >= R; clamp bounds memory for tiny R.
        let per_axis_cap = match domain.dim() {
            1 => 1 << 22,
            2 => 1 << 11,
            _ => 1 << 7,
        };
        let per_axis = ((side / (radius * (1.0 + 1e-9))).floor() as usize).clamp(1, per_axis_cap);
        let cell = side / per_axis as f64;
        let total = per_axis.pow(domain.dim() as u32);
        Ok(Self {
            domain,
            radius,
            cell,
            per_axis,
            buckets: vec![Vec::new(); total],
            len: 0,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn axis_cell(&self, c: f64) -> usize {
        let k = ((c + self.domain.half_side()) / self.cell).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.per_axis - 1)
        }
    }

    fn cell_of(&self, p: &Point) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for (k, o) in out.iter_mut().enumerate().take(self.domain.dim()) {
            *o = self.axis_cell(p.raw()[k]);
        }
        out
    }

    fn linear(&self, c: [usize; MAX_DIM]) -> usize {
        let n = self.per_axis;
        c[0] + n * (c[1] + n * c[2])
    }

    pub fn insert(&mut self, id: usize, p: Point) -> Result<(), GeometryError> {
        self.domain.check(&p)?;
        let key = self.linear(self.cell_of(&p));
        self.buckets[key].push((id, p));
        self.len += 1;
        Ok(())
    }

    fn for_each_near(&self, x: &Point, mut f: impl FnMut(usize, &Point)) {
        let home = self.cell_of(x);
        let d = self.domain.dim();
        let range = |k: usize| -> (usize, usize) {
            if k < d {
                (home[k].saturating_sub(1), (home[k] + 1).min(self.per_axis - 1))
            } else {
                (0, 0)
            }
        };
        let (x0, x1) = range(0);
        let (y0, y1) = range(1);
        let (z0, z1) = range(2);
        for cz in z0..=z1 {
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    for (id, p) in &self.buckets[self.linear([cx, cy, cz])] {
                        f(*id, p);
                    }
                }
            }
        }
    }

    /// Number of indexed points within `radius` of `x`; `radius` must not
    /// exceed the index radius.
    pub fn count_within(&self, x: &Point, radius: f64) -> Result<usize, GeometryError> {
        if x.dim() != self.domain.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.domain.dim(),
                found: x.dim(),
            });
        }
        check_radius(radius)?;
        debug_assert!(radius <= self.radius * (1.0 + 1e-12));
        Ok(self.count_unchecked(x, radius))
    }

    #[inline]
    pub(crate) fn count_unchecked(&self, x: &Point, radius: f64) -> usize {
        let r2 = radius * radius;
        let mut n = 0;
        self.for_each_near(x, |_, p| {
            if x.dist_sq(p) <= r2 {
                n += 1;
            }
        });
        n
    }

    /// Identifiers of indexed points within `radius` of `x`.
    pub fn ids_within(&self, x: &Point, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.for_each_near(x, |id, p| {
            if x.dist_sq(p) <= r2 {
                out.push(id);
            }
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, domain: &Domain, n: usize) -> Vec<Point> {
        (0..n)
            .map(|_| {
                let mut u = [0.0; MAX_DIM];
                for c in u.iter_mut().take(domain.dim()) {
                    *c = rng.gen::<f64>();
                }
                domain.from_unit(u)
            })
            .collect()
    }

    #[test]
    fn empty_config_has_no_neighbors() {
        assert_eq!(neighbor_count(&Point::xy(0.0, 0.0), &[], 0.1).unwrap(), 0);
    }

    #[test]
    fn boundary_distance_is_inclusive() {
        let r = 0.25;
        let n = neighbor_count(&Point::xy(0.0, 0.0), &[Point::xy(r, 0.0)], r).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let x = Point::xy(0.0, 0.0);
        let y = Point::new(&[0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            neighbor_count(&x, &[y], 1.0),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pythagorean_pair() {
        let d = min_pairwise_distance(&[Point::xy(0.0, 0.0), Point::xy(3.0, 4.0)]);
        assert_eq!(d, 5.0);
        assert!(min_pairwise_distance(&[Point::xy(1.0, 1.0)]).is_infinite());
        assert!(min_pairwise_distance(&[]).is_infinite());
    }

    #[test]
    fn domain_volume_and_containment() {
        for d in 1..=3 {
            let dom = Domain::new(d, 4.0).unwrap();
            assert!((dom.side().powi(d as i32) - 4.0).abs() < 1e-12);
            let mut c = vec![0.0; d];
            c[0] = dom.half_side();
            assert!(dom.contains(&Point::new(&c).unwrap()));
            c[0] = dom.half_side() * 1.000001;
            assert!(!dom.contains(&Point::new(&c).unwrap()));
        }
    }

    #[test]
    fn empty_index_counts_zero() {
        let idx = SpatialIndex::new(Domain::unit_square(), 0.05).unwrap();
        assert_eq!(idx.count_within(&Point::xy(0.1, -0.2), 0.05).unwrap(), 0);
    }

    #[test]
    fn repeated_inserts_are_a_multiset() {
        let mut idx = SpatialIndex::new(Domain::unit_square(), 0.05).unwrap();
        let p = Point::xy(0.3, 0.3);
        for i in 0..7 {
            idx.insert(i, p).unwrap();
        }
        assert_eq!(idx.count_within(&p, 0.05).unwrap(), 7);
    }

    #[test]
    fn insert_outside_domain_fails() {
        let mut idx = SpatialIndex::new(Domain::unit_square(), 0.05).unwrap();
        assert!(idx.insert(0, Point::xy(0.6, 0.0)).is_err());
    }

    #[test]
    fn index_matches_brute_force_in_every_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..=3 {
            let domain = Domain::new(d, 1.0).unwrap();
            let radius = [0.01, 0.07, 0.2][d - 1];
            let pts = random_points(&mut rng, &domain, 1000);
            let mut idx = SpatialIndex::new(domain, radius).unwrap();
            for (i, p) in pts.iter().enumerate() {
                idx.insert(i, *p).unwrap();
            }
            for q in random_points(&mut rng, &domain, 1000) {
                let brute = neighbor_count(&q, &pts, radius).unwrap();
                assert_eq!(idx.count_within(&q, radius).unwrap(), brute);
            }
        }
    }

    #[test]
    fn neighbor_count_is_monotone_in_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let domain = Domain::unit_square();
        let pts = random_points(&mut rng, &domain, 200);
        let x = Point::xy(0.01, -0.02);
        let mut prev = 0;
        for k in 0..=pts.len() {
            let n = neighbor_count(&x, &pts[..k], 0.15).unwrap();
            assert!(n >= prev);
            prev = n;
        }
    }
}

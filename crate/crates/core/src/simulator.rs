//! Rejection sampler for cooperative sequential adsorption.
//!
//! Proposals are uniform on a region known to contain every admissible
//! location and are accepted with probability `beta_n / beta_max`, where `n`
//! is the exact neighbor count of the proposal. Accepted positions are
//! continuous; only jamming bookkeeping uses the coverage grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{CoverageError, CoverageField, DEFAULT_RESOLUTION_FACTOR};
use crate::geometry::{Domain, GeometryError, Point, SpatialIndex, MAX_DIM};
use crate::params::{BetaVector, CsaParams, ParamsError};

/// Name and version of the pseudo-random generator behind every seed.
pub const GENERATOR: &str = "ChaCha8Rng/rand_chacha-0.3/seed_from_u64";

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("acceptance density is degenerate: total weight {total} below one cell")]
    DegenerateDensity { total: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    Count(usize),
    UntilJamming,
}

#[derive(Debug, Clone, Copy)]
pub struct SimulationOptions {
    /// Coverage grid edge used for jamming detection.
    pub resolution: Option<f64>,
    /// Consecutive rejections between jamming checks.
    pub guard: u64,
    /// After this many guard trips without an acceptance the run is declared
    /// jammed even if some grid cells still look admissible.
    pub max_guard_trips: u32,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            resolution: None,
            guard: 10_000_000,
            max_guard_trips: 10,
        }
    }
}

/// An ordered sequence of accepted points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSequence {
    pub domain: Domain,
    pub radius: f64,
    /// Generating weights, when known.
    pub beta: Option<BetaVector>,
    pub points: Vec<Point>,
    /// `n(X_i, X(i-1))` for each point, when known.
    pub insertion_counts: Option<Vec<u32>>,
    pub seed: Option<u64>,
    pub jammed: bool,
    /// Number of points asked for, if the run had a count target.
    pub requested: Option<usize>,
}

impl PointSequence {
    /// Bare sequence without generation metadata.
    pub fn from_points(domain: Domain, radius: f64, points: Vec<Point>) -> Self {
        Self {
            domain,
            radius,
            beta: None,
            points,
            insertion_counts: None,
            seed: None,
            jammed: false,
            requested: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The run jammed before reaching its requested count.
    pub fn shortfall(&self) -> bool {
        self.requested.is_some_and(|r| self.points.len() < r)
    }
}

/// Derives the seed of replication `rep` from a base seed (SplitMix64).
pub fn replication_seed(base: u64, rep: u64) -> u64 {
    let mut z = base.wrapping_add((rep.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn simulate(params: &CsaParams, stop: Stop, seed: u64) -> Result<PointSequence, SimulationError> {
    simulate_with(params, stop, seed, &SimulationOptions::default())
}

pub fn simulate_with(
    params: &CsaParams,
    stop: Stop,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<PointSequence, SimulationError> {
    let mut sampler = Sampler::new(params, seed, opts, matches!(stop, Stop::UntilJamming))?;
    let target = match stop {
        Stop::Count(n) => Some(n),
        Stop::UntilJamming => None,
    };
    let jammed = sampler.run(target)?;
    Ok(PointSequence {
        domain: params.domain,
        radius: params.radius,
        beta: Some(params.beta.clone()),
        points: sampler.points,
        insertion_counts: Some(sampler.counts),
        seed: Some(seed),
        jammed,
        requested: target,
    })
}

/// Draws the next accepted point after a fixed configuration.
///
/// The configuration is taken as given, so its points need not be
/// admissible under `params`.
pub fn sample_next(params: &CsaParams, config: &[Point], seed: u64) -> Result<Point, SimulationError> {
    let opts = SimulationOptions::default();
    let mut sampler = Sampler::new(params, seed, &opts, false)?;
    for p in config {
        let n = sampler.index.count_within(p, params.radius)?;
        sampler.accept(*p, n)?;
    }
    sampler.run(Some(config.len() + 1))?;
    sampler
        .points
        .get(config.len())
        .copied()
        .ok_or(SimulationError::DegenerateDensity { total: 0.0 })
}

struct Sampler<'a> {
    params: &'a CsaParams,
    opts: &'a SimulationOptions,
    rng: ChaCha8Rng,
    index: SpatialIndex,
    field: Option<CoverageField>,
    candidates: Option<Vec<u32>>,
    points: Vec<Point>,
    counts: Vec<u32>,
    max_weight: f64,
}

impl<'a> Sampler<'a> {
    fn new(
        params: &'a CsaParams,
        seed: u64,
        opts: &'a SimulationOptions,
        track_field: bool,
    ) -> Result<Self, SimulationError> {
        let index = SpatialIndex::new(params.domain, params.radius)?;
        let mut sampler = Self {
            params,
            opts,
            rng: ChaCha8Rng::seed_from_u64(seed),
            index,
            field: None,
            candidates: None,
            points: Vec::new(),
            counts: Vec::new(),
            max_weight: params.beta.max_weight(),
        };
        if track_field {
            let mut f = sampler.new_field()?;
            f.track_lower_bounds();
            sampler.field = Some(f);
        }
        Ok(sampler)
    }

    fn new_field(&self) -> Result<CoverageField, CoverageError> {
        let h = self
            .opts
            .resolution
            .unwrap_or(self.params.radius / DEFAULT_RESOLUTION_FACTOR);
        CoverageField::new(self.params.domain, self.params.radius, h)
    }

    fn unit(&mut self) -> [f64; MAX_DIM] {
        let mut u = [0.0; MAX_DIM];
        for c in u.iter_mut().take(self.params.domain.dim()) {
            *c = self.rng.gen::<f64>();
        }
        u
    }

    fn propose(&mut self) -> Point {
        let order = self.params.order() as u16;
        if let (Some(cands), Some(field)) = (self.candidates.as_mut(), self.field.as_ref()) {
            loop {
                let i = self.rng.gen_range(0..cands.len());
                let cell = cands[i] as usize;
                if field.lower_bound_at(cell).unwrap_or(0) > order {
                    cands.swap_remove(i);
                    continue;
                }
                let mut u = [0.0; MAX_DIM];
                for c in u.iter_mut().take(self.params.domain.dim()) {
                    *c = self.rng.gen::<f64>();
                }
                return field.point_in_cell(cell, u);
            }
        }
        let u = self.unit();
        self.params.domain.from_unit(u)
    }

    fn accept(&mut self, x: Point, n: usize) -> Result<(), SimulationError> {
        let id = self.points.len();
        self.index.insert(id, x)?;
        if let Some(f) = self.field.as_mut() {
            f.add_point(&x)?;
        }
        self.points.push(x);
        self.counts.push(n as u32);
        self.maybe_switch_to_candidates();
        Ok(())
    }

    /// Once most of the domain is certainly inadmissible, propose only from
    /// cells that may still hold admissible area.
    fn maybe_switch_to_candidates(&mut self) {
        let order = self.params.order();
        let Some(field) = self.field.as_ref() else {
            return;
        };
        let Some(valid) = field.candidate_cells(order) else {
            return;
        };
        let lower_ok = |c: usize| field.lower_bound_at(c).unwrap_or(0) as usize <= order;
        match self.candidates.as_mut() {
            None if (valid as usize) < field.cell_count() / 4 => {
                let list: Vec<u32> = (0..field.cell_count())
                    .filter(|&c| lower_ok(c))
                    .map(|c| c as u32)
                    .collect();
                self.candidates = Some(list);
            }
            Some(list) if list.len() > 4 * valid as usize + 1024 => {
                list.retain(|&c| lower_ok(c as usize));
            }
            _ => {}
        }
    }

    fn jammed_now(&mut self) -> Result<bool, SimulationError> {
        let order = self.params.order();
        if self.field.is_none() {
            let mut f = self.new_field()?;
            for p in &self.points {
                f.add_point(p)?;
            }
            self.field = Some(f);
        }
        Ok(self.field.as_ref().is_some_and(|f| f.is_jammed(order)))
    }

    /// Returns whether the run ended jammed.
    fn run(&mut self, target: Option<usize>) -> Result<bool, SimulationError> {
        let order = self.params.order();
        let radius = self.params.radius;
        loop {
            if target.is_some_and(|t| self.points.len() >= t) {
                return Ok(false);
            }
            if target.is_none() && self.field.as_ref().is_some_and(|f| f.is_jammed(order)) {
                return Ok(true);
            }
            let mut rejections: u64 = 0;
            let mut trips = 0;
            loop {
                let x = self.propose();
                let n = self.index.count_unchecked(&x, radius);
                let w = self.params.weight(n);
                if w > 0.0 && self.rng.gen::<f64>() * self.max_weight < w {
                    self.accept(x, n)?;
                    break;
                }
                rejections += 1;
                if rejections.is_multiple_of(self.opts.guard) {
                    if self.jammed_now()? {
                        return Ok(true);
                    }
                    trips += 1;
                    if trips >= self.opts.max_guard_trips {
                        log::warn!(
                            "declaring jamming after {rejections} consecutive rejections \
                             with {} grid cells still admissible",
                            self.field.as_ref().map_or(0, |f| f.admissible_cells(order))
                        );
                        return Ok(true);
                    }
                }
            }
        }
    }
}

/// Density of the next accepted point at `x` given the configuration held in
/// `field`: `beta_{n(x)} / sum_j beta_j Gamma_j`, with `n(x)` read from the
/// cell containing `x`.
pub fn acceptance_density(
    field: &CoverageField,
    params: &CsaParams,
    x: &Point,
) -> Result<f64, SimulationError> {
    field.domain().check(x)?;
    let total = weighted_area(field, &params.beta);
    if total < field.cell_measure() * params.beta.min_weight() {
        return Err(SimulationError::DegenerateDensity { total });
    }
    let cell = cell_containing(field, x);
    Ok(params.weight(field.count_at(cell) as usize) / total)
}

/// `sum_j beta_j Gamma_j` over the grid.
pub fn weighted_area(field: &CoverageField, beta: &BetaVector) -> f64 {
    (0..=beta.order())
        .map(|j| beta.weight(j) * field.tally(j) as f64)
        .sum::<f64>()
        * field.cell_measure()
}

pub(crate) fn cell_containing(field: &CoverageField, x: &Point) -> usize {
    let n = field.cells_per_axis();
    let h = field.domain().half_side();
    let mut cell = 0;
    for k in (0..field.domain().dim()).rev() {
        let i = (((x.coords()[k] + h) / field.cell_edge()).floor().max(0.0) as usize).min(n - 1);
        cell = cell * n + i;
    }
    cell
}

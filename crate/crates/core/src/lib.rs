//! Simulation and maximum-likelihood inference for cooperative sequential
//! adsorption (CSA) point processes.
//!
//! A CSA run places points one at a time in a cube; a uniform proposal with
//! `n` accepted points within distance `R` is kept with probability
//! proportional to `beta_n`. The crate covers simulation, replay into
//! sufficient statistics, exact likelihood derivatives, Newton MLE with
//! normal confidence intervals, and Monte Carlo checks of the large-volume
//! normal limits.

pub mod geometry;
pub mod params;
pub mod coverage;
pub mod simulator;
pub mod statistics;
pub mod likelihood;
pub mod estimator;
pub mod asymptotics;
pub mod stats;
pub mod io;
pub mod render;
pub mod cli;

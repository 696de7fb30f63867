//! Pre-pickup search behaviours and passenger-carrying steering.
//!
//! A move along a heading is admissible when the look-ahead cell (one cell
//! unit ahead) is a road and the landing point after `step_length` is on a
//! road too. Every routine leaves the driver on a road cell.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{DriverAgent, DriverId};
use crate::grid::{nearest_agent, Heading, Position, RoadGrid};

/// Full 0..360 rotations tried before giving up for a tick.
pub const RANDOM_RETRIES: usize = 36;
/// Perturbed retries around the away-heading during repulsion search.
pub const REPULSION_PERTURB_RETRIES: usize = 8;
/// Cumulative perturbed retries when steering towards a trip destination.
pub const DESTINATION_PERTURB_RETRIES: usize = 36;
/// Half-width of the perturbation window, degrees.
pub const PERTURB_HALF_ANGLE: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MovementPolicy {
    RandomSearch,
    VoronoiSearch { vision: f64 },
}

impl MovementPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            MovementPolicy::RandomSearch => "random",
            MovementPolicy::VoronoiSearch { .. } => "voronoi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub step_length: f64,
}

impl Default for StepParams {
    fn default() -> Self {
        StepParams { step_length: 0.5 }
    }
}

fn try_advance(driver: &mut DriverAgent, grid: &RoadGrid, heading: Heading, step: f64) -> bool {
    if !grid.cell_ahead_is_road(driver.pos, heading) {
        return false;
    }
    let landing = driver.pos.advanced(heading, step);
    if !grid.is_road_at(landing) {
        return false;
    }
    driver.pos = landing;
    driver.heading = heading;
    true
}

fn random_heading<R: Rng + ?Sized>(rng: &mut R) -> Heading {
    Heading::new(rng.random_range(0.0..360.0))
}

fn perturbed<R: Rng + ?Sized>(base: Heading, rng: &mut R) -> Heading {
    base.rotated(rng.random_range(-PERTURB_HALF_ANGLE..=PERTURB_HALF_ANGLE))
}

/// Spins to fresh uniform headings, up to [`RANDOM_RETRIES`] times. On
/// failure the last drawn heading is kept.
fn random_rotations<R: Rng + ?Sized>(
    driver: &mut DriverAgent,
    grid: &RoadGrid,
    step: f64,
    rng: &mut R,
) -> bool {
    for _ in 0..RANDOM_RETRIES {
        let h = random_heading(rng);
        if try_advance(driver, grid, h, step) {
            return true;
        }
        driver.heading = h;
    }
    false
}

/// Keeps the current heading while the road continues, otherwise rotates
/// randomly.
pub fn random_search_step<R: Rng + ?Sized>(
    driver: &mut DriverAgent,
    grid: &RoadGrid,
    params: &StepParams,
    rng: &mut R,
) {
    let step = params.step_length;
    if try_advance(driver, grid, driver.heading, step) {
        return;
    }
    random_rotations(driver, grid, step, rng);
}

/// Repulsion step given the already-resolved nearest visible driver.
pub fn voronoi_step_from<R: Rng + ?Sized>(
    driver: &mut DriverAgent,
    nearest: Option<Position>,
    grid: &RoadGrid,
    params: &StepParams,
    rng: &mut R,
) {
    let Some(other) = nearest else {
        random_search_step(driver, grid, params, rng);
        return;
    };
    let step = params.step_length;
    let away = if other == driver.pos {
        random_heading(rng)
    } else {
        other.bearing_to(driver.pos)
    };
    if try_advance(driver, grid, away, step) {
        return;
    }
    for _ in 0..REPULSION_PERTURB_RETRIES {
        if try_advance(driver, grid, perturbed(away, rng), step) {
            return;
        }
    }
    random_rotations(driver, grid, step, rng);
}

/// Moves directly away from the nearest other driver within `vision`,
/// or searches randomly when nobody is in sight.
pub fn voronoi_search_step<R: Rng + ?Sized>(
    driver: &mut DriverAgent,
    others: &[(DriverId, Position)],
    grid: &RoadGrid,
    vision: f64,
    params: &StepParams,
    rng: &mut R,
) {
    let candidates: Vec<_> = others
        .iter()
        .copied()
        .filter(|(id, _)| *id != driver.id)
        .collect();
    let nearest = nearest_agent(driver.pos, &candidates, vision).map(|(_, p)| p);
    voronoi_step_from(driver, nearest, grid, params, rng);
}

/// Steers a carrying driver towards its trip destination. Returns `true`
/// without moving once the destination is within `dropoff_radius`.
pub fn destination_step<R: Rng + ?Sized>(
    driver: &mut DriverAgent,
    grid: &RoadGrid,
    params: &StepParams,
    dropoff_radius: f64,
    rng: &mut R,
) -> bool {
    let Some(target) = driver.trip_destination() else {
        return false;
    };
    if driver.pos.distance(target) <= dropoff_radius {
        return true;
    }
    let step = params.step_length;
    let desired = driver.pos.bearing_to(target);
    if try_advance(driver, grid, desired, step) {
        return false;
    }
    // retries rotate cumulatively, so repeated failures sweep away from
    // the bearing until some road direction opens up
    let mut heading = desired;
    for _ in 0..DESTINATION_PERTURB_RETRIES {
        heading = perturbed(heading, rng);
        if try_advance(driver, grid, heading, step) {
            return false;
        }
    }
    false
}

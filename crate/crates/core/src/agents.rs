//! Driver and rider state, spawning gates and per-tick accrual.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, Heading, Position, RoadGrid};
use crate::money::Cents;

/// Fixed fare credited when a rider is picked up.
pub const PICKUP_FARE: Cents = Cents(200);
/// Fare credited per tick while carrying a passenger.
pub const CARRY_RATE: Cents = Cents(60);
/// Operating cost per tick while idle.
pub const IDLE_COST: Cents = Cents(10);
/// Energy spent per active tick, idle or carrying.
pub const ENERGY_DRAIN: f64 = 0.75;

/// Placement succeeds when a Normal(1, 1) draw is strictly above this.
pub const PLACEMENT_THRESHOLD: f64 = 0.5;
pub const ENERGY_MEAN: f64 = 360.0;
pub const ENERGY_SD: f64 = 120.0;
pub const MIN_ENERGY: f64 = 1.0;
/// Destination redraws allowed before a rider spawn is declared degenerate.
pub const MAX_DESTINATION_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DriverId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RiderId(pub u64);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("no destination distinct from the origin found after {MAX_DESTINATION_REDRAWS} redraws")]
    DegenerateGrid,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Passenger {
    pub rider: RiderId,
    pub destination: Position,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverAgent {
    pub id: DriverId,
    pub pos: Position,
    pub heading: Heading,
    pub energy: f64,
    pub cash: Cents,
    pub time_driven: u64,
    /// Current passenger and their destination; `None` while idle.
    pub passenger: Option<Passenger>,
    pub trip_time: u64,
    pub pickup_count: u64,
    pub dropoff_count: u64,
    pub carry_ticks: u64,
    pub idle_ticks: u64,
}

impl DriverAgent {
    pub fn new(id: DriverId, pos: Position, heading: Heading, energy: f64) -> Self {
        DriverAgent {
            id,
            pos,
            heading,
            energy,
            cash: Cents::ZERO,
            time_driven: 0,
            passenger: None,
            trip_time: 0,
            pickup_count: 0,
            dropoff_count: 0,
            carry_ticks: 0,
            idle_ticks: 0,
        }
    }

    pub fn has_passenger(&self) -> bool {
        self.passenger.is_some()
    }

    pub fn passenger_id(&self) -> Option<RiderId> {
        self.passenger.as_ref().map(|p| p.rider)
    }

    pub fn trip_destination(&self) -> Option<Position> {
        self.passenger.as_ref().map(|p| p.destination)
    }

    /// Takes `rider` aboard and credits the fixed part of the fare.
    pub fn pick_up(&mut self, rider: &RiderAgent) {
        debug_assert!(self.passenger.is_none());
        self.passenger = Some(Passenger {
            rider: rider.id,
            destination: rider.destination,
        });
        self.cash += PICKUP_FARE;
        self.pickup_count += 1;
        self.trip_time = 0;
    }

    pub fn drop_off(&mut self) -> Option<Passenger> {
        let p = self.passenger.take()?;
        self.dropoff_count += 1;
        self.trip_time = 0;
        Some(p)
    }

    /// One tick of earnings, costs and fatigue.
    pub fn accrue_tick(&mut self) {
        if self.has_passenger() {
            self.cash += CARRY_RATE;
            self.trip_time += 1;
            self.carry_ticks += 1;
        } else {
            self.cash -= IDLE_COST;
            self.idle_ticks += 1;
        }
        self.energy -= ENERGY_DRAIN;
        self.time_driven += 1;
    }

    /// Cash implied by the driver's counters.
    pub fn ledger_cash(&self) -> Cents {
        PICKUP_FARE * self.pickup_count as i64 + CARRY_RATE * self.carry_ticks as i64
            - IDLE_COST * self.idle_ticks as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiderAgent {
    pub id: RiderId,
    pub pos: Position,
    pub destination: Position,
    pub wait_time: u64,
}

fn standard_gate() -> Normal<f64> {
    Normal::new(1.0, 1.0).expect("valid normal parameters")
}

pub fn placement_passes(draw: f64) -> bool {
    draw > PLACEMENT_THRESHOLD
}

/// Draws the placement test value from Normal(1, 1).
pub fn draw_placement<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    standard_gate().sample(rng)
}

/// Attempts to place a driver. Draw order: placement test, intersection,
/// energy, heading.
pub fn spawn_driver<R: Rng + ?Sized>(
    grid: &RoadGrid,
    rng: &mut R,
    id: DriverId,
) -> Result<Option<DriverAgent>, AgentError> {
    let gate = draw_placement(rng);
    spawn_driver_with_gate(gate, grid, rng, id)
}

/// [`spawn_driver`] with the placement draw supplied by the caller.
pub fn spawn_driver_with_gate<R: Rng + ?Sized>(
    gate: f64,
    grid: &RoadGrid,
    rng: &mut R,
    id: DriverId,
) -> Result<Option<DriverAgent>, AgentError> {
    if !placement_passes(gate) {
        return Ok(None);
    }
    let pos = grid.random_intersection(rng)?;
    let energy_dist = Normal::new(ENERGY_MEAN, ENERGY_SD).expect("valid normal parameters");
    let energy = energy_dist.sample(rng).max(MIN_ENERGY);
    let heading = Heading::new(rng.random_range(0.0..360.0));
    Ok(Some(DriverAgent::new(id, pos, heading, energy)))
}

pub fn spawn_rider<R: Rng + ?Sized>(
    grid: &RoadGrid,
    rng: &mut R,
    id: RiderId,
) -> Result<Option<RiderAgent>, AgentError> {
    let gate = draw_placement(rng);
    spawn_rider_with_gate(gate, grid, rng, id)
}

pub fn spawn_rider_with_gate<R: Rng + ?Sized>(
    gate: f64,
    grid: &RoadGrid,
    rng: &mut R,
    id: RiderId,
) -> Result<Option<RiderAgent>, AgentError> {
    if !placement_passes(gate) {
        return Ok(None);
    }
    let pos = grid.random_intersection(rng)?;
    for _ in 0..MAX_DESTINATION_REDRAWS {
        let destination = grid.random_intersection(rng)?;
        if destination != pos {
            return Ok(Some(RiderAgent {
                id,
                pos,
                destination,
                wait_time: 0,
            }));
        }
    }
    Err(AgentError::DegenerateGrid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid9() -> RoadGrid {
        RoadGrid::street_grid(9, 9, 4).unwrap()
    }

    #[test]
    fn gate_threshold_is_strict() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = grid9();
        let d = spawn_driver_with_gate(0.6, &g, &mut rng, DriverId(0)).unwrap();
        let d = d.expect("driver placed");
        let (x, y) = d.pos.cell();
        assert!(g.is_intersection(x, y));
        assert!(d.energy >= MIN_ENERGY);
        assert_eq!(d.cash, Cents::ZERO);
        assert!(spawn_driver_with_gate(0.5, &g, &mut rng, DriverId(1))
            .unwrap()
            .is_none());
    }

    #[test]
    fn rider_gate_and_distinct_destination() {
        let g = grid9();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..200 {
            let r = spawn_rider_with_gate(1.7, &g, &mut rng, RiderId(i))
                .unwrap()
                .unwrap();
            assert_ne!(r.pos, r.destination);
            assert_eq!(r.wait_time, 0);
        }
        assert!(spawn_rider_with_gate(-0.2, &g, &mut rng, RiderId(0))
            .unwrap()
            .is_none());
    }

    #[test]
    fn two_intersections_pick_the_other() {
        let g = RoadGrid::load("+##+").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..100 {
            let r = spawn_rider_with_gate(2.0, &g, &mut rng, RiderId(i))
                .unwrap()
                .unwrap();
            let other = if r.pos.x < 1.0 { 3.5 } else { 0.5 };
            assert_eq!(r.destination, Position::new(other, 0.5));
        }
    }

    #[test]
    fn single_intersection_is_degenerate() {
        let g = RoadGrid::parse_raster("+##").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(
            spawn_rider_with_gate(2.0, &g, &mut rng, RiderId(0)),
            Err(AgentError::DegenerateGrid)
        );
    }

    #[test]
    fn idle_and_carrying_accrual() {
        let mut d = DriverAgent::new(DriverId(0), Position::new(0.5, 0.5), Heading::new(0.0), 100.0);
        for _ in 0..10 {
            d.accrue_tick();
        }
        assert_eq!(d.cash, Cents(-100));
        assert!((d.energy - 92.5).abs() < 1e-12);
        assert_eq!(d.time_driven, 10);

        let rider = RiderAgent {
            id: RiderId(5),
            pos: Position::new(0.5, 0.5),
            destination: Position::new(4.5, 0.5),
            wait_time: 3,
        };
        d.pick_up(&rider);
        let before = d.cash;
        for _ in 0..10 {
            d.accrue_tick();
        }
        assert_eq!(d.cash - before, Cents(600));
        assert_eq!(d.trip_time, 10);
        assert_eq!(d.ledger_cash(), d.cash);
        d.drop_off();
        assert_eq!(d.trip_time, 0);
        assert!(d.pickup_count >= d.dropoff_count);
    }

    #[test]
    fn energy_may_go_negative() {
        let mut d = DriverAgent::new(DriverId(0), Position::new(0.5, 0.5), Heading::new(0.0), 0.5);
        d.accrue_tick();
        assert!((d.energy + 0.25).abs() < 1e-12);
    }

    #[test]
    fn ledger_identity_under_random_lifecycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut d = DriverAgent::new(DriverId(0), Position::new(0.5, 0.5), Heading::new(0.0), 1e9);
        let rider = RiderAgent {
            id: RiderId(0),
            pos: Position::new(0.5, 0.5),
            destination: Position::new(1.5, 0.5),
            wait_time: 0,
        };
        let (mut idle, mut carry, mut pickups) = (0i64, 0i64, 0i64);
        for _ in 0..5000 {
            match (d.has_passenger(), rng.random_range(0..10)) {
                (false, 0) => {
                    d.pick_up(&rider);
                    pickups += 1;
                }
                (true, 0) => {
                    d.drop_off();
                }
                _ => {}
            }
            if d.has_passenger() {
                carry += 1;
            } else {
                idle += 1;
            }
            d.accrue_tick();
            assert_eq!(d.cash, Cents(200 * pickups + 60 * carry - 10 * idle));
            assert_eq!(d.has_passenger(), d.trip_destination().is_some());
            if !d.has_passenger() {
                assert_eq!(d.trip_time, 0);
            }
        }
    }
}

//! The tick loop.
//!
//! Each tick runs these phases in order, agents visited in ascending id and
//! every random draw taken from the world's single seeded stream:
//!
//! 1. scenario lookup
//! 2. driver replenishment up to capacity (one attempt per missing driver)
//! 3. rider arrivals (one attempt per unit of rate)
//! 4. movement (search policy when idle, destination steering when carrying)
//! 5. pickups (lowest id claims first, nearest unclaimed rider in radius)
//! 6. drop-offs for drivers that reported arrival in phase 4
//! 7. accrual of cash, energy and rider wait
//! 8. riders at the wait limit give up
//! 9. drivers out of energy leave, passenger included
//! 10. random exits of idle drivers and waiting riders
//! 11. clock advance

use std::fs;
use std::io;
use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{spawn_driver, spawn_rider, DriverAgent, DriverId, RiderAgent, RiderId};
use crate::config::{GridSource, ScenarioSource, SimConfig};
use crate::grid::{GridError, RoadGrid, SpatialIndex, MIN_INTERSECTIONS};
use crate::metrics::{self, MetricsFrame, SummaryStats};
use crate::money::Cents;
use crate::movement::{
    destination_step, random_search_step, voronoi_step_from, MovementPolicy,
};
use crate::scenario::{ScenarioError, ScenarioSchedule};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("grid {source_name}: {error}")]
    Grid {
        source_name: String,
        #[source]
        error: GridError,
    },
    #[error("schedule {path}: {error}")]
    Scenario {
        path: PathBuf,
        #[source]
        error: ScenarioError,
    },
}

/// Cash and head counts of agents that have left.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankLedger {
    pub banked_cash: Cents,
    pub departed_driver_count: u64,
    pub exhausted_driver_count: u64,
    pub random_left_driver_count: u64,
    pub departed_rider_random_count: u64,
    pub gave_up_rider_count: u64,
}

/// Run-wide event counters, covering departed agents too.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub drivers_spawned: u64,
    pub riders_spawned: u64,
    pub pickups: u64,
    pub dropoffs: u64,
    pub carry_ticks: u64,
    pub idle_ticks: u64,
    /// Passengers lost when their driver ran out of energy mid-trip.
    pub discarded_passengers: u64,
}

pub fn load_grid(source: &GridSource) -> Result<RoadGrid, SimError> {
    match source {
        GridSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|source| SimError::Io {
                path: path.clone(),
                source,
            })?;
            RoadGrid::load(&text).map_err(|error| SimError::Grid {
                source_name: path.display().to_string(),
                error,
            })
        }
        GridSource::Synthetic {
            width,
            height,
            spacing,
        } => {
            let grid = RoadGrid::street_grid(*width, *height, *spacing).map_err(|error| {
                SimError::Grid {
                    source_name: format!("synthetic:{width},{height},{spacing}"),
                    error,
                }
            })?;
            Ok(grid)
        }
    }
}

pub fn load_schedule(config: &SimConfig) -> Result<ScenarioSchedule, SimError> {
    match &config.scenario {
        ScenarioSource::Stationary => Ok(ScenarioSchedule::stationary(
            config.driver_capacity,
            config.riders_per_tick,
        )),
        ScenarioSource::Saturday => Ok(ScenarioSchedule::saturday()),
        ScenarioSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|source| SimError::Io {
                path: path.clone(),
                source,
            })?;
            ScenarioSchedule::parse(&text).map_err(|error| SimError::Scenario {
                path: path.clone(),
                error,
            })
        }
    }
}

pub struct World {
    config: SimConfig,
    grid: Arc<RoadGrid>,
    schedule: ScenarioSchedule,
    tick: u64,
    drivers: Vec<DriverAgent>,
    riders: Vec<RiderAgent>,
    bank: BankLedger,
    totals: Totals,
    rng: ChaCha8Rng,
    next_driver: u64,
    next_rider: u64,
}

impl World {
    /// Resolves the grid and schedule named by `config` and seeds the world.
    pub fn new(config: &SimConfig) -> Result<World, SimError> {
        let grid = Arc::new(load_grid(&config.grid)?);
        let schedule = load_schedule(config)?;
        World::with_parts(config, grid, schedule)
    }

    pub fn with_parts(
        config: &SimConfig,
        grid: Arc<RoadGrid>,
        schedule: ScenarioSchedule,
    ) -> Result<World, SimError> {
        if grid.intersections().len() < MIN_INTERSECTIONS {
            return Err(SimError::Grid {
                source_name: "grid".into(),
                error: GridError::TooFewIntersections {
                    found: grid.intersections().len(),
                },
            });
        }
        let mut world = World {
            config: config.clone(),
            grid,
            schedule,
            tick: 0,
            drivers: Vec::new(),
            riders: Vec::new(),
            bank: BankLedger::default(),
            totals: Totals::default(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            next_driver: 0,
            next_rider: 0,
        };
        let (capacity, rate) = world.schedule.rates_at(0);
        world.attempt_drivers(capacity as usize);
        world.attempt_riders(rate);
        Ok(world)
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn grid(&self) -> &RoadGrid {
        &self.grid
    }

    pub fn drivers(&self) -> &[DriverAgent] {
        &self.drivers
    }

    pub fn riders(&self) -> &[RiderAgent] {
        &self.riders
    }

    pub fn bank(&self) -> &BankLedger {
        &self.bank
    }

    pub fn totals(&self) -> &Totals {
        &self.totals
    }

    /// Next ids to be handed out; equal to the number ever spawned.
    pub fn next_ids(&self) -> (DriverId, RiderId) {
        (DriverId(self.next_driver), RiderId(self.next_rider))
    }

    pub fn active_cash(&self) -> Cents {
        self.drivers.iter().map(|d| d.cash).sum()
    }

    pub fn total_profit(&self) -> Cents {
        self.active_cash() + self.bank.banked_cash
    }

    fn attempt_drivers(&mut self, attempts: usize) {
        for _ in 0..attempts {
            let id = DriverId(self.next_driver);
            // the grid holds at least two intersections, so placement cannot error
            if let Ok(Some(driver)) = spawn_driver(&self.grid, &mut self.rng, id) {
                self.next_driver += 1;
                self.totals.drivers_spawned += 1;
                self.drivers.push(driver);
            }
        }
    }

    fn attempt_riders(&mut self, attempts: u32) {
        for _ in 0..attempts {
            let id = RiderId(self.next_rider);
            // DegenerateGrid needs 100 straight collisions on a grid with at
            // least two intersections; treated as a failed placement
            if let Ok(Some(rider)) = spawn_rider(&self.grid, &mut self.rng, id) {
                self.next_rider += 1;
                self.totals.riders_spawned += 1;
                self.riders.push(rider);
            }
        }
    }

    /// Advances the world by one tick and returns the resulting frame.
    pub fn tick(&mut self) -> MetricsFrame {
        let (capacity, rate) = self.schedule.rates_at(self.tick);

        let deficit = (capacity as usize).saturating_sub(self.drivers.len());
        self.attempt_drivers(deficit);
        self.attempt_riders(rate);

        let arrived = self.move_drivers();
        self.pick_up();
        for &i in &arrived {
            if self.drivers[i].drop_off().is_some() {
                self.totals.dropoffs += 1;
            }
        }

        for d in &mut self.drivers {
            if d.has_passenger() {
                self.totals.carry_ticks += 1;
            } else {
                self.totals.idle_ticks += 1;
            }
            d.accrue_tick();
        }
        for r in &mut self.riders {
            r.wait_time += 1;
        }

        if let Some(limit) = self.config.max_wait {
            let before = self.riders.len();
            self.riders.retain(|r| r.wait_time < limit);
            self.bank.gave_up_rider_count += (before - self.riders.len()) as u64;
        }

        let bank = &mut self.bank;
        let totals = &mut self.totals;
        self.drivers.retain(|d| {
            if d.energy > 0.0 {
                return true;
            }
            bank.banked_cash += d.cash;
            bank.departed_driver_count += 1;
            bank.exhausted_driver_count += 1;
            if d.has_passenger() {
                totals.discarded_passengers += 1;
            }
            false
        });

        if self.config.random_exit {
            self.random_exits();
        }

        self.tick += 1;
        let frame = metrics::collect(self);
        debug_assert!(self.consistent(), "world invariants violated at tick {}", self.tick);
        frame
    }

    fn move_drivers(&mut self) -> Vec<usize> {
        let grid = Arc::clone(&self.grid);
        let params = self.config.step;
        let index = match self.config.policy {
            MovementPolicy::VoronoiSearch { vision } => {
                let snapshot: Vec<(DriverId, _)> =
                    self.drivers.iter().map(|d| (d.id, d.pos)).collect();
                Some((
                    vision,
                    SpatialIndex::new(grid.width(), grid.height(), vision, &snapshot),
                ))
            }
            MovementPolicy::RandomSearch => None,
        };
        let mut arrived = Vec::new();
        for (i, d) in self.drivers.iter_mut().enumerate() {
            if d.has_passenger() {
                if destination_step(d, &grid, &params, self.config.dropoff_radius, &mut self.rng) {
                    arrived.push(i);
                }
                continue;
            }
            match &index {
                Some((vision, idx)) => {
                    let me = d.id;
                    let nearest = idx.nearest_where(d.pos, *vision, |id| id != me);
                    voronoi_step_from(d, nearest.map(|(_, p)| p), &grid, &params, &mut self.rng);
                }
                None => random_search_step(d, &grid, &params, &mut self.rng),
            }
        }
        arrived
    }

    fn pick_up(&mut self) {
        if self.riders.is_empty() {
            return;
        }
        let radius = self.config.pickup_radius;
        let items: Vec<(usize, _)> = self.riders.iter().map(|r| r.pos).enumerate().collect();
        let index = SpatialIndex::new(self.grid.width(), self.grid.height(), radius, &items);
        let mut claimed = vec![false; self.riders.len()];
        for d in self.drivers.iter_mut().filter(|d| !d.has_passenger()) {
            if let Some((i, _)) = index.nearest_where(d.pos, radius, |i| !claimed[i]) {
                claimed[i] = true;
                d.pick_up(&self.riders[i]);
                self.totals.pickups += 1;
            }
        }
        let mut keep = claimed.iter().map(|c| !c);
        self.riders.retain(|_| keep.next().unwrap_or(true));
    }

    fn random_exits(&mut self) {
        let k_drivers = kill_count(&mut self.rng);
        let idle: Vec<usize> = self
            .drivers
            .iter()
            .enumerate()
            .filter(|(_, d)| !d.has_passenger())
            .map(|(i, _)| i)
            .collect();
        let k = k_drivers.min(idle.len());
        if k > 0 {
            let mut leaving: Vec<usize> = index::sample(&mut self.rng, idle.len(), k)
                .into_iter()
                .map(|j| idle[j])
                .collect();
            leaving.sort_unstable();
            for &i in leaving.iter().rev() {
                let d = self.drivers.remove(i);
                self.bank.banked_cash += d.cash;
                self.bank.departed_driver_count += 1;
                self.bank.random_left_driver_count += 1;
            }
        }

        let k_riders = kill_count(&mut self.rng);
        let k = k_riders.min(self.riders.len());
        if k > 0 {
            let mut leaving = index::sample(&mut self.rng, self.riders.len(), k).into_vec();
            leaving.sort_unstable();
            for &i in leaving.iter().rev() {
                self.riders.remove(i);
            }
            self.bank.departed_rider_random_count += k as u64;
        }
    }

    /// Structural invariants of the world; used by debug assertions and tests.
    pub fn consistent(&self) -> bool {
        let on_road = self.drivers.iter().all(|d| self.grid.is_road_at(d.pos));
        let riders_ok = self.riders.iter().all(|r| {
            let (x, y) = r.pos.cell();
            self.grid.is_intersection(x, y) && r.pos != r.destination
        });
        let driver_order = self.drivers.windows(2).all(|w| w[0].id < w[1].id);
        let rider_order = self.riders.windows(2).all(|w| w[0].id < w[1].id);
        let mut passengers: Vec<RiderId> =
            self.drivers.iter().filter_map(|d| d.passenger_id()).collect();
        let held = passengers.len();
        passengers.sort_unstable();
        passengers.dedup();
        on_road
            && riders_ok
            && driver_order
            && rider_order
            && held == passengers.len()
            && self.totals.pickups >= self.totals.dropoffs
    }
}

/// Number of random departures this tick: `round(|Z|)`, `Z ~ Normal(0, 1)`.
pub fn kill_count<R: rand::Rng + ?Sized>(rng: &mut R) -> usize {
    let z: f64 = StandardNormal.sample(rng);
    z.abs().round() as usize
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub frames: Vec<MetricsFrame>,
    pub summary: Option<SummaryStats>,
}

impl RunResult {
    pub fn final_profit(&self) -> Option<Cents> {
        self.frames.last().map(|f| f.total_profit)
    }

    pub fn profit_series(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.total_profit.dollars()).collect()
    }
}

/// Runs `config.run_length` ticks and collects a frame per tick. The
/// summary is `None` when there are no frames.
pub fn run(config: &SimConfig) -> Result<RunResult, SimError> {
    let world = World::new(config)?;
    Ok(run_world(world, config.run_length))
}

pub fn run_world(mut world: World, ticks: u64) -> RunResult {
    let frames: Vec<MetricsFrame> = (0..ticks).map(|_| world.tick()).collect();
    let series: Vec<f64> = frames.iter().map(|f| f.total_profit.dollars()).collect();
    RunResult {
        summary: metrics::summarize(&series).ok(),
        frames,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Passenger;
    use crate::grid::Position;
    use crate::movement::StepParams;

    fn config(policy: MovementPolicy, drivers: u32, riders: u32) -> SimConfig {
        SimConfig {
            grid: GridSource::Synthetic {
                width: 21,
                height: 21,
                spacing: 4,
            },
            driver_capacity: drivers,
            riders_per_tick: riders,
            policy,
            voronoi_vision: 3.0,
            step: StepParams::default(),
            pickup_radius: 3.0,
            dropoff_radius: 3.0,
            max_wait: Some(20),
            random_exit: true,
            scenario: ScenarioSource::Stationary,
            run_length: 100,
            seed: 1,
        }
    }

    fn bare_world(grid: RoadGrid, cfg: &SimConfig) -> World {
        let mut c = cfg.clone();
        c.driver_capacity = 0;
        c.riders_per_tick = 0;
        World::with_parts(&c, Arc::new(grid), ScenarioSchedule::stationary(0, 0)).unwrap()
    }

    #[test]
    fn empty_world() {
        let w = World::new(&config(MovementPolicy::RandomSearch, 0, 0)).unwrap();
        assert!(w.drivers().is_empty() && w.riders().is_empty());
        assert_eq!(w.tick_count(), 0);
    }

    #[test]
    fn same_seed_same_initial_world() {
        let c = config(MovementPolicy::RandomSearch, 50, 20);
        let a = World::new(&c).unwrap();
        let b = World::new(&c).unwrap();
        assert_eq!(a.drivers(), b.drivers());
        assert_eq!(a.riders(), b.riders());
    }

    #[test]
    fn nearby_rider_is_picked_up() {
        let mut cfg = config(MovementPolicy::RandomSearch, 0, 0);
        cfg.random_exit = false;
        let grid = RoadGrid::street_grid(21, 21, 4).unwrap();
        let mut w = bare_world(grid, &cfg);
        w.drivers.push(DriverAgent::new(
            DriverId(0),
            Position::new(4.5, 3.9),
            crate::grid::Heading::new(270.0),
            100.0,
        ));
        w.riders.push(RiderAgent {
            id: RiderId(0),
            pos: Position::new(4.5, 0.5),
            destination: Position::new(16.5, 16.5),
            wait_time: 0,
        });
        w.next_driver = 1;
        w.next_rider = 1;
        // 3.4 away before moving, 2.9 after one step north
        w.tick();
        assert!(w.riders().is_empty());
        let d = &w.drivers()[0];
        assert_eq!(d.pickup_count, 1);
        assert_eq!(d.passenger_id(), Some(RiderId(0)));
        assert_eq!(d.cash, Cents(200 + 60));
    }

    #[test]
    fn rider_gives_up_at_the_limit() {
        let mut cfg = config(MovementPolicy::RandomSearch, 0, 0);
        cfg.random_exit = false;
        let mut w = bare_world(RoadGrid::street_grid(21, 21, 4).unwrap(), &cfg);
        w.riders.push(RiderAgent {
            id: RiderId(0),
            pos: Position::new(0.5, 0.5),
            destination: Position::new(4.5, 0.5),
            wait_time: 19,
        });
        w.next_rider = 1;
        w.tick();
        assert!(w.riders().is_empty());
        assert_eq!(w.bank().gave_up_rider_count, 1);
    }

    #[test]
    fn exhausted_driver_mid_trip_breaks_the_pickup_dropoff_tie() {
        let mut cfg = config(MovementPolicy::RandomSearch, 0, 0);
        cfg.random_exit = false;
        let mut w = bare_world(RoadGrid::street_grid(21, 21, 4).unwrap(), &cfg);
        let mut d = DriverAgent::new(
            DriverId(0),
            Position::new(0.5, 0.5),
            crate::grid::Heading::new(0.0),
            0.5,
        );
        d.passenger = Some(Passenger {
            rider: RiderId(7),
            destination: Position::new(20.5, 20.5),
        });
        d.pickup_count = 1;
        d.cash = Cents(200);
        w.totals.pickups = 1;
        w.drivers.push(d);
        w.next_driver = 1;
        let f = w.tick();
        assert!(w.drivers().is_empty());
        assert_eq!(w.bank().banked_cash, Cents(260));
        assert_eq!(w.totals().discarded_passengers, 1);
        assert!(f.total_pickups > f.total_dropoffs);
        assert_eq!(f.total_profit, Cents(260));
    }

    #[test]
    fn arrival_leads_to_dropoff() {
        let mut cfg = config(MovementPolicy::RandomSearch, 0, 0);
        cfg.random_exit = false;
        let mut w = bare_world(RoadGrid::street_grid(21, 21, 4).unwrap(), &cfg);
        let mut d = DriverAgent::new(
            DriverId(0),
            Position::new(0.5, 0.5),
            crate::grid::Heading::new(0.0),
            100.0,
        );
        d.passenger = Some(Passenger {
            rider: RiderId(0),
            destination: Position::new(2.5, 0.5),
        });
        d.pickup_count = 1;
        w.totals.pickups = 1;
        w.drivers.push(d);
        w.next_driver = 1;
        let f = w.tick();
        assert_eq!(f.total_dropoffs, 1);
        assert_eq!(w.drivers()[0].dropoff_count, 1);
        assert!(!w.drivers()[0].has_passenger());
    }

    #[test]
    fn kill_count_distribution() {
        // P(round(|Z|) = 0) = P(|Z| < 0.5) = 2*Phi(0.5) - 1
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let zeros = (0..n).filter(|_| kill_count(&mut rng) == 0).count();
        let p0 = zeros as f64 / n as f64;
        assert!((p0 - 0.382_924_922_548_026).abs() < 0.01, "{p0}");
    }

    #[test]
    fn capacity_tracks_the_schedule() {
        let mut cfg = config(MovementPolicy::RandomSearch, 0, 0);
        cfg.random_exit = false;
        let schedule = ScenarioSchedule::from_entries(vec![
            crate::scenario::ScheduleEntry {
                start_minute: 0,
                driver_capacity: 40,
                rider_rate: 0,
            },
            crate::scenario::ScheduleEntry {
                start_minute: 50,
                driver_capacity: 10,
                rider_rate: 0,
            },
        ])
        .unwrap();
        let grid = Arc::new(RoadGrid::street_grid(21, 21, 4).unwrap());
        let mut w = World::with_parts(&cfg, grid, schedule).unwrap();
        for _ in 0..20 {
            w.tick();
        }
        assert_eq!(w.drivers().len(), 40);
        for _ in 0..30 {
            w.tick();
        }
        // drivers above capacity are not evicted
        assert_eq!(w.drivers().len(), 40);
    }
}

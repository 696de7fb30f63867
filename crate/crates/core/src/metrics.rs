//! Per-tick output frames, the frames CSV, and profit summary statistics.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::agents::{CARRY_RATE, PICKUP_FARE};
use crate::engine::World;
use crate::money::Cents;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot summarize an empty series")]
    EmptySeries,
    #[error("sample needs at least two values with nonzero variance")]
    DegenerateSample,
    #[error("frames csv line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("write failed: {0}")]
    IoFailure(#[from] io::Error),
}

/// Snapshot of the model outputs at the end of a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    pub tick: u64,
    pub active_drivers: u64,
    pub active_riders: u64,
    pub total_riders_gave_up: u64,
    pub avg_pickups_per_tick: f64,
    pub total_pickups: u64,
    pub total_dropoffs: u64,
    pub idle_drivers: u64,
    pub working_drivers: u64,
    pub avg_cash_active: f64,
    pub randomly_left_count: u64,
    pub passengers_in_trips: u64,
    pub avg_rider_wait: f64,
    pub avg_driver_energy: f64,
    pub total_cash_active: Cents,
    pub avg_fare_per_ride: f64,
    pub total_profit: Cents,
}

pub const CSV_HEADER: [&str; 17] = [
    "tick",
    "active_drivers",
    "active_riders",
    "total_riders_gave_up",
    "avg_pickups_per_tick",
    "total_pickups",
    "total_dropoffs",
    "idle_drivers",
    "working_drivers",
    "avg_cash_active",
    "randomly_left_count",
    "passengers_in_trips",
    "avg_rider_wait",
    "avg_driver_energy",
    "total_cash_active",
    "avg_fare_per_ride",
    "total_profit",
];

fn mean_or_zero(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn collect(world: &World) -> MetricsFrame {
    let drivers = world.drivers();
    let riders = world.riders();
    let bank = world.bank();
    let totals = world.totals();
    let working = drivers.iter().filter(|d| d.has_passenger()).count() as u64;
    let active_cash = world.active_cash();
    let fares = PICKUP_FARE * totals.pickups as i64 + CARRY_RATE * totals.carry_ticks as i64;
    MetricsFrame {
        tick: world.tick_count(),
        active_drivers: drivers.len() as u64,
        active_riders: riders.len() as u64,
        total_riders_gave_up: bank.gave_up_rider_count,
        avg_pickups_per_tick: if world.tick_count() == 0 {
            0.0
        } else {
            totals.pickups as f64 / world.tick_count() as f64
        },
        total_pickups: totals.pickups,
        total_dropoffs: totals.dropoffs,
        idle_drivers: drivers.len() as u64 - working,
        working_drivers: working,
        avg_cash_active: mean_or_zero(active_cash.dollars(), drivers.len()),
        randomly_left_count: bank.random_left_driver_count + bank.departed_rider_random_count,
        passengers_in_trips: drivers.iter().filter(|d| d.passenger.is_some()).count() as u64,
        avg_rider_wait: mean_or_zero(
            riders.iter().map(|r| r.wait_time as f64).sum(),
            riders.len(),
        ),
        avg_driver_energy: mean_or_zero(drivers.iter().map(|d| d.energy).sum(), drivers.len()),
        total_cash_active: active_cash,
        avg_fare_per_ride: fares.dollars() / totals.dropoffs.max(1) as f64,
        total_profit: active_cash + bank.banked_cash,
    }
}

impl MetricsFrame {
    fn csv_row(&self) -> String {
        let mut row = String::with_capacity(160);
        let _ = write!(
            row,
            "{},{},{},{},{:.4},{},{},{},{},{:.4},{},{},{:.4},{:.4},{},{:.4},{}",
            self.tick,
            self.active_drivers,
            self.active_riders,
            self.total_riders_gave_up,
            self.avg_pickups_per_tick,
            self.total_pickups,
            self.total_dropoffs,
            self.idle_drivers,
            self.working_drivers,
            self.avg_cash_active,
            self.randomly_left_count,
            self.passengers_in_trips,
            self.avg_rider_wait,
            self.avg_driver_energy,
            self.total_cash_active,
            self.avg_fare_per_ride,
            self.total_profit,
        );
        row
    }
}

/// Writes the header and one row per frame. Counts are integers, currency
/// totals carry two decimals and averages four.
pub fn write_csv<W: Write>(frames: &[MetricsFrame], mut out: W) -> Result<(), MetricsError> {
    out.write_all(CSV_HEADER.join(",").as_bytes())?;
    out.write_all(b"\n")?;
    for f in frames {
        out.write_all(f.csv_row().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string(frames: &[MetricsFrame]) -> String {
    let mut buf = Vec::new();
    write_csv(frames, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}

/// Parses a frames CSV produced by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<MetricsFrame>, MetricsError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or("");
    if header != CSV_HEADER.join(",") {
        return Err(MetricsError::Parse {
            line: 1,
            reason: "unexpected header".into(),
        });
    }
    let mut frames = Vec::new();
    for (idx, line) in lines {
        let err = |reason: String| MetricsError::Parse {
            line: idx + 1,
            reason,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != CSV_HEADER.len() {
            return Err(err(format!("expected 17 fields, found {}", fields.len())));
        }
        let int = |i: usize| -> Result<u64, MetricsError> {
            fields[i]
                .parse()
                .map_err(|_| err(format!("{}: not an integer", CSV_HEADER[i])))
        };
        let float = |i: usize| -> Result<f64, MetricsError> {
            fields[i]
                .parse()
                .map_err(|_| err(format!("{}: not a number", CSV_HEADER[i])))
        };
        let money = |i: usize| -> Result<Cents, MetricsError> {
            Cents::parse(fields[i]).ok_or_else(|| err(format!("{}: not currency", CSV_HEADER[i])))
        };
        frames.push(MetricsFrame {
            tick: int(0)?,
            active_drivers: int(1)?,
            active_riders: int(2)?,
            total_riders_gave_up: int(3)?,
            avg_pickups_per_tick: float(4)?,
            total_pickups: int(5)?,
            total_dropoffs: int(6)?,
            idle_drivers: int(7)?,
            working_drivers: int(8)?,
            avg_cash_active: float(9)?,
            randomly_left_count: int(10)?,
            passengers_in_trips: int(11)?,
            avg_rider_wait: float(12)?,
            avg_driver_energy: float(13)?,
            total_cash_active: money(14)?,
            avg_fare_per_ride: float(15)?,
            total_profit: money(16)?,
        });
    }
    Ok(frames)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub standard_error: f64,
    pub median: f64,
    pub standard_deviation: f64,
    pub maximum: f64,
}

impl SummaryStats {
    /// `key = value` block, one statistic per line.
    pub fn to_text(&self) -> String {
        format!(
            "count = {}\nmean = {:.4}\nstandard_error = {:.4}\nmedian = {:.4}\nstandard_deviation = {:.4}\nmaximum = {:.4}\n",
            self.count, self.mean, self.standard_error, self.median, self.standard_deviation, self.maximum
        )
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator); 0 for fewer than two values.
fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn summarize(series: &[f64]) -> Result<SummaryStats, MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let n = series.len();
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let sd = sample_variance(series).sqrt();
    Ok(SummaryStats {
        count: n,
        mean: mean(series),
        standard_error: sd / (n as f64).sqrt(),
        median,
        standard_deviation: sd,
        maximum: sorted[n - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
}

/// Welch's unequal-variance t-test with a two-sided p-value.
pub fn welch_test(a: &[f64], b: &[f64]) -> Result<WelchResult, MetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::DegenerateSample);
    }
    let (va, vb) = (sample_variance(a), sample_variance(b));
    if va == 0.0 || vb == 0.0 || !va.is_finite() || !vb.is_finite() {
        return Err(MetricsError::DegenerateSample);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let t = (mean(a) - mean(b)) / (sa + sb).sqrt();
    let dof = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    if !(dof > 0.0 && t.is_finite()) {
        return Err(MetricsError::DegenerateSample);
    }
    // two-sided tail of Student's t: I_{dof/(dof+t^2)}(dof/2, 1/2)
    let p = beta_reg(dof / 2.0, 0.5, dof / (dof + t * t)).min(1.0);
    Ok(WelchResult {
        t_statistic: t,
        degrees_of_freedom: dof,
        p_value: p,
    })
}

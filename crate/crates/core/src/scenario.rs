//! Driver capacity and rider arrival rate over the course of a run.
//!
//! Schedules are step functions: an entry's values hold until the next
//! entry starts, and the last entry holds to the end of the run.
//!
//! File format, one entry per line: `start_minute capacity rate`. Blank
//! lines and anything after `#` are ignored.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("schedule has no entries")]
    Empty,
    #[error("first schedule entry must start at minute 0, found {0}")]
    FirstNotZero(u32),
    #[error("line {line}: start minute {start} does not increase")]
    NotIncreasing { line: usize, start: u32 },
    #[error("line {line}: expected `start_minute capacity rate`, got {text:?}")]
    Malformed { line: usize, text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleMode {
    Stationary,
    Scheduled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub start_minute: u32,
    pub driver_capacity: u32,
    pub rider_rate: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSchedule {
    mode: ScheduleMode,
    entries: Vec<ScheduleEntry>,
}

/// Saturday scenario, minute 0 is 5:00 AM:
/// (start minute, driver capacity, rider rate).
const SATURDAY: [(u32, u32, u32); 17] = [
    (0, 10, 5),     // 5AM
    (180, 20, 10),  // 8AM
    (360, 50, 20),  // 11AM
    (420, 5, 10),   // 12PM
    (510, 45, 25),  // 1.30PM
    (570, 50, 15),  // 2.30PM
    (630, 25, 10),  // 3.30PM
    (750, 40, 5),   // 5.30PM
    (810, 45, 5),   // 6.30PM
    (870, 60, 30),  // 7.30PM
    (930, 80, 40),  // 8.30PM
    (990, 100, 40), // 9.30PM
    (1050, 90, 10), // 10.30PM
    (1110, 80, 10), // 11.30PM
    (1170, 75, 30), // 12.30AM
    (1260, 65, 30), // 2AM
    (1380, 35, 10), // 4AM
];

impl ScenarioSchedule {
    /// Constant capacity and rate for every tick.
    pub fn stationary(driver_capacity: u32, rider_rate: u32) -> Self {
        ScenarioSchedule {
            mode: ScheduleMode::Stationary,
            entries: vec![ScheduleEntry {
                start_minute: 0,
                driver_capacity,
                rider_rate,
            }],
        }
    }

    pub fn saturday() -> Self {
        let entries = SATURDAY
            .iter()
            .map(|&(start_minute, driver_capacity, rider_rate)| ScheduleEntry {
                start_minute,
                driver_capacity,
                rider_rate,
            })
            .collect();
        ScenarioSchedule {
            mode: ScheduleMode::Scheduled,
            entries,
        }
    }

    pub fn from_entries(entries: Vec<ScheduleEntry>) -> Result<Self, ScenarioError> {
        let first = entries.first().ok_or(ScenarioError::Empty)?;
        if first.start_minute != 0 {
            return Err(ScenarioError::FirstNotZero(first.start_minute));
        }
        for (i, pair) in entries.windows(2).enumerate() {
            if pair[1].start_minute <= pair[0].start_minute {
                return Err(ScenarioError::NotIncreasing {
                    line: i + 2,
                    start: pair[1].start_minute,
                });
            }
        }
        Ok(ScenarioSchedule {
            mode: ScheduleMode::Scheduled,
            entries,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut entries: Vec<ScheduleEntry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let malformed = || ScenarioError::Malformed {
                line,
                text: raw.to_string(),
            };
            let fields: Vec<u32> = body
                .split_whitespace()
                .map(|f| f.parse::<u32>().map_err(|_| malformed()))
                .collect::<Result<_, _>>()?;
            let [start_minute, driver_capacity, rider_rate] = fields[..] else {
                return Err(malformed());
            };
            if let Some(prev) = entries.last() {
                if start_minute <= prev.start_minute {
                    return Err(ScenarioError::NotIncreasing {
                        line,
                        start: start_minute,
                    });
                }
            }
            entries.push(ScheduleEntry {
                start_minute,
                driver_capacity,
                rider_rate,
            });
        }
        Self::from_entries(entries)
    }

    pub fn to_document(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {}", e.start_minute, e.driver_capacity, e.rider_rate);
        }
        out
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    /// `(driver_capacity, rider_rate)` in effect at `tick`.
    pub fn rates_at(&self, tick: u64) -> (u32, u32) {
        let idx = self
            .entries
            .partition_point(|e| u64::from(e.start_minute) <= tick)
            .saturating_sub(1);
        let e = &self.entries[idx];
        (e.driver_capacity, e.rider_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry_at(s: &ScenarioSchedule, minute: u32) -> (u32, u32) {
        let e = s
            .entries()
            .iter()
            .find(|e| e.start_minute == minute)
            .unwrap();
        (e.driver_capacity, e.rider_rate)
    }

    #[test]
    fn saturday_table_values() {
        let s = ScenarioSchedule::saturday();
        assert_eq!(s.entries().len(), 17);
        let starts: Vec<u32> = s.entries().iter().map(|e| e.start_minute).collect();
        assert_eq!(
            starts,
            [0, 180, 360, 420, 510, 570, 630, 750, 810, 870, 930, 990, 1050, 1110, 1170, 1260, 1380]
        );
        assert_eq!(entry_at(&s, 360), (50, 20));
        assert_eq!(entry_at(&s, 630), (25, 10));
        assert_eq!(entry_at(&s, 930), (80, 40));
    }

    #[test]
    fn step_hold_lookup() {
        let s = ScenarioSchedule::saturday();
        assert_eq!(s.rates_at(435), (5, 10));
        assert_eq!(s.rates_at(1439), (35, 10));
        assert_eq!(s.rates_at(0), (10, 5));
        assert_eq!(s.rates_at(179), (10, 5));
        assert_eq!(s.rates_at(180), (20, 10));
        assert_eq!(s.rates_at(100_000), (35, 10));
        let st = ScenarioSchedule::stationary(100, 30);
        for t in [0, 1, 719, 1440, 9999] {
            assert_eq!(st.rates_at(t), (100, 30));
        }
    }

    #[test]
    fn document_round_trip() {
        let s = ScenarioSchedule::saturday();
        let doc = s.to_document();
        let again = ScenarioSchedule::parse(&doc).unwrap();
        assert_eq!(again.entries(), s.entries());
        assert_eq!(again.to_document(), doc);
    }

    #[test]
    fn parse_comments_and_errors() {
        let s = ScenarioSchedule::parse("# header\n0 5 5  # early\n\n60 10 2\n").unwrap();
        assert_eq!(s.rates_at(61), (10, 2));
        assert!(matches!(
            ScenarioSchedule::parse("0 5 5\n0 6 6\n"),
            Err(ScenarioError::NotIncreasing { line: 2, .. })
        ));
        assert_eq!(
            ScenarioSchedule::parse("10 5 5\n"),
            Err(ScenarioError::FirstNotZero(10))
        );
        assert!(matches!(
            ScenarioSchedule::parse("0 5\n"),
            Err(ScenarioError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            ScenarioSchedule::parse("0 5 -1\n"),
            Err(ScenarioError::Malformed { .. })
        ));
        assert_eq!(ScenarioSchedule::parse("# nothing\n"), Err(ScenarioError::Empty));
    }

    #[test]
    fn total_variation_equals_sum_of_jumps() {
        let s = ScenarioSchedule::saturday();
        let mut tv = 0u64;
        let mut prev = s.rates_at(0);
        for t in 1..1440 {
            let cur = s.rates_at(t);
            tv += u64::from(cur.0.abs_diff(prev.0)) + u64::from(cur.1.abs_diff(prev.1));
            prev = cur;
        }
        let jumps: u64 = s
            .entries()
            .windows(2)
            .map(|w| {
                u64::from(w[1].driver_capacity.abs_diff(w[0].driver_capacity))
                    + u64::from(w[1].rider_rate.abs_diff(w[0].rider_rate))
            })
            .sum();
        assert_eq!(tv, jumps);
    }
}

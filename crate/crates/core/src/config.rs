//! Simulation configuration and its flat `key = value` text form.
//!
//! ```text
//! # desk-scale Saturday run
//! grid = synthetic:60,60,4
//! policy = voronoi
//! voronoi_vision = 3
//! scenario = saturday
//! seed = 42
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::movement::{MovementPolicy, StepParams};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: cannot use {value:?}, expected {expected}")]
    TypeError {
        key: String,
        value: String,
        expected: String,
    },
    #[error("missing required key `{0}`")]
    MissingRequired(&'static str),
    #[error("`{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridSource {
    File(PathBuf),
    Synthetic {
        width: usize,
        height: usize,
        spacing: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioSource {
    Stationary,
    Saturday,
    File(PathBuf),
}

impl ScenarioSource {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSource::Stationary => "stationary",
            ScenarioSource::Saturday => "saturday",
            ScenarioSource::File(_) => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: GridSource,
    /// Driver capacity for stationary runs.
    pub driver_capacity: u32,
    /// Rider spawn attempts per tick for stationary runs.
    pub riders_per_tick: u32,
    pub policy: MovementPolicy,
    /// Retained even under random search so the echoed config is complete.
    pub voronoi_vision: f64,
    pub step: StepParams,
    pub pickup_radius: f64,
    pub dropoff_radius: f64,
    /// `None` means riders wait forever.
    pub max_wait: Option<u64>,
    pub random_exit: bool,
    pub scenario: ScenarioSource,
    pub run_length: u64,
    pub seed: u64,
}

pub const DEFAULT_DRIVERS: u32 = 100;
pub const DEFAULT_RIDERS_PER_TICK: u32 = 30;
pub const DEFAULT_VISION: f64 = 3.0;
pub const DEFAULT_RADIUS: f64 = 3.0;
pub const DEFAULT_MAX_WAIT: u64 = 20;
pub const DEFAULT_RUN_LENGTH: u64 = 1440;

/// Keys accepted by [`ConfigBuilder::set`].
pub const KEYS: &[&str] = &[
    "grid",
    "drivers_count",
    "riders_per_tick",
    "policy",
    "voronoi_vision",
    "step_length",
    "pickup_radius",
    "dropoff_radius",
    "max_wait",
    "random_exit",
    "scenario",
    "seed",
    "run_length",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PolicyKind {
    Random,
    Voronoi,
}

/// Accumulates key/value assignments; later assignments win.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    grid: Option<GridSource>,
    drivers_count: Option<u32>,
    riders_per_tick: Option<u32>,
    policy: Option<PolicyKind>,
    voronoi_vision: Option<f64>,
    step_length: Option<f64>,
    pickup_radius: Option<f64>,
    dropoff_radius: Option<f64>,
    max_wait: Option<Option<u64>>,
    random_exit: Option<bool>,
    scenario: Option<ScenarioSource>,
    seed: Option<u64>,
    run_length: Option<u64>,
}

fn type_error(key: &str, value: &str, expected: &str) -> ConfigError {
    ConfigError::TypeError {
        key: key.to_string(),
        value: value.to_string(),
        expected: expected.to_string(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| type_error(key, value, expected))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_num(key, value, "a number")?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(type_error(key, value, "a finite number"))
    }
}

fn parse_grid(value: &str) -> Result<GridSource, ConfigError> {
    const EXPECTED: &str = "`file:<path>` or `synthetic:<width>,<height>,<spacing>`";
    if let Some(path) = value.strip_prefix("file:") {
        if path.is_empty() {
            return Err(type_error("grid", value, EXPECTED));
        }
        return Ok(GridSource::File(PathBuf::from(path)));
    }
    if let Some(spec) = value.strip_prefix("synthetic:") {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        if let [w, h, s] = parts[..] {
            let parse = |t: &str| t.parse::<usize>().map_err(|_| type_error("grid", value, EXPECTED));
            return Ok(GridSource::Synthetic {
                width: parse(w)?,
                height: parse(h)?,
                spacing: parse(s)?,
            });
        }
    }
    Err(type_error("grid", value, EXPECTED))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(type_error(key, value, "one of true, false")),
    }
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "grid" => self.grid = Some(parse_grid(value)?),
            "drivers_count" => {
                self.drivers_count = Some(parse_num(key, value, "a non-negative integer")?)
            }
            "riders_per_tick" => {
                self.riders_per_tick = Some(parse_num(key, value, "a non-negative integer")?)
            }
            "policy" => {
                self.policy = Some(match value {
                    "random" => PolicyKind::Random,
                    "voronoi" => PolicyKind::Voronoi,
                    _ => return Err(type_error(key, value, "one of random, voronoi")),
                })
            }
            "voronoi_vision" => self.voronoi_vision = Some(parse_f64(key, value)?),
            "step_length" => self.step_length = Some(parse_f64(key, value)?),
            "pickup_radius" => self.pickup_radius = Some(parse_f64(key, value)?),
            "dropoff_radius" => self.dropoff_radius = Some(parse_f64(key, value)?),
            "max_wait" => {
                self.max_wait = Some(match value {
                    "inf" | "none" | "infinite" => None,
                    _ => Some(parse_num(key, value, "a non-negative integer or `inf`")?),
                })
            }
            "random_exit" => self.random_exit = Some(parse_bool(key, value)?),
            "scenario" => {
                self.scenario = Some(match value {
                    "stationary" => ScenarioSource::Stationary,
                    "saturday" => ScenarioSource::Saturday,
                    _ => match value.strip_prefix("file:") {
                        Some(p) if !p.is_empty() => ScenarioSource::File(PathBuf::from(p)),
                        _ => {
                            return Err(type_error(
                                key,
                                value,
                                "one of stationary, saturday, file:<path>",
                            ))
                        }
                    },
                })
            }
            "seed" => self.seed = Some(parse_num(key, value, "a 64-bit unsigned integer")?),
            "run_length" => self.run_length = Some(parse_num(key, value, "a non-negative integer")?),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            };
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn has_policy(&self) -> bool {
        self.policy.is_some()
    }

    pub fn has_grid(&self) -> bool {
        self.grid.is_some()
    }

    pub fn build(&self) -> Result<SimConfig, ConfigError> {
        let grid = self.grid.clone().ok_or(ConfigError::MissingRequired("grid"))?;
        let kind = self.policy.ok_or(ConfigError::MissingRequired("policy"))?;
        let vision = self.voronoi_vision.unwrap_or(DEFAULT_VISION);
        let policy = match kind {
            PolicyKind::Random => MovementPolicy::RandomSearch,
            PolicyKind::Voronoi => MovementPolicy::VoronoiSearch { vision },
        };
        let config = SimConfig {
            grid,
            driver_capacity: self.drivers_count.unwrap_or(DEFAULT_DRIVERS),
            riders_per_tick: self.riders_per_tick.unwrap_or(DEFAULT_RIDERS_PER_TICK),
            policy,
            voronoi_vision: vision,
            step: StepParams {
                step_length: self.step_length.unwrap_or(StepParams::default().step_length),
            },
            pickup_radius: self.pickup_radius.unwrap_or(DEFAULT_RADIUS),
            dropoff_radius: self.dropoff_radius.unwrap_or(DEFAULT_RADIUS),
            max_wait: self.max_wait.unwrap_or(Some(DEFAULT_MAX_WAIT)),
            random_exit: self.random_exit.unwrap_or(true),
            scenario: self.scenario.clone().unwrap_or(ScenarioSource::Stationary),
            run_length: self.run_length.unwrap_or(DEFAULT_RUN_LENGTH),
            seed: self.seed.unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<SimConfig, ConfigError> {
        let mut b = ConfigBuilder::new();
        b.apply_text(text)?;
        b.build()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key, reason: &str| {
            Err(ConfigError::Invalid {
                key,
                reason: reason.to_string(),
            })
        };
        if self.pickup_radius.is_nan() || self.pickup_radius <= 0.0 {
            return invalid("pickup_radius", "must be greater than 0");
        }
        if self.dropoff_radius.is_nan() || self.dropoff_radius <= 0.0 {
            return invalid("dropoff_radius", "must be greater than 0");
        }
        if !(self.step.step_length > 0.0 && self.step.step_length <= 1.0) {
            return invalid("step_length", "must be in (0, 1]");
        }
        if self.voronoi_vision.is_nan() || self.voronoi_vision <= 0.0 {
            return invalid("voronoi_vision", "must be greater than 0");
        }
        if self.run_length < 1 {
            return invalid("run_length", "must be at least 1");
        }
        Ok(())
    }

    pub fn with_policy(&self, policy: MovementPolicy) -> SimConfig {
        SimConfig {
            policy,
            ..self.clone()
        }
    }

    /// Canonical text form; [`SimConfig::parse`] reproduces `self` from it.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let grid = match &self.grid {
            GridSource::File(p) => format!("file:{}", p.display()),
            GridSource::Synthetic {
                width,
                height,
                spacing,
            } => format!("synthetic:{width},{height},{spacing}"),
        };
        let scenario = match &self.scenario {
            ScenarioSource::File(p) => format!("file:{}", p.display()),
            other => other.name().to_string(),
        };
        let max_wait = self
            .max_wait
            .map_or_else(|| "inf".to_string(), |w| w.to_string());
        let _ = writeln!(out, "grid = {grid}");
        let _ = writeln!(out, "drivers_count = {}", self.driver_capacity);
        let _ = writeln!(out, "riders_per_tick = {}", self.riders_per_tick);
        let _ = writeln!(out, "policy = {}", self.policy.name());
        let _ = writeln!(out, "voronoi_vision = {:?}", self.voronoi_vision);
        let _ = writeln!(out, "step_length = {:?}", self.step.step_length);
        let _ = writeln!(out, "pickup_radius = {:?}", self.pickup_radius);
        let _ = writeln!(out, "dropoff_radius = {:?}", self.dropoff_radius);
        let _ = writeln!(out, "max_wait = {max_wait}");
        let _ = writeln!(out, "random_exit = {}", self.random_exit);
        let _ = writeln!(out, "scenario = {scenario}");
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "run_length = {}", self.run_length);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "grid = synthetic:60,60,4\n";

    #[test]
    fn voronoi_vision_and_step_length() {
        let c = SimConfig::parse(&format!(
            "{BASE}policy = voronoi\nvoronoi_vision = 3\nstep_length = 0.5\n"
        ))
        .unwrap();
        assert_eq!(c.policy, MovementPolicy::VoronoiSearch { vision: 3.0 });
        assert_eq!(c.step, StepParams { step_length: 0.5 });
    }

    #[test]
    fn unknown_policy_names_valid_values() {
        let err = SimConfig::parse(&format!("{BASE}policy = teleport\n")).unwrap_err();
        match &err {
            ConfigError::TypeError { key, expected, .. } => {
                assert_eq!(key, "policy");
                assert!(expected.contains("random") && expected.contains("voronoi"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn required_and_unknown_keys() {
        assert_eq!(
            SimConfig::parse("policy = random\n"),
            Err(ConfigError::MissingRequired("grid"))
        );
        assert_eq!(SimConfig::parse(BASE), Err(ConfigError::MissingRequired("policy")));
        assert_eq!(
            SimConfig::parse(&format!("{BASE}policy = random\nspeed = 3\n")),
            Err(ConfigError::UnknownKey("speed".into()))
        );
        assert!(matches!(
            SimConfig::parse("grid synthetic"),
            Err(ConfigError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn invariant_violations() {
        for bad in ["run_length = 0", "step_length = 1.5", "pickup_radius = 0", "voronoi_vision = -1"] {
            let r = SimConfig::parse(&format!("{BASE}policy = random\n{bad}\n"));
            assert!(matches!(r, Err(ConfigError::Invalid { .. })), "{bad}: {r:?}");
        }
    }

    #[test]
    fn all_inputs_representable_and_echo_round_trips() {
        let text = "\
# everything
grid = file:maps/dc.txt
drivers_count = 150
riders_per_tick = 75
policy = voronoi
voronoi_vision = 2.5
step_length = 0.25
pickup_radius = 2
dropoff_radius = 4
max_wait = inf
random_exit = off
scenario = file:sched.txt
seed = 18446744073709551615
run_length = 60
";
        let c = SimConfig::parse(text).unwrap();
        assert_eq!(c.grid, GridSource::File("maps/dc.txt".into()));
        assert_eq!(c.max_wait, None);
        assert!(!c.random_exit);
        assert_eq!(c.scenario, ScenarioSource::File("sched.txt".into()));
        assert_eq!(c.seed, u64::MAX);
        let echo = c.to_config_text();
        assert_eq!(SimConfig::parse(&echo).unwrap(), c);
    }

    #[test]
    fn later_assignments_win() {
        let mut b = ConfigBuilder::new();
        b.apply_text(&format!("{BASE}policy = random\nseed = 1\n")).unwrap();
        b.set("seed", "42").unwrap();
        b.set("policy", "voronoi").unwrap();
        let c = b.build().unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.policy.name(), "voronoi");
    }
}

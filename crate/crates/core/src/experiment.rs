//! Multi-run experiments: the scenario x policy comparison and parameter
//! sweeps. Runs execute in parallel; results are always returned in
//! `(cell, seed)` order so output does not depend on scheduling.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioSource, SimConfig};
use crate::engine::{load_grid, load_schedule, run_world, RunResult, SimError, World};
use crate::metrics::{summarize, welch_test, MetricsError, SummaryStats, WelchResult};
use crate::movement::MovementPolicy;

/// Significance level for the policy comparisons.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyChoice {
    Random,
    Voronoi,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub scenario: ScenarioSource,
    pub policy: PolicyChoice,
}

impl Cell {
    pub fn name(&self) -> String {
        let policy = match self.policy {
            PolicyChoice::Random => "random",
            PolicyChoice::Voronoi => "voronoi",
        };
        format!("{}-{policy}", self.scenario.name())
    }

    pub fn config(&self, base: &SimConfig, seed: u64) -> SimConfig {
        let policy = match self.policy {
            PolicyChoice::Random => MovementPolicy::RandomSearch,
            PolicyChoice::Voronoi => MovementPolicy::VoronoiSearch {
                vision: base.voronoi_vision,
            },
        };
        SimConfig {
            policy,
            scenario: self.scenario.clone(),
            seed,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub cells: Vec<Cell>,
    pub seeds: Vec<u64>,
    pub base: SimConfig,
}

impl ExperimentPlan {
    /// Stationary and Saturday scenarios, each under both policies.
    pub fn two_by_two(base: SimConfig, seeds: Vec<u64>) -> Self {
        let mut cells = Vec::new();
        for scenario in [ScenarioSource::Stationary, ScenarioSource::Saturday] {
            for policy in [PolicyChoice::Random, PolicyChoice::Voronoi] {
                cells.push(Cell {
                    scenario: scenario.clone(),
                    policy,
                });
            }
        }
        ExperimentPlan { cells, seeds, base }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.cells.is_empty() {
            return Err(ExperimentError::InvalidPlan("no cells".into()));
        }
        if self.seeds.is_empty() {
            return Err(ExperimentError::InvalidPlan("no seeds".into()));
        }
        let distinct: HashSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return Err(ExperimentError::InvalidPlan("seeds must be distinct".into()));
        }
        self.base.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CellRuns {
    pub cell: Cell,
    /// `(seed, result)` in plan seed order.
    pub runs: Vec<(u64, RunResult)>,
}

impl CellRuns {
    pub fn final_profits(&self) -> Vec<f64> {
        self.runs
            .iter()
            .map(|(_, r)| r.final_profit().map_or(0.0, |c| c.dollars()))
            .collect()
    }
}

/// Runs every `(cell, seed)` pair. Seeds are shared across cells so the
/// policies see common random numbers.
pub fn run_plan(plan: &ExperimentPlan) -> Result<Vec<CellRuns>, ExperimentError> {
    plan.validate()?;
    let grid = Arc::new(load_grid(&plan.base.grid)?);
    let jobs: Vec<(usize, u64)> = (0..plan.cells.len())
        .flat_map(|c| plan.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<Result<RunResult, SimError>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let config = plan.cells[c].config(&plan.base, seed);
            let schedule = load_schedule(&config)?;
            let world = World::with_parts(&config, Arc::clone(&grid), schedule)?;
            Ok(run_world(world, config.run_length))
        })
        .collect();
    let mut results = results.into_iter();
    let mut out = Vec::with_capacity(plan.cells.len());
    for cell in &plan.cells {
        let mut runs = Vec::with_capacity(plan.seeds.len());
        for &seed in &plan.seeds {
            let r = results.next().expect("one result per job")?;
            runs.push((seed, r));
        }
        out.push(CellRuns {
            cell: cell.clone(),
            runs,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NoSignificantDifference,
    VoronoiOutperforms,
    RandomOutperforms,
}

impl Verdict {
    pub fn from_test(voronoi_mean: f64, random_mean: f64, welch: &WelchResult) -> Verdict {
        if welch.p_value >= ALPHA {
            Verdict::NoSignificantDifference
        } else if voronoi_mean > random_mean {
            Verdict::VoronoiOutperforms
        } else {
            Verdict::RandomOutperforms
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::NoSignificantDifference => "no significant difference",
            Verdict::VoronoiOutperforms => "Voronoi outperforms",
            Verdict::RandomOutperforms => "random outperforms",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub final_profit: SummaryStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub voronoi: SummaryStats,
    pub random: SummaryStats,
    pub welch: WelchResult,
    /// Difference of means over the pooled standard deviation.
    pub standardized_difference: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub seeds: Vec<u64>,
    pub cells: Vec<CellSummary>,
    pub comparisons: Vec<Comparison>,
}

impl CompareReport {
    pub fn comparison(&self, scenario: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.scenario == scenario)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let s = &c.final_profit;
            out.push_str(&format!(
                "{:<22} n={:<3} mean={:>12.2} se={:>10.2} median={:>12.2} sd={:>10.2} max={:>12.2}\n",
                c.cell, s.count, s.mean, s.standard_error, s.median, s.standard_deviation, s.maximum
            ));
        }
        for c in &self.comparisons {
            out.push_str(&format!(
                "{}: voronoi vs random t={:.4} dof={:.2} p={:.6} ratio={:.4} -> {}\n",
                c.scenario,
                c.welch.t_statistic,
                c.welch.degrees_of_freedom,
                c.welch.p_value,
                c.voronoi.mean / c.random.mean,
                c.verdict
            ));
        }
        out
    }
}

fn pooled_sd(a: &SummaryStats, b: &SummaryStats) -> f64 {
    let (na, nb) = (a.count as f64, b.count as f64);
    let va = a.standard_deviation.powi(2);
    let vb = b.standard_deviation.powi(2);
    (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt()
}

pub fn compare_policies(
    scenario: &str,
    voronoi: &[f64],
    random: &[f64],
) -> Result<Comparison, ExperimentError> {
    let v = summarize(voronoi)?;
    let r = summarize(random)?;
    let welch = welch_test(voronoi, random)?;
    Ok(Comparison {
        scenario: scenario.to_string(),
        standardized_difference: (v.mean - r.mean) / pooled_sd(&v, &r),
        verdict: Verdict::from_test(v.mean, r.mean, &welch),
        voronoi: v,
        random: r,
        welch,
    })
}

/// Summaries per cell plus a Voronoi-vs-random test for each scenario that
/// has both policies.
pub fn build_report(plan: &ExperimentPlan, results: &[CellRuns]) -> Result<CompareReport, ExperimentError> {
    if plan.seeds.len() < 2 {
        return Err(ExperimentError::InvalidPlan(
            "at least two seeds are needed to compare policies".into(),
        ));
    }
    let mut cells = Vec::new();
    for cr in results {
        cells.push(CellSummary {
            cell: cr.cell.name(),
            final_profit: summarize(&cr.final_profits())?,
        });
    }
    let mut comparisons = Vec::new();
    let mut seen = Vec::new();
    for cr in results {
        let scenario = cr.cell.scenario.clone();
        if seen.contains(&scenario) {
            continue;
        }
        seen.push(scenario.clone());
        let find = |p: PolicyChoice| {
            results
                .iter()
                .find(|c| c.cell.scenario == scenario && c.cell.policy == p)
        };
        if let (Some(v), Some(r)) = (find(PolicyChoice::Voronoi), find(PolicyChoice::Random)) {
            comparisons.push(compare_policies(
                scenario.name(),
                &v.final_profits(),
                &r.final_profits(),
            )?);
        }
    }
    Ok(CompareReport {
        seeds: plan.seeds.clone(),
        cells,
        comparisons,
    })
}

pub fn compare(plan: &ExperimentPlan) -> Result<(Vec<CellRuns>, CompareReport), ExperimentError> {
    if plan.seeds.len() < 2 {
        return Err(ExperimentError::InvalidPlan(
            "at least two seeds are needed to compare policies".into(),
        ));
    }
    let results = run_plan(plan)?;
    let report = build_report(plan, &results)?;
    Ok((results, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub final_profit: SummaryStats,
}

/// Runs `base` with `key` set to each of `values`, every value over all
/// `seeds`, and summarizes final total profit per value.
pub fn sweep(
    base: &SimConfig,
    key: &str,
    values: &[String],
    seeds: &[u64],
) -> Result<Vec<SweepRow>, ExperimentError> {
    if seeds.is_empty() {
        return Err(ExperimentError::InvalidPlan("no seeds".into()));
    }
    if key == "seed" {
        return Err(ExperimentError::InvalidPlan("cannot sweep the seed".into()));
    }
    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let text = format!("{}{key} = {v}\n", base.to_config_text());
        configs.push(SimConfig::parse(&text)?);
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let finals: Vec<Result<f64, SimError>> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let config = SimConfig {
                seed,
                ..configs[i].clone()
            };
            let r = crate::engine::run(&config)?;
            Ok(r.final_profit().map_or(0.0, |c| c.dollars()))
        })
        .collect();
    let finals: Vec<f64> = finals.into_iter().collect::<Result<_, _>>()?;
    values
        .iter()
        .zip(finals.chunks(seeds.len()))
        .map(|(v, chunk)| {
            Ok(SweepRow {
                value: v.clone(),
                final_profit: summarize(chunk)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GridSource;

    fn base() -> SimConfig {
        SimConfig::parse("grid = synthetic:21,21,4\npolicy = random\nrun_length = 60\ndrivers_count = 20\nriders_per_tick = 5\n")
            .unwrap()
    }

    #[test]
    fn plan_validation() {
        let p = ExperimentPlan::two_by_two(base(), vec![1, 1]);
        assert!(matches!(p.validate(), Err(ExperimentError::InvalidPlan(_))));
        let p = ExperimentPlan::two_by_two(base(), vec![]);
        assert!(p.validate().is_err());
        let p = ExperimentPlan::two_by_two(base(), vec![3]);
        assert!(matches!(compare(&p), Err(ExperimentError::InvalidPlan(_))));
    }

    #[test]
    fn results_come_back_in_plan_order() {
        let p = ExperimentPlan::two_by_two(base(), vec![5, 2, 9]);
        let results = run_plan(&p).unwrap();
        assert_eq!(results.len(), 4);
        for (cr, cell) in results.iter().zip(&p.cells) {
            assert_eq!(&cr.cell, cell);
            let seeds: Vec<u64> = cr.runs.iter().map(|(s, _)| *s).collect();
            assert_eq!(seeds, [5, 2, 9]);
        }
        // each run equals its standalone counterpart
        let standalone = crate::engine::run(&p.cells[3].config(&p.base, 2)).unwrap();
        assert_eq!(results[3].runs[1].1.frames, standalone.frames);
    }

    #[test]
    fn compare_is_repeatable() {
        let p = ExperimentPlan::two_by_two(base(), vec![1, 2, 3, 4]);
        let (_, a) = compare(&p).unwrap();
        let (_, b) = compare(&p).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.comparisons.len(), 2);
    }

    #[test]
    fn verdict_rules() {
        let w = |p| WelchResult {
            t_statistic: 0.0,
            degrees_of_freedom: 10.0,
            p_value: p,
        };
        assert_eq!(Verdict::from_test(2.0, 1.0, &w(0.01)), Verdict::VoronoiOutperforms);
        assert_eq!(Verdict::from_test(1.0, 2.0, &w(0.01)), Verdict::RandomOutperforms);
        assert_eq!(Verdict::from_test(2.0, 1.0, &w(0.2)), Verdict::NoSignificantDifference);
        assert_eq!(Verdict::VoronoiOutperforms.to_string(), "Voronoi outperforms");
    }

    #[test]
    fn sweep_rows_per_value() {
        let b = SimConfig {
            grid: GridSource::Synthetic {
                width: 13,
                height: 13,
                spacing: 4,
            },
            ..base()
        };
        let rows = sweep(&b, "step_length", &["0.25".into(), "0.5".into()], &[1, 2]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].value, "0.25");
        assert_eq!(rows[1].final_profit.count, 2);
        assert!(sweep(&b, "nope", &["1".into()], &[1]).is_err());
    }
}

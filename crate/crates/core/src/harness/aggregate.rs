//! Final-performance aggregation over the tail of each learning curve.

use serde::{Deserialize, Serialize};

use crate::agent::{BudgetMode, EpisodeRow};

/// Which cumulative column measures consumed budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetAxis {
    Traces,
    Seconds,
}

impl From<BudgetMode> for BudgetAxis {
    fn from(mode: BudgetMode) -> Self {
        match mode {
            BudgetMode::TotalTraces => BudgetAxis::Traces,
            BudgetMode::WallClockSeconds => BudgetAxis::Seconds,
        }
    }
}

impl BudgetAxis {
    fn at(self, row: &EpisodeRow) -> f64 {
        match self {
            BudgetAxis::Traces => row.traces as f64,
            BudgetAxis::Seconds => row.seconds,
        }
    }
}

/// Learning curve of one run as stored in `run.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunCurve {
    pub n_mcts: u32,
    pub seed: u64,
    pub episodes: Vec<EpisodeRow>,
}

/// Mean return of the episodes completing in the final `fraction` of the
/// consumed budget. The horizon is the budget consumed at the end of the
/// last completed episode, so the last episode is always included.
/// `None` when there are no episodes.
pub fn last_fraction_mean(rows: &[EpisodeRow], fraction: f64, axis: BudgetAxis) -> Option<f64> {
    let horizon = axis.at(rows.last()?);
    let start = (1.0 - fraction) * horizon;
    mean(rows.iter().filter(|r| axis.at(r) > start).map(|r| r.ret))
}

/// Mean return of the episodes completing within the first `fraction` of
/// the consumed budget, falling back to the first episode alone.
pub fn first_fraction_mean(rows: &[EpisodeRow], fraction: f64, axis: BudgetAxis) -> Option<f64> {
    let horizon = axis.at(rows.last()?);
    let end = fraction * horizon;
    mean(rows.iter().filter(|r| axis.at(r) <= end).map(|r| r.ret)).or(Some(rows[0].ret))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Final performance of one planning budget across repetitions.
#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffRow {
    pub n_mcts: u32,
    /// `(seed, last-fraction mean)`; `None` flags a run without any
    /// completed episode, which is excluded from the statistics.
    pub per_seed: Vec<(u64, Option<f64>)>,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Group runs by `n_mcts` (ascending) and summarize each group.
pub fn aggregate_tradeoff(runs: &[RunCurve], fraction: f64, axis: BudgetAxis) -> Vec<TradeoffRow> {
    let mut budgets: Vec<u32> = runs.iter().map(|r| r.n_mcts).collect();
    budgets.sort_unstable();
    budgets.dedup();
    budgets
        .into_iter()
        .map(|n_mcts| {
            let mut per_seed: Vec<(u64, Option<f64>)> = runs
                .iter()
                .filter(|r| r.n_mcts == n_mcts)
                .map(|r| (r.seed, last_fraction_mean(&r.episodes, fraction, axis)))
                .collect();
            per_seed.sort_by_key(|(seed, _)| *seed);
            let valid: Vec<f64> = per_seed.iter().filter_map(|(_, v)| *v).collect();
            TradeoffRow {
                n_mcts,
                mean: mean(valid.iter().copied()),
                min: valid.iter().copied().reduce(f64::min),
                max: valid.iter().copied().reduce(f64::max),
                per_seed,
            }
        })
        .collect()
}

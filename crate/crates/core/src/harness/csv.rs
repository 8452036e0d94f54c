//! CSV artifacts. Headers are mandatory; numbers use shortest round-trip
//! formatting with `.` as decimal separator.
//!
//! - `run.csv`: `episode,real_steps,traces,seconds,return`. `seconds` is left
//!   empty for trace-budgeted runs so the file depends only on config and seed.
//! - `tradeoff.csv`: `n_mcts,seed,last_fraction_return,mean,min,max`, one line
//!   per run; empty fields mark runs without completed episodes.
//! - `entropy_map.csv`: `episode,x,y,entropy`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::TradeoffRow;
use super::entropy::EntropyMap;
use crate::agent::{BudgetMode, EpisodeRow};
use crate::error::{Error, Result};

pub const RUN_HEADER: &str = "episode,real_steps,traces,seconds,return";
pub const TRADEOFF_HEADER: &str = "n_mcts,seed,last_fraction_return,mean,min,max";
pub const ENTROPY_HEADER: &str = "episode,x,y,entropy";

#[derive(Serialize, Deserialize)]
struct RunLine {
    episode: u64,
    real_steps: u64,
    traces: u64,
    seconds: Option<f64>,
    #[serde(rename = "return")]
    ret: f64,
}

#[derive(Serialize)]
struct TradeoffLine {
    n_mcts: u32,
    seed: u64,
    last_fraction_return: Option<f64>,
    mean: Option<f64>,
    min: Option<f64>,
    max: Option<f64>,
}

#[derive(Serialize)]
struct EntropyLine {
    episode: u64,
    x: f64,
    y: f64,
    entropy: f64,
}

fn write_records<T: Serialize>(records: impl IntoIterator<Item = T>, header: &str) -> String {
    let mut w = ::csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("in-memory csv write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8");
    format!("{header}\n{body}")
}

pub fn run_csv(rows: &[EpisodeRow], mode: BudgetMode) -> String {
    let lines = rows.iter().map(|r| RunLine {
        episode: r.episode,
        real_steps: r.real_steps,
        traces: r.traces,
        seconds: match mode {
            BudgetMode::WallClockSeconds => Some(r.seconds),
            BudgetMode::TotalTraces => None,
        },
        ret: r.ret,
    });
    write_records(lines, RUN_HEADER)
}

pub fn tradeoff_csv(rows: &[TradeoffRow]) -> String {
    let lines = rows.iter().flat_map(|row| {
        row.per_seed.iter().map(move |&(seed, value)| TradeoffLine {
            n_mcts: row.n_mcts,
            seed,
            last_fraction_return: value,
            mean: row.mean,
            min: row.min,
            max: row.max,
        })
    });
    write_records(lines, TRADEOFF_HEADER)
}

pub fn entropy_csv(maps: &[EntropyMap]) -> String {
    let lines = maps.iter().flat_map(|map| {
        map.cells.iter().map(move |c| EntropyLine {
            episode: map.episode,
            x: c.x,
            y: c.y,
            entropy: c.entropy,
        })
    });
    write_records(lines, ENTROPY_HEADER)
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Read `run.csv`. A missing `seconds` value reads as NaN.
pub fn read_run_csv(path: &Path) -> Result<Vec<EpisodeRow>> {
    let mut reader = ::csv::Reader::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(path, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != RUN_HEADER {
        return Err(parse_err(path, "missing or unexpected header"));
    }
    reader
        .deserialize::<RunLine>()
        .map(|line| {
            let l = line.map_err(|e| parse_err(path, e.to_string()))?;
            Ok(EpisodeRow {
                episode: l.episode,
                real_steps: l.real_steps,
                traces: l.traces,
                seconds: l.seconds.unwrap_or(f64::NAN),
                ret: l.ret,
            })
        })
        .collect()
}

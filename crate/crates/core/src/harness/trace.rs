use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::common::MixedStrategy;
use crate::error::{Error, Result};
use crate::regret::RegretLedger;
use crate::strategies::PeriodRecord;

/// One player's state after trial `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerRow {
    pub action: usize,
    pub reward: f64,
    pub cumulative_reward: f64,
    pub external_regret: f64,
    pub internal_regret: f64,
    pub oracle_regret: f64,
    pub estimated_regret: f64,
    /// Mixed strategy the action was drawn from.
    pub strategy: Vec<f64>,
}

impl PlayerRow {
    pub(crate) fn new(action: usize, reward: f64, ledger: &RegretLedger, strategy: &MixedStrategy) -> Self {
        PlayerRow {
            action,
            reward,
            cumulative_reward: ledger.cumulative_reward(),
            external_regret: ledger.external_regret(),
            internal_regret: ledger.internal_regret(),
            oracle_regret: ledger.oracle_regret(),
            estimated_regret: ledger.estimated_regret(),
            strategy: strategy.probs().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub t: u64,
    pub players: Vec<PlayerRow>,
}

impl CheckpointRow {
    pub fn profile(&self) -> Vec<usize> {
        self.players.iter().map(|p| p.action).collect()
    }

    /// Running average reward of each player.
    pub fn average_rewards(&self) -> Vec<f64> {
        self.players.iter().map(|p| p.cumulative_reward / self.t as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeRow {
    pub t: u64,
    pub ce_distance: f64,
    pub ce_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub scenario: String,
    /// Strategy mix, e.g. `bfpls`.
    pub label: String,
    pub seed: u64,
    pub horizon: u64,
    pub checkpoint_stride: u64,
    pub checkpoints: Vec<CheckpointRow>,
    pub ce: Vec<CeRow>,
    /// Completed testing periods per player (empty for other strategies).
    pub periods: Vec<Vec<PeriodRecord>>,
    pub metadata: BTreeMap<String, Value>,
}

impl RunTrace {
    pub fn num_players(&self) -> usize {
        self.checkpoints.first().map_or(0, |c| c.players.len())
    }

    pub fn last(&self) -> &CheckpointRow {
        self.checkpoints.last().expect("a run records at least the final trial")
    }

    pub fn at(&self, t: u64) -> Option<&CheckpointRow> {
        self.checkpoints
            .binary_search_by_key(&t, |c| c.t)
            .ok()
            .map(|i| &self.checkpoints[i])
    }

    /// Mean reward of player `k` over trials `from+1 ..= to`, both of which
    /// must be checkpoints (`from = 0` is the start).
    pub fn window_average(&self, k: usize, from: u64, to: u64) -> Option<f64> {
        let end = self.at(to)?.players[k].cumulative_reward;
        let start = if from == 0 { 0.0 } else { self.at(from)?.players[k].cumulative_reward };
        (to > from).then(|| (end - start) / (to - from) as f64)
    }

    /// First accepted period of each player, if any.
    pub fn first_accepted_periods(&self) -> Vec<Option<usize>> {
        self.periods
            .iter()
            .map(|ps| ps.iter().find(|p| p.accepted).map(|p| p.period))
            .collect()
    }

    pub fn directory_name(&self) -> String {
        format!("seed_{}", self.seed)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub(crate) fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes one run below `dir/<label>/seed_<seed>/` and returns that directory.
pub fn write_run(trace: &RunTrace, dir: &Path) -> Result<PathBuf> {
    let run_dir = dir.join(&trace.label).join(trace.directory_name());
    create_dir(&run_dir)?;

    let k_players = trace.num_players();
    let mut header = vec!["t".to_string()];
    for k in 1..=k_players {
        for col in [
            "action",
            "reward",
            "average_reward",
            "external_regret",
            "internal_regret",
            "oracle_regret",
            "estimated_regret",
        ] {
            header.push(format!("p{k}_{col}"));
        }
        let n = trace.checkpoints[0].players[k - 1].strategy.len();
        header.extend((1..=n).map(|a| format!("p{k}_prob_a{a}")));
    }
    let rows = trace.checkpoints.iter().map(|c| {
        let mut row = vec![c.t.to_string()];
        for p in &c.players {
            row.push((p.action + 1).to_string());
            row.push(p.reward.to_string());
            row.push((p.cumulative_reward / c.t as f64).to_string());
            row.push(p.external_regret.to_string());
            row.push(p.internal_regret.to_string());
            row.push(p.oracle_regret.to_string());
            row.push(p.estimated_regret.to_string());
            row.extend(p.strategy.iter().map(f64::to_string));
        }
        row
    });
    write_csv(&run_dir.join("checkpoints.csv"), &header, rows)?;

    if !trace.ce.is_empty() {
        let header = ["t", "ce_distance", "ce_violation"].map(String::from);
        let rows = trace
            .ce
            .iter()
            .map(|r| vec![r.t.to_string(), r.ce_distance.to_string(), r.ce_violation.to_string()]);
        write_csv(&run_dir.join("ce.csv"), &header, rows)?;
    }

    if trace.periods.iter().any(|p| !p.is_empty()) {
        let header = ["player", "period", "accepted", "kept", "max_regret", "strategy"].map(String::from);
        let rows = trace.periods.iter().enumerate().flat_map(|(k, ps)| {
            ps.iter().map(move |p| {
                vec![
                    (k + 1).to_string(),
                    p.period.to_string(),
                    p.accepted.to_string(),
                    p.kept.to_string(),
                    p.max_regret.to_string(),
                    p.strategy.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
                ]
            })
        });
        write_csv(&run_dir.join("periods.csv"), &header, rows)?;
    }

    write_json(&run_dir.join("metadata.json"), &trace.metadata)?;
    write_json(&run_dir.join("trace.json"), trace)?;
    Ok(run_dir)
}

/// Every `trace.json` below `dir`, in path order.
pub fn load_traces(dir: &Path) -> Result<Vec<RunTrace>> {
    let mut paths = Vec::new();
    collect_traces(dir, &mut paths)?;
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| Error::Format {
                path: p.clone(),
                message: e.to_string(),
            })
        })
        .collect()
}

fn collect_traces(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            collect_traces(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "trace.json") {
            out.push(path);
        }
    }
    Ok(())
}

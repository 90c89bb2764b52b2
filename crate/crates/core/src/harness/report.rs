use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::trace::{create_dir, write_csv, write_json, RunTrace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelSummary {
    pub runs: usize,
    pub seeds: Vec<u64>,
    /// Mean over seeds and players of the final running average reward.
    pub final_average_reward: f64,
    /// Mean over seeds of each player's final mixed strategy.
    pub final_strategies: Vec<Vec<f64>>,
    /// First accepted testing period per seed and player.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub first_accepted_periods: Vec<Vec<Option<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub labels: BTreeMap<String, LabelSummary>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Aggregates traces into summary files in `out`.
pub fn write_report(traces: &[RunTrace], out: &Path) -> Result<ReportSummary> {
    if traces.is_empty() {
        return Err(Error::config("report needs at least one trace"));
    }
    create_dir(out)?;
    let mut by_label: BTreeMap<&str, Vec<&RunTrace>> = BTreeMap::new();
    for t in traces {
        by_label.entry(t.label.as_str()).or_default().push(t);
    }
    for runs in by_label.values_mut() {
        runs.sort_by_key(|t| t.seed);
    }
    let labels: Vec<&str> = by_label.keys().copied().collect();

    // running average reward, one column per strategy mix, aligned on t
    let mut curves: BTreeMap<u64, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    // per-trial regrets averaged over players, per strategy mix
    let mut regrets: BTreeMap<(&str, u64), Vec<[f64; 4]>> = BTreeMap::new();
    for (label, runs) in &by_label {
        for run in runs {
            for c in &run.checkpoints {
                let t = c.t as f64;
                curves
                    .entry(c.t)
                    .or_default()
                    .entry(label)
                    .or_default()
                    .push(mean(c.average_rewards()));
                let per_player = |f: fn(&super::PlayerRow) -> f64| mean(c.players.iter().map(f)) / t;
                regrets.entry((label, c.t)).or_default().push([
                    per_player(|p| p.external_regret),
                    per_player(|p| p.internal_regret),
                    per_player(|p| p.oracle_regret),
                    per_player(|p| p.estimated_regret),
                ]);
            }
        }
    }
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(labels.iter().map(|l| l.to_string()))
        .collect();
    let rows = curves.iter().map(|(t, cols)| {
        std::iter::once(t.to_string())
            .chain(labels.iter().map(|l| cell(cols.get(l).map(|v| mean(v.iter().copied())))))
            .collect()
    });
    write_csv(&out.join("average_reward.csv"), &header, rows)?;

    let header = [
        "strategy",
        "t",
        "external_regret_per_trial",
        "internal_regret_per_trial",
        "oracle_regret_per_trial",
        "estimated_regret_per_trial",
    ]
    .map(String::from);
    let rows = regrets.iter().map(|((label, t), v)| {
        let mut row = vec![label.to_string(), t.to_string()];
        row.extend((0..4).map(|i| mean(v.iter().map(|x| x[i])).to_string()));
        row
    });
    write_csv(&out.join("regret.csv"), &header, rows)?;

    let header = ["strategy", "seed", "t", "player", "probabilities"].map(String::from);
    let rows = by_label.iter().flat_map(|(label, runs)| {
        runs.iter().flat_map(move |run| {
            run.checkpoints.iter().flat_map(move |c| {
                c.players.iter().enumerate().map(move |(k, p)| {
                    vec![
                        label.to_string(),
                        run.seed.to_string(),
                        c.t.to_string(),
                        (k + 1).to_string(),
                        p.strategy.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
                    ]
                })
            })
        })
    });
    write_csv(&out.join("strategies.csv"), &header, rows)?;

    let header = ["strategy", "seed", "t", "ce_distance", "ce_violation"].map(String::from);
    let rows = by_label.iter().flat_map(|(label, runs)| {
        runs.iter().flat_map(move |run| {
            run.ce.iter().map(move |r| {
                vec![
                    label.to_string(),
                    run.seed.to_string(),
                    r.t.to_string(),
                    r.ce_distance.to_string(),
                    r.ce_violation.to_string(),
                ]
            })
        })
    });
    write_csv(&out.join("ce.csv"), &header, rows)?;

    let header = ["strategy", "seed", "player", "first_accepted_period"].map(String::from);
    let rows = by_label.iter().flat_map(|(label, runs)| {
        runs.iter()
            .filter(|run| run.periods.iter().any(|p| !p.is_empty()))
            .flat_map(move |run| {
                run.first_accepted_periods()
                    .into_iter()
                    .enumerate()
                    .filter(|(k, _)| !run.periods[*k].is_empty())
                    .map(move |(k, p)| {
                        vec![
                            label.to_string(),
                            run.seed.to_string(),
                            (k + 1).to_string(),
                            p.map(|x| x.to_string()).unwrap_or_default(),
                        ]
                    })
            })
    });
    write_csv(&out.join("berts_periods.csv"), &header, rows)?;

    let mut summary = ReportSummary { labels: BTreeMap::new() };
    for (label, runs) in &by_label {
        let k_players = runs[0].num_players();
        let final_strategies = (0..k_players)
            .map(|k| {
                let n = runs[0].last().players[k].strategy.len();
                (0..n)
                    .map(|a| mean(runs.iter().map(|r| r.last().players[k].strategy[a])))
                    .collect()
            })
            .collect();
        let has_periods = runs.iter().any(|r| r.periods.iter().any(|p| !p.is_empty()));
        summary.labels.insert(
            label.to_string(),
            LabelSummary {
                runs: runs.len(),
                seeds: runs.iter().map(|r| r.seed).collect(),
                final_average_reward: mean(runs.iter().map(|r| mean(r.last().average_rewards()))),
                final_strategies,
                first_accepted_periods: if has_periods {
                    runs.iter().map(|r| r.first_accepted_periods()).collect()
                } else {
                    Vec::new()
                },
            },
        );
    }
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

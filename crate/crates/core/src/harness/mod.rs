//! Scenario configuration, the simulation loop, and trace files.

mod config;
mod presets;
mod report;
mod run;
mod trace;

pub use config::{parse_seed_range, ScenarioConfig, DEFAULT_CHECKPOINT_STRIDE, SCHEMA_VERSION};
pub use presets::{
    part_one_channel, preset, DEFAULT_NOISE_POWER, PART_ONE_HORIZON, PART_ONE_POWERS, PART_ONE_PRICE, PRESETS,
};
pub use report::{write_report, LabelSummary, ReportSummary};
pub use run::{ce_trial_count_scale, normalized_payoffs, run, run_batch, run_with_tap, Diagnostics};
pub use trace::{load_traces, write_run, CeRow, CheckpointRow, PlayerRow, RunTrace};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::common::{ActionSpace, RngStream, StreamId};
    use crate::env::{ChannelModel, Environment, GainInterval, NoiseModel, RewardNormalizer};
    use crate::strategies::{BewasSchedule, StrategySpec};

    fn short(name: &str, horizon: u64) -> ScenarioConfig {
        let mut c = preset(name).unwrap();
        c.horizon = horizon;
        c.ce_checkpoints.retain(|&t| t <= horizon);
        c
    }

    #[test]
    fn single_action_player_sees_the_environment_draws() {
        let channel = ChannelModel::new(vec![vec![vec![GainInterval::new(0.2, 0.9)]]], 0.1, 1e-3).unwrap();
        let space = ActionSpace::new(1, vec![2.0]).unwrap();
        let mut cfg = preset("part_one").unwrap();
        cfg.channel = channel.clone();
        cfg.spaces = vec![space.clone()];
        cfg.strategies = vec![StrategySpec::Uniform];
        cfg.horizon = 500;
        cfg.checkpoint_stride = 1;
        cfg.ce_checkpoints.clear();
        let trace = run(&cfg, 4).unwrap();
        let mut env = Environment::new(channel, vec![space], RewardNormalizer::default(), NoiseModel::default()).unwrap();
        let mut rng = RngStream::new(4, StreamId::environment());
        assert_eq!(trace.checkpoints.len(), 500);
        for row in &trace.checkpoints {
            let o = env.step(&[0], &mut rng).unwrap();
            assert_eq!(row.players[0].reward, o.observed[0]);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let mut cfg = short("part_one", 2_000);
        cfg.strategies = vec![StrategySpec::Bfpls { shift: Default::default(), monte_carlo_samples: None }, StrategySpec::Bewas {
            schedule: BewasSchedule::Unknown,
        }];
        let a = run(&cfg, 7).unwrap();
        let b = run(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = run(&cfg, 8).unwrap();
        assert_ne!(a.checkpoints, c.checkpoints);
    }

    #[test]
    fn output_files_are_reproducible() {
        let cfg = short("part_one", 1_000);
        let trace = run(&cfg, 1).unwrap();
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let p1 = write_run(&trace, d1.path()).unwrap();
        let p2 = write_run(&run(&cfg, 1).unwrap(), d2.path()).unwrap();
        for file in ["checkpoints.csv", "ce.csv", "metadata.json", "trace.json"] {
            let a = std::fs::read(p1.join(file)).unwrap();
            assert_eq!(a, std::fs::read(p2.join(file)).unwrap(), "{file}");
        }
        let loaded = load_traces(d1.path()).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].checkpoints.len(), trace.checkpoints.len());
    }

    #[test]
    fn stride_controls_row_count() {
        let mut cfg = short("part_one", 1_050);
        assert_eq!(run(&cfg, 0).unwrap().checkpoints.len(), 11);
        cfg.checkpoint_stride = 1;
        let t = run(&cfg, 0).unwrap();
        assert_eq!(t.checkpoints.len(), 1_050);
        assert!(t.checkpoints.iter().enumerate().all(|(i, c)| c.t == i as u64 + 1));
    }

    #[test]
    fn corrupted_diagnostics_leave_play_unchanged() {
        let mut cfg = short("part_one", 3_000);
        cfg.strategies = vec![
            StrategySpec::Bfpls { shift: Default::default(), monte_carlo_samples: None },
            StrategySpec::Berts {
                period: 80,
                threshold: 0.16,
                reset_probability: None,
                exploration_trials: None,
            },
        ];
        let clean = run(&cfg, 3).unwrap();
        let dirty = run_with_tap(&cfg, 3, |t, d| {
            for row in &mut d.counterfactual {
                for v in row.iter_mut() {
                    *v = (t % 7) as f64 / 7.0;
                }
            }
            d.expected.iter_mut().for_each(|v| *v = -1.0);
        })
        .unwrap();
        for (a, b) in clean.checkpoints.iter().zip(&dirty.checkpoints) {
            assert_eq!(a.profile(), b.profile());
            for (p, q) in a.players.iter().zip(&b.players) {
                assert_eq!(p.strategy, q.strategy);
                assert_eq!(p.reward, q.reward);
            }
        }
        assert_eq!(clean.periods, dirty.periods);
        // the diagnostics themselves did change
        assert_ne!(clean.last().players[0].external_regret, dirty.last().players[0].external_regret);
    }

    #[test]
    fn metadata_lists_resolved_defaults() {
        let mut cfg = short("part_one", 300);
        cfg.strategies = vec![
            StrategySpec::Berts {
                period: 80,
                threshold: 0.16,
                reset_probability: None,
                exploration_trials: None,
            },
            StrategySpec::Greedy { explore_fraction: 0.1 },
        ];
        let m = run(&cfg, 0).unwrap().metadata;
        for key in [
            "normalizer_g_min",
            "normalizer_g_max",
            "noise_half_width",
            "noise_power",
            "checkpoint_stride",
            "fixed_point_tolerance",
            "clipped_utilities",
            "ce_trial_count",
            "seed",
        ] {
            assert!(m.contains_key(key), "{key}");
        }
        let params = &m["players"][0]["parameters"];
        assert_eq!(params["reset_probability"], 0.01);
        assert_eq!(params["exploration_trials"], 5);
    }

    #[test]
    fn centralized_players_hold_their_assignment() {
        let mut cfg = short("part_one", 200);
        cfg.strategies = vec![StrategySpec::CentralizedOptimal; 2];
        let t = run(&cfg, 0).unwrap();
        let profile = t.metadata["centralized_optimal_profile"].clone();
        assert_eq!(profile, serde_json::json!([1, 3]));
        assert!(t.checkpoints.iter().all(|c| c.profile() == vec![1, 3]));
    }

    #[test]
    fn no_collision_rewards_vanish_on_shared_channels() {
        let mut cfg = short("part_two", 100);
        cfg.strategies = vec![StrategySpec::CentralizedNoCollision; 5];
        cfg.checkpoint_stride = 1;
        let t = run(&cfg, 0).unwrap();
        let profile = t.checkpoints[0].profile();
        let hit = crate::strategies::colliding(&profile, &cfg.spaces);
        for c in &t.checkpoints {
            for (k, p) in c.players.iter().enumerate() {
                assert_eq!(hit[k], p.reward == 0.0);
            }
        }
    }

    #[test]
    fn report_aligns_strategy_columns() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = short("part_one", 500);
        cfg.seeds = vec![0, 1];
        for spec in [StrategySpec::Uniform, StrategySpec::CentralizedOptimal] {
            cfg.strategies = vec![spec; 2];
            for t in run_batch(&cfg).unwrap() {
                write_run(&t, dir.path()).unwrap();
            }
        }
        let out = dir.path().join("report");
        let summary = write_report(&load_traces(dir.path()).unwrap(), &out).unwrap();
        assert_eq!(summary.labels.len(), 2);
        let text = std::fs::read_to_string(out.join("average_reward.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,centralized_optimal,uniform");
        assert_eq!(text.lines().count(), 1 + 5);
        assert!(write_report(&[], &out).is_err());
    }

    #[test]
    fn errors_carry_the_trial_index() {
        let mut cfg = short("part_one", 10);
        cfg.normalizer = RewardNormalizer::new(-10.0, 10.0).unwrap();
        // a strategy that cannot be built fails before any trial
        cfg.strategies[0] = StrategySpec::EpsGreedy { epsilon: 2.0 };
        assert!(run(&cfg, 0).is_err());
    }
}

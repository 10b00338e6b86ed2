//! Reward and bug-finding metrics over judged responses.
//!
//! A response earns the full reward when the ground truth passes its tests
//! and the buggy program fails them. It earns the partial reward when every
//! input is valid on the ground truth and at least one input makes the two
//! programs diverge, but the verdicts are wrong. Otherwise it earns nothing.
//!
//! GI, ITR and TBR are percentages of responses with at least one divergent
//! input, with a failing ground truth, and with a true bug, respectively.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{Judge, JudgeConfig, JudgeJob};
use crate::error::ConfigError;
use crate::model::{Difficulty, JudgeRecord, MetricsReport, Problem, ProgramSource, TestResponse};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub full_reward: f64,
    pub partial_reward: f64,
    pub zero_reward: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            full_reward: 1.0,
            partial_reward: 0.1,
            zero_reward: 0.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.zero_reward <= self.partial_reward && self.partial_reward < self.full_reward) {
            return Err(ConfigError::Invalid(
                "rewards must satisfy zero <= partial < full".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardBranch {
    Full,
    Partial,
    Zero,
}

pub fn reward_branch(record: &JudgeRecord) -> RewardBranch {
    if record.g_passes && record.f_fails {
        RewardBranch::Full
    } else if record.inputs_valid
        && record.has_divergent_input
        && (!record.g_passes || !record.f_fails)
    {
        RewardBranch::Partial
    } else {
        RewardBranch::Zero
    }
}

pub fn compute_reward(record: &JudgeRecord, cfg: &RewardConfig) -> f64 {
    match reward_branch(record) {
        RewardBranch::Full => cfg.full_reward,
        RewardBranch::Partial => cfg.partial_reward,
        RewardBranch::Zero => cfg.zero_reward,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResponseFlags {
    pub gi_hit: bool,
    pub itr_hit: bool,
    pub tbr_hit: bool,
}

pub fn response_flags(record: &JudgeRecord) -> ResponseFlags {
    ResponseFlags {
        gi_hit: record.has_divergent_input,
        itr_hit: !record.inputs_valid || !record.g_passes,
        tbr_hit: record.g_passes && record.f_fails,
    }
}

/// Bucket for a difficulty tag: ratings above 2400 are hard, above 1800
/// medium, anything else easy. Labels pass through unchanged.
pub fn difficulty_bucket(difficulty: Option<&Difficulty>) -> String {
    let rating = match difficulty {
        None => return "unknown".into(),
        Some(Difficulty::Rating(r)) => *r,
        Some(Difficulty::Label(l)) => match l.trim().parse::<i64>() {
            Ok(r) => r,
            Err(_) => return l.clone(),
        },
    };
    if rating > 2400 {
        "hard".into()
    } else if rating > 1800 {
        "medium".into()
    } else {
        "easy".into()
    }
}

/// One report for a non-empty group of records.
pub fn summarize(group_key: impl Into<String>, records: &[&JudgeRecord]) -> MetricsReport {
    let n = records.len();
    let pct = |hits: usize| {
        if n == 0 {
            0.0
        } else {
            100.0 * hits as f64 / n as f64
        }
    };
    let flags: Vec<ResponseFlags> = records.iter().map(|r| response_flags(r)).collect();
    let total_tests: usize = records.iter().map(|r| r.num_inputs).sum();
    MetricsReport {
        group_key: group_key.into(),
        n_responses: n,
        gi: pct(flags.iter().filter(|f| f.gi_hit).count()),
        itr: pct(flags.iter().filter(|f| f.itr_hit).count()),
        tbr: pct(flags.iter().filter(|f| f.tbr_hit).count()),
        mean_num_tests: if n == 0 {
            0.0
        } else {
            total_tests as f64 / n as f64
        },
    }
}

/// Per-group GI/ITR/TBR, groups ordered by key.
pub fn aggregate_metrics<F>(records: &[JudgeRecord], group_of: F) -> Vec<MetricsReport>
where
    F: Fn(&JudgeRecord) -> String,
{
    if records.is_empty() {
        tracing::warn!("no records to aggregate");
        return Vec::new();
    }
    let mut groups: BTreeMap<String, Vec<&JudgeRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(group_of(r)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(key, members)| summarize(key, &members))
        .collect()
}

/// Aligned plain-text table with columns GI, ITR, TBR.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.group_key.chars().count())
        .max()
        .unwrap_or(0)
        .max(5);
    let mut out = format!(
        "{:<width$}  {:>6}  {:>7}  {:>7}  {:>7}  {:>7}\n",
        "group", "n", "GI", "ITR", "TBR", "#tests"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<width$}  {:>6}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7.2}\n",
            r.group_key, r.n_responses, r.gi, r.itr, r.tbr, r.mean_num_tests
        ));
    }
    out
}

/// The problem and programs a set of responses targets.
#[derive(Debug, Clone, Copy)]
pub struct ProgramPair<'a> {
    pub problem: &'a Problem,
    pub f: &'a ProgramSource,
    pub g: &'a ProgramSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// The swept value (`k` or replay count).
    pub value: usize,
    pub report: MetricsReport,
}

impl<'a> ProgramPair<'a> {
    /// One judge job per response, all against this pair.
    pub fn jobs(&self, responses: &'a [TestResponse]) -> Vec<JudgeJob<'a>> {
        responses
            .iter()
            .map(|response| JudgeJob {
                response,
                problem: self.problem,
                f: self.f,
                g: self.g,
            })
            .collect()
    }
}

fn check_ascending(values: &[usize], what: &str) -> Result<(), ConfigError> {
    if values.contains(&0) {
        return Err(ConfigError::Invalid(format!("{what} must be >= 1")));
    }
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(ConfigError::Invalid(format!(
            "{what} must be sorted ascending"
        )));
    }
    Ok(())
}

/// One metrics row per `k`, judging only the first `k` inputs of each response.
pub fn sweep_first_k(
    judge: &Judge,
    jobs: &[JudgeJob<'_>],
    ks: &[usize],
    config: &JudgeConfig,
    parallelism: usize,
) -> Result<Vec<SweepRow>, ConfigError> {
    check_ascending(ks, "ks")?;
    config.validate()?;
    Ok(ks
        .iter()
        .map(|&k| {
            let cfg = JudgeConfig {
                first_k: Some(k),
                ..config.clone()
            };
            let records = judge.judge_batch(jobs, &cfg, parallelism);
            let refs: Vec<&JudgeRecord> = records.iter().collect();
            SweepRow {
                value: k,
                report: summarize(format!("k={k}"), &refs),
            }
        })
        .collect())
}

/// One metrics row per replay count, with the input cap lifted.
///
/// Only harness responses gain inputs from replay; input-output responses are
/// scaled upstream by asking the model for more pairs.
pub fn sweep_scaling(
    judge: &Judge,
    jobs: &[JudgeJob<'_>],
    replay_counts: &[usize],
    config: &JudgeConfig,
    parallelism: usize,
) -> Result<Vec<SweepRow>, ConfigError> {
    check_ascending(replay_counts, "replay_counts")?;
    config.validate()?;
    replay_counts
        .iter()
        .map(|&replays| {
            let replay_runs = u32::try_from(replays)
                .map_err(|_| ConfigError::Invalid(format!("replay count {replays} too large")))?;
            let cfg = JudgeConfig {
                replay_runs,
                max_inputs: usize::MAX,
                ..config.clone()
            };
            let records = judge.judge_batch(jobs, &cfg, parallelism);
            let refs: Vec<&JudgeRecord> = records.iter().collect();
            Ok(SweepRow {
                value: replays,
                report: summarize(format!("replay={replays}"), &refs),
            })
        })
        .collect()
}

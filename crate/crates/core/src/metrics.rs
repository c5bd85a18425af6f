//! Per-episode logs and the run-level statistics computed from them.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentVariant;
use crate::mdp::Hyperparameters;

pub const CONVERGENCE_WINDOW: usize = 10;
pub const CONVERGENCE_BAND: f64 = 0.10;
/// Band used instead of the relative one when the final rolling mean is
/// below 1 in magnitude.
pub const CONVERGENCE_ABS_BAND: f64 = 0.1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least {needed} episodes, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("rolling mean never settled inside the band")]
    NotConverged,
    #[error("episode {0} has zero length")]
    ZeroLength(usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// 1-based.
    pub episode_index: usize,
    pub total_reward: f64,
    pub length: usize,
    pub exploratory_actions: usize,
    /// Every component was placed.
    pub success: bool,
}

pub fn exploration_ratio(log: &EpisodeLog) -> Result<f64, MetricsError> {
    if log.length == 0 {
        return Err(MetricsError::ZeroLength(log.episode_index));
    }
    Ok(log.exploratory_actions as f64 / log.length as f64)
}

/// Trapezoid rule over unit-spaced episode indices.
pub fn reward_auc(rewards: &[f64]) -> Result<f64, MetricsError> {
    if rewards.len() < 2 {
        return Err(MetricsError::TooShort { needed: 2, got: rewards.len() });
    }
    Ok(rewards.windows(2).map(|w| (w[0] + w[1]) / 2.0).sum())
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// `out[k]` is the mean of `rewards[k..k + window]`.
pub fn rolling_means(rewards: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || rewards.len() < window {
        return Vec::new();
    }
    rewards.windows(window).map(mean).collect()
}

/// First 1-based episode from which every forward rolling mean stays strictly
/// inside the band around the last rolling mean.
pub fn convergence_episode(rewards: &[f64], window: usize, band: f64) -> Result<usize, MetricsError> {
    if rewards.len() < 2 * window || window == 0 {
        return Err(MetricsError::TooShort { needed: 2 * window.max(1), got: rewards.len() });
    }
    let means = rolling_means(rewards, window);
    let last = *means.last().expect("at least one window");
    let tol = if last.abs() < 1.0 { CONVERGENCE_ABS_BAND } else { band * last.abs() };
    let mut first_inside = None;
    for (k, m) in means.iter().enumerate().rev() {
        if (m - last).abs() < tol {
            first_inside = Some(k);
        } else {
            break;
        }
    }
    first_inside.map(|k| k + 1).ok_or(MetricsError::NotConverged)
}

pub fn cumulative_rewards(logs: &[EpisodeLog]) -> Vec<f64> {
    logs.iter()
        .scan(0.0, |acc, l| {
            *acc += l.total_reward;
            Some(*acc)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub episodes: usize,
    pub average_reward: f64,
    pub std_dev: f64,
    /// `None` with fewer than two episodes.
    pub auc: Option<f64>,
    /// `None` when too short or never inside the band.
    pub convergence_episode: Option<usize>,
    pub final_cumulative_reward: f64,
    pub success_rate: f64,
    pub mean_length: f64,
    pub mean_exploration_ratio: f64,
}

pub fn summarize(logs: &[EpisodeLog]) -> RunSummary {
    let rewards: Vec<f64> = logs.iter().map(|l| l.total_reward).collect();
    let n = logs.len().max(1) as f64;
    RunSummary {
        episodes: logs.len(),
        average_reward: mean(&rewards),
        std_dev: population_std(&rewards),
        auc: reward_auc(&rewards).ok(),
        convergence_episode: convergence_episode(&rewards, CONVERGENCE_WINDOW, CONVERGENCE_BAND).ok(),
        final_cumulative_reward: rewards.iter().sum(),
        success_rate: logs.iter().filter(|l| l.success).count() as f64 / n,
        mean_length: logs.iter().map(|l| l.length as f64).sum::<f64>() / n,
        mean_exploration_ratio: logs.iter().filter_map(|l| exploration_ratio(l).ok()).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: AgentVariant,
    pub seed: u64,
    pub hyper: Hyperparameters,
    pub logs: Vec<EpisodeLog>,
    pub summary: RunSummary,
}

impl RunRecord {
    pub fn new(variant: AgentVariant, seed: u64, hyper: Hyperparameters, logs: Vec<EpisodeLog>) -> Self {
        let summary = summarize(&logs);
        RunRecord { variant, seed, hyper, logs, summary }
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.logs.iter().map(|l| l.total_reward).collect()
    }

    pub fn cumulative_curve(&self) -> Vec<f64> {
        cumulative_rewards(&self.logs)
    }

    pub fn exploration_curve(&self) -> Vec<f64> {
        self.logs.iter().map(|l| exploration_ratio(l).unwrap_or(0.0)).collect()
    }
}

#[derive(Debug, Serialize)]
struct CsvRow {
    episode: usize,
    total_reward: f64,
    length: usize,
    exploratory_actions: usize,
    success: bool,
    cumulative_reward: f64,
    exploration_ratio: f64,
}

pub fn write_episode_csv<W: Write>(out: W, logs: &[EpisodeLog]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    let mut cumulative = 0.0;
    for l in logs {
        cumulative += l.total_reward;
        w.serialize(CsvRow {
            episode: l.episode_index,
            total_reward: l.total_reward,
            length: l.length,
            exploratory_actions: l.exploratory_actions,
            success: l.success,
            cumulative_reward: cumulative,
            exploration_ratio: exploration_ratio(l)?,
        })?;
    }
    if logs.is_empty() {
        w.write_record([
            "episode",
            "total_reward",
            "length",
            "exploratory_actions",
            "success",
            "cumulative_reward",
            "exploration_ratio",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the episode columns of a CSV produced by `write_episode_csv`.
pub fn read_episode_csv<R: std::io::Read>(input: R) -> Result<Vec<EpisodeLog>, MetricsError> {
    #[derive(Deserialize)]
    struct Row {
        episode: usize,
        total_reward: f64,
        length: usize,
        exploratory_actions: usize,
        success: bool,
    }
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(EpisodeLog {
                episode_index: row.episode,
                total_reward: row.total_reward,
                length: row.length,
                exploratory_actions: row.exploratory_actions,
                success: row.success,
            })
        })
        .collect()
}

/// Mean and population std of one statistic across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    pub fn of(xs: &[f64]) -> Self {
        Spread { mean: mean(xs), std: population_std(xs) }
    }
}

/// Aggregate of several seeds of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSeedSummary {
    pub variant: AgentVariant,
    pub seeds: Vec<u64>,
    pub average_reward: Spread,
    pub std_dev: Spread,
    pub auc: Spread,
    /// Mean over the runs that converged.
    pub convergence_episode: Option<f64>,
    pub converged_runs: usize,
}

pub fn cross_seed(runs: &[RunRecord]) -> Option<CrossSeedSummary> {
    let first = runs.first()?;
    let pick = |f: &dyn Fn(&RunSummary) -> f64| runs.iter().map(|r| f(&r.summary)).collect::<Vec<_>>();
    let conv: Vec<f64> = runs.iter().filter_map(|r| r.summary.convergence_episode.map(|c| c as f64)).collect();
    Some(CrossSeedSummary {
        variant: first.variant,
        seeds: runs.iter().map(|r| r.seed).collect(),
        average_reward: Spread::of(&pick(&|s| s.average_reward)),
        std_dev: Spread::of(&pick(&|s| s.std_dev)),
        auc: Spread::of(&pick(&|s| s.auc.unwrap_or(f64::NAN))),
        convergence_episode: (!conv.is_empty()).then(|| mean(&conv)),
        converged_runs: conv.len(),
    })
}

/// Runs grouped by variant, one cross-seed row per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: BTreeMap<String, CrossSeedSummary>,
}

pub fn compare(runs: &[RunRecord]) -> Comparison {
    let mut grouped: BTreeMap<AgentVariant, Vec<RunRecord>> = BTreeMap::new();
    for r in runs {
        grouped.entry(r.variant).or_default().push(r.clone());
    }
    Comparison {
        rows: grouped
            .into_iter()
            .filter_map(|(v, rs)| cross_seed(&rs).map(|s| (v.tag().to_string(), s)))
            .collect(),
    }
}

impl Comparison {
    pub fn get(&self, v: AgentVariant) -> Option<&CrossSeedSummary> {
        self.rows.get(v.tag())
    }

    /// `off-tab >= on-tab > off-lin >= on-lin` on average reward.
    pub fn reward_ordering_holds(&self) -> Option<bool> {
        use AgentVariant::*;
        let r = |v| self.get(v).map(|s| s.average_reward.mean);
        let (ft, nt, fl, nl) = (r(OffPolicyTabular)?, r(OnPolicyTabular)?, r(OffPolicyLinear)?, r(OnPolicyLinear)?);
        Some(ft >= nt && nt > fl && fl >= nl)
    }

    /// Off-policy tabular has the largest AUC.
    pub fn auc_ordering_holds(&self) -> Option<bool> {
        let best = self.get(AgentVariant::OffPolicyTabular)?.auc.mean;
        Some(self.rows.values().all(|s| s.auc.mean <= best))
    }

    /// Every linear variant has a smaller per-episode std than every tabular one.
    pub fn std_ordering_holds(&self) -> Option<bool> {
        use AgentVariant::*;
        let s = |v| self.get(v).map(|s| s.std_dev.mean);
        let lin_max = s(OnPolicyLinear)?.max(s(OffPolicyLinear)?);
        let tab_min = s(OnPolicyTabular)?.min(s(OffPolicyTabular)?);
        Some(lin_max < tab_min)
    }

    /// Text table with one row per variant.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>14} {:>10} {:>12} {:>20}\n",
            "Approach", "Average Reward", "Std Dev", "AUC", "Convergence Episode"
        );
        for v in AgentVariant::ALL {
            let Some(s) = self.get(v) else { continue };
            let conv = s.convergence_episode.map_or_else(|| "-".to_string(), |c| format!("{c:.1}"));
            out.push_str(&format!(
                "{:<10} {:>14.2} {:>10.2} {:>12.2} {:>20}\n",
                v.tag(),
                s.average_reward.mean,
                s.std_dev.mean,
                s.auc.mean,
                conv
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(i: usize, r: f64, len: usize, x: usize) -> EpisodeLog {
        EpisodeLog { episode_index: i, total_reward: r, length: len, exploratory_actions: x, success: len == 8 }
    }

    #[test]
    fn exploration_ratio_examples() {
        assert_eq!(exploration_ratio(&log(1, 0.0, 6, 3)).unwrap(), 0.5);
        assert_eq!(exploration_ratio(&log(1, 0.0, 5, 0)).unwrap(), 0.0);
        assert_eq!(exploration_ratio(&log(1, 0.0, 7, 7)).unwrap(), 1.0);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(reward_auc(&[5.0; 500]).unwrap(), 2495.0);
        assert_eq!(reward_auc(&[0.0, 10.0]).unwrap(), 5.0);
        assert!(matches!(reward_auc(&[1.0]), Err(MetricsError::TooShort { .. })));
    }

    #[test]
    fn auc_consistent_with_reported_mean() {
        // A flat curve at the reported average gives 5.42 * 499.
        let approx = 5.42 * 499.0;
        assert!((approx - 2704.58f64).abs() < 1e-9);
        assert!((approx - 2705.03f64).abs() / 2705.03 < 0.001);
    }

    #[test]
    fn convergence_step_plateau() {
        let mut r = vec![0.0; 10];
        r.extend(std::iter::repeat_n(5.0, 490));
        assert_eq!(convergence_episode(&r, 10, 0.1).unwrap(), 11);
    }

    #[test]
    fn convergence_constant() {
        assert_eq!(convergence_episode(&[3.0; 50], 10, 0.1).unwrap(), 1);
        assert_eq!(convergence_episode(&[0.0; 50], 10, 0.1).unwrap(), 1);
    }

    #[test]
    fn convergence_linear_ramp() {
        // Rolling mean at e is e + 4.5, final is 495.5, band 49.55:
        // need 491 - e < 49.55, so e > 441.45.
        let r: Vec<f64> = (1..=500).map(f64::from).collect();
        assert_eq!(convergence_episode(&r, 10, 0.1).unwrap(), 442);
    }

    #[test]
    fn convergence_needs_two_windows() {
        assert!(matches!(convergence_episode(&[1.0; 19], 10, 0.1), Err(MetricsError::TooShort { .. })));
    }

    #[test]
    fn single_episode_summary() {
        let s = summarize(&[log(1, 4.5, 8, 1)]);
        assert_eq!(s.average_reward, 4.5);
        assert_eq!(s.std_dev, 0.0);
        assert_eq!(s.auc, None);
    }

    #[test]
    fn population_std_divides_by_n() {
        assert_eq!(population_std(&[1.0, 3.0]), 1.0);
    }

    #[test]
    fn csv_roundtrip_and_header() {
        let logs = vec![log(1, 1.5, 8, 2), log(2, -1.0, 3, 0)];
        let mut buf = Vec::new();
        write_episode_csv(&mut buf, &logs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("episode,total_reward,length,exploratory_actions,success,cumulative_reward,exploration_ratio\n"));
        assert!(text.contains("2,-1.0,3,0,false,0.5,0.0"));
        assert_eq!(read_episode_csv(buf.as_slice()).unwrap(), logs);
    }

    #[test]
    fn identical_logs_identical_summaries() {
        let logs: Vec<_> = (1..=30).map(|i| log(i, (i % 7) as f64, 8, i % 3)).collect();
        assert_eq!(summarize(&logs), summarize(&logs.clone()));
    }
}

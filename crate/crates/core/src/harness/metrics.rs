use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentKind, EpisodeRecord, TrainOutput, ROLLING_WINDOW};
use crate::error::{Error, Result};

pub const METRICS_HEADER: [&str; 11] = [
    "seed",
    "episode",
    "env_step",
    "return",
    "length",
    "cost",
    "failed",
    "succeeded",
    "epsilon",
    "lambda",
    "s2c_loss",
];

/// Per-episode rows of one or more seeds, ordered by `(seed, env_step)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<EpisodeRecord>,
}

impl MetricsLog {
    pub fn from_outputs<'a>(outputs: impl IntoIterator<Item = &'a TrainOutput>) -> Self {
        let mut rows: Vec<EpisodeRecord> = outputs
            .into_iter()
            .flat_map(|o| o.episodes.iter().cloned())
            .collect();
        rows.sort_by_key(|r| (r.seed, r.env_step));
        Self { rows }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(METRICS_HEADER)?;
        for r in &self.rows {
            let m = &r.metrics;
            w.write_record([
                r.seed.to_string(),
                r.episode.to_string(),
                r.env_step.to_string(),
                m.episode_return.to_string(),
                m.length.to_string(),
                m.episode_cost.to_string(),
                u8::from(m.failed).to_string(),
                u8::from(m.succeeded).to_string(),
                r.epsilon.to_string(),
                r.lambda.to_string(),
                r.s2c_loss.map_or_else(String::new, |l| l.to_string()),
            ])?;
        }
        w.flush().map_err(|e| Error::io("metrics.csv", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Median and quartiles of a sample (linear interpolation between order
/// statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub n: usize,
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Stat {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("statistic of an empty sample".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        Ok(Self {
            median: quantile(&v, 0.5),
            q1,
            q3,
            iqr: q3 - q1,
            n: v.len(),
        })
    }
}

/// Per-seed summary scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: usize,
    pub env_steps: usize,
    /// Success rate over the last [`ROLLING_WINDOW`] episodes.
    pub final_success_rate: f64,
    /// Mean undiscounted return over the last [`ROLLING_WINDOW`] episodes.
    pub final_return: f64,
    pub total_failures: usize,
    pub total_cost: f64,
    pub cost_rate: f64,
    /// First curve point at which a full window of episodes has a success
    /// rate of at least one half.
    pub steps_to_half_success: Option<usize>,
}

impl SeedSummary {
    pub fn of(out: &TrainOutput) -> Self {
        let tail: Vec<&EpisodeRecord> = out.episodes.iter().rev().take(ROLLING_WINDOW).collect();
        let n = tail.len().max(1) as f64;
        Self {
            seed: out.seed,
            episodes: out.episodes.len(),
            env_steps: out.total_steps,
            final_success_rate: tail.iter().filter(|e| e.metrics.succeeded).count() as f64 / n,
            final_return: tail.iter().map(|e| e.metrics.episode_return).sum::<f64>() / n,
            total_failures: out.episodes.iter().filter(|e| e.metrics.failed).count(),
            total_cost: out.total_cost,
            cost_rate: out.total_cost / out.total_steps as f64,
            steps_to_half_success: out
                .curve
                .iter()
                .find(|c| c.episodes >= ROLLING_WINDOW && c.rolling_success >= 0.5)
                .map(|c| c.env_step),
        }
    }

    /// Steps to half success, with runs that never get there counted at the
    /// full budget.
    pub fn censored_steps_to_half(&self) -> f64 {
        self.steps_to_half_success.unwrap_or(self.env_steps) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub final_success_rate: Stat,
    pub final_return: Stat,
    pub total_failures: Stat,
    pub cost_rate: Stat,
    /// Total cost over total env steps, pooled across seeds.
    pub pooled_cost_rate: f64,
    pub steps_to_half_success: Stat,
    /// Seeds that reached half success within the budget.
    pub reached_half_success: usize,
}

impl Summary {
    pub fn of(seeds: &[SeedSummary]) -> Result<Self> {
        let col = |f: &dyn Fn(&SeedSummary) -> f64| -> Result<Stat> {
            Stat::of(&seeds.iter().map(f).collect::<Vec<_>>())
        };
        let steps: usize = seeds.iter().map(|s| s.env_steps).sum();
        let cost: f64 = seeds.iter().map(|s| s.total_cost).sum();
        Ok(Self {
            final_success_rate: col(&|s| s.final_success_rate)?,
            final_return: col(&|s| s.final_return)?,
            total_failures: col(&|s| s.total_failures as f64)?,
            cost_rate: col(&|s| s.cost_rate)?,
            pooled_cost_rate: cost / steps as f64,
            steps_to_half_success: col(&|s| s.censored_steps_to_half())?,
            reached_half_success: seeds
                .iter()
                .filter(|s| s.steps_to_half_success.is_some())
                .count(),
        })
    }
}

/// Cross-seed statistics at one curve point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub env_step: usize,
    pub rolling_success: Stat,
    pub rolling_return: Stat,
    pub cumulative_failures: Stat,
    pub cumulative_cost: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub name: String,
    pub kind: AgentKind,
    pub seeds: Vec<u64>,
    pub total_steps: usize,
    pub summary: Summary,
    pub per_seed: Vec<SeedSummary>,
    pub checkpoints: Vec<CheckpointStats>,
}

impl AggregateReport {
    pub fn new(name: &str, outputs: &[TrainOutput]) -> Result<Self> {
        let first = outputs
            .first()
            .ok_or_else(|| Error::InvalidInput("no runs to aggregate".into()))?;
        let per_seed: Vec<SeedSummary> = outputs.iter().map(SeedSummary::of).collect();
        let points = outputs.iter().map(|o| o.curve.len()).min().unwrap_or(0);
        let mut checkpoints = Vec::with_capacity(points);
        for i in 0..points {
            let at = |f: &dyn Fn(&crate::agents::CurvePoint) -> f64| -> Result<Stat> {
                Stat::of(&outputs.iter().map(|o| f(&o.curve[i])).collect::<Vec<_>>())
            };
            checkpoints.push(CheckpointStats {
                env_step: first.curve[i].env_step,
                rolling_success: at(&|c| c.rolling_success)?,
                rolling_return: at(&|c| c.rolling_return)?,
                cumulative_failures: at(&|c| c.cumulative_failures as f64)?,
                cumulative_cost: at(&|c| c.cumulative_cost)?,
            });
        }
        Ok(Self {
            name: name.to_string(),
            kind: first.kind,
            seeds: outputs.iter().map(|o| o.seed).collect(),
            total_steps: first.total_steps,
            summary: Summary::of(&per_seed)?,
            per_seed,
            checkpoints,
        })
    }
}

/// Pretty-printed JSON file.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepParam, SweepValue, TransferArm};
use super::metrics::{write_json, AggregateReport, MetricsLog, Stat, Summary};
use crate::agents::{
    load_agent, save_agent, train_agent, AgentKind, TrainOutput, TrainSetup,
};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::s2c::S2CModel;

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Setup for one seed of `cfg`.
pub fn setup_for(cfg: &ExperimentConfig, seed: u64) -> Result<TrainSetup> {
    let mut s = TrainSetup::new(cfg.kind, cfg.build_env()?, seed, cfg.total_steps);
    s.dqn = cfg.dqn.clone();
    s.safety = cfg.safety.clone();
    Ok(s)
}

/// Trains every seed in parallel. Results keep the order of `cfg.seeds`;
/// a failed seed does not stop the others.
pub fn train_seeds(cfg: &ExperimentConfig) -> Vec<Result<TrainOutput>> {
    train_seeds_with(cfg, |_, s| Ok(s))
}

/// As [`train_seeds`], with a hook that adjusts each seed's setup.
pub fn train_seeds_with<F>(cfg: &ExperimentConfig, adjust: F) -> Vec<Result<TrainOutput>>
where
    F: Fn(u64, TrainSetup) -> Result<TrainSetup> + Sync,
{
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let setup = adjust(seed, setup_for(cfg, seed)?)?;
            log::info!("{}: seed {seed} started", cfg.name);
            let out = train_agent(setup);
            log::info!("{}: seed {seed} finished", cfg.name);
            out
        })
        .collect()
}

/// Writes metrics, report and checkpoints for the seeds that finished, then
/// returns the first failure if any seed failed.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    results: Vec<Result<TrainOutput>>,
    out_dir: &Path,
) -> Result<(AggregateReport, Vec<TrainOutput>)> {
    create_dir(out_dir)?;
    let mut done = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(o) => done.push(o),
            Err(e) => {
                log::error!("{}: run failed: {e}", cfg.name);
                first_err.get_or_insert(e);
            }
        }
    }
    MetricsLog::from_outputs(&done).save(out_dir.join("metrics.csv"))?;
    let ck_dir = out_dir.join("checkpoints");
    for o in &done {
        let dir = ck_dir.join(format!("seed_{}", o.seed));
        create_dir(&dir)?;
        save_agent(dir.join("agent.json"), o.kind, &o.q_net)?;
        if let Some(m) = &o.s2c {
            m.save(dir.join("s2c.json"))?;
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    let report = AggregateReport::new(&cfg.name, &done)?;
    write_json(out_dir.join("report.json"), &report)?;
    std::fs::write(out_dir.join("config.toml"), cfg.to_toml()?)
        .map_err(|e| Error::io(out_dir.join("config.toml"), e))?;
    Ok((report, done))
}

/// Trains all seeds of `cfg` and writes `metrics.csv`, `report.json` and
/// `checkpoints/` under `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<AggregateReport> {
    cfg.validate()?;
    let results = train_seeds(cfg);
    Ok(write_outputs(cfg, results, out_dir)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: TransferArm,
    pub summary: Summary,
    /// Whether the transferred S2C parameters were bitwise unchanged at the
    /// end of each seed; `None` for arms that train it.
    pub s2c_unchanged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub name: String,
    pub kind: AgentKind,
    pub seeds: Vec<u64>,
    pub source_variants: Vec<usize>,
    pub target_variants: Vec<usize>,
    pub arms: Vec<ArmReport>,
}

impl TransferReport {
    pub fn arm(&self, arm: TransferArm) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == arm)
    }
}

#[derive(Debug, Clone)]
struct Source {
    s2c: S2CModel,
    q_net: Option<Mlp>,
}

fn load_sources(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<Source>> {
    let t = cfg.transfer.as_ref().expect("validated transfer block");
    let obs_dim = cfg.build_env()?.obs_dim(false);
    if let Some(path) = &t.source_checkpoint {
        let s2c = S2CModel::load_for(path, obs_dim)?;
        let q_net = match &t.source_agent_checkpoint {
            Some(p) => {
                let (kind, net) = load_agent(p)?;
                if kind != cfg.kind {
                    log::warn!("agent checkpoint is {kind}, transferring into {}", cfg.kind);
                }
                Some(net)
            }
            None => None,
        };
        return Ok(vec![Source { s2c, q_net }; cfg.seeds.len()]);
    }
    let mut source_cfg = cfg.clone();
    source_cfg.name = format!("{}-source", cfg.name);
    source_cfg.suite = cfg.suite.with_variants(&t.source_variants);
    source_cfg.total_steps = t.source_steps.unwrap_or(cfg.total_steps);
    source_cfg.transfer = None;
    let results = train_seeds(&source_cfg);
    let (_, outputs) = write_outputs(&source_cfg, results, &out_dir.join("source"))?;
    outputs
        .into_iter()
        .map(|o| {
            let s2c = o
                .s2c
                .ok_or_else(|| Error::Contract("source run produced no S2C model".into()))?;
            if s2c.obs_dim() != obs_dim {
                return Err(Error::Dimension {
                    what: "source S2C observation".into(),
                    expected: obs_dim,
                    actual: s2c.obs_dim(),
                });
            }
            Ok(Source {
                s2c,
                q_net: Some(o.q_net),
            })
        })
        .collect()
}

/// Trains the source representation (or loads it) and runs every arm on the
/// configured target suite. Each arm gets its own subdirectory.
pub fn transfer(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TransferReport> {
    cfg.validate()?;
    let t = cfg
        .transfer
        .as_ref()
        .ok_or_else(|| Error::validation("transfer", "missing [transfer] block"))?;
    create_dir(out_dir)?;
    let sources = load_sources(cfg, out_dir)?;
    let mut arms = Vec::new();
    for &arm in &t.arms {
        let mut arm_cfg = cfg.clone();
        arm_cfg.name = format!("{}-{arm}", cfg.name);
        arm_cfg.transfer = None;
        let results = train_seeds_with(&arm_cfg, |seed, mut setup| {
            if !arm.uses_source() {
                return Ok(setup);
            }
            let idx = cfg.seeds.iter().position(|&s| s == seed).expect("known seed");
            let src = &sources[idx];
            let mut s2c = src.s2c.clone();
            s2c.set_frozen(arm.freezes_s2c());
            setup.pretrained_s2c = Some(s2c);
            if arm.transfers_policy() {
                setup.pretrained_q = Some(src.q_net.clone().ok_or_else(|| {
                    Error::validation("transfer.source_agent_checkpoint", "no source policy")
                })?);
            }
            Ok(setup)
        });
        let (report, outputs) = write_outputs(&arm_cfg, results, &out_dir.join(arm.name()))?;
        let s2c_unchanged = arm.freezes_s2c().then(|| {
            outputs.iter().zip(&sources).all(|(o, src)| {
                o.s2c
                    .as_ref()
                    .is_some_and(|m| m.params() == src.s2c.params())
            })
        });
        arms.push(ArmReport {
            arm,
            summary: report.summary,
            s2c_unchanged,
        });
    }
    let report = TransferReport {
        name: cfg.name.clone(),
        kind: cfg.kind,
        seeds: cfg.seeds.clone(),
        source_variants: t.source_variants.clone(),
        target_variants: cfg.suite.variants.clone(),
        arms,
    };
    write_json(out_dir.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: SweepParam,
    pub value: SweepValue,
    pub kind: AgentKind,
    /// Output width of the steps-to-cost model at this setting.
    pub num_bins: usize,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub name: String,
    pub parameter: SweepParam,
    /// Rows in sweep order.
    pub rows: Vec<SweepRow>,
    /// Row indices ordered by median final return, best first.
    pub ranking: Vec<usize>,
}

fn sweep_dir(out_dir: &Path, param: SweepParam, kind: AgentKind, value: &SweepValue) -> PathBuf {
    out_dir.join(format!("{}_{}_{}", param.name(), value, kind))
}

fn ranking(rows: &[SweepRow]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[b]
            .summary
            .final_return
            .median
            .total_cmp(&rows[a].summary.final_return.median)
    });
    order
}

fn sweep_runs(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    kinds: &[Option<AgentKind>],
) -> Result<Vec<SweepRow>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::validation("sweep", "missing [sweep] block"))?;
    create_dir(out_dir)?;
    let mut rows = Vec::new();
    for value in &sweep.values {
        for &kind in kinds {
            let mut v_cfg = cfg.with_sweep_value(sweep.parameter, value)?;
            if let Some(k) = kind {
                v_cfg.kind = k;
            }
            v_cfg.name = format!("{}-{}={value}-{}", cfg.name, sweep.parameter.name(), v_cfg.kind);
            v_cfg.validate()?;
            let dir = sweep_dir(out_dir, sweep.parameter, v_cfg.kind, value);
            let report = run(&v_cfg, &dir)?;
            rows.push(SweepRow {
                parameter: sweep.parameter,
                value: value.clone(),
                kind: v_cfg.kind,
                num_bins: v_cfg.safety.num_bins(),
                summary: report.summary,
            });
        }
    }
    Ok(rows)
}

/// One full run per sweep value plus a combined report.
pub fn ablate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SweepReport> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::validation("sweep", "missing [sweep] block"))?;
    if !matches!(
        sweep.parameter,
        SweepParam::BinWidth | SweepParam::Horizon | SweepParam::Kind
    ) {
        return Err(Error::validation(
            "sweep.parameter",
            format!("ablate sweeps bin_width, horizon or kind, not {}", sweep.parameter.name()),
        ));
    }
    let rows = sweep_runs(cfg, out_dir, &[None])?;
    let report = SweepReport {
        name: cfg.name.clone(),
        parameter: sweep.parameter,
        ranking: ranking(&rows),
        rows,
    };
    write_json(out_dir.join("report.json"), &report)?;
    Ok(report)
}

/// Steps-to-cost counterpart of a raw-input kind.
pub fn sr_counterpart(kind: AgentKind) -> Option<AgentKind> {
    match kind {
        AgentKind::Dqn => Some(AgentKind::SrDqn),
        AgentKind::LagDqn => Some(AgentKind::SrLagDqn),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub kind: AgentKind,
    pub value: SweepValue,
    pub total_failures: Stat,
    pub final_return: Stat,
    pub pooled_cost_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    pub name: String,
    pub parameter: SweepParam,
    pub points: Vec<TradeoffPoint>,
}

impl TradeoffReport {
    /// For each value, whether `challenger` has no more median failures and
    /// no lower median return than `baseline`.
    pub fn dominance(&self, challenger: AgentKind, baseline: AgentKind) -> Vec<(SweepValue, bool)> {
        let find = |kind, v: &SweepValue| {
            self.points
                .iter()
                .find(|p| p.kind == kind && &p.value == v)
        };
        let mut values: Vec<&SweepValue> = Vec::new();
        for p in &self.points {
            if !values.contains(&&p.value) {
                values.push(&p.value);
            }
        }
        values
            .into_iter()
            .filter_map(|v| {
                let (c, b) = (find(challenger, v)?, find(baseline, v)?);
                Some((
                    v.clone(),
                    c.total_failures.median <= b.total_failures.median
                        && c.final_return.median >= b.final_return.median,
                ))
            })
            .collect()
    }
}

/// Runs every kind at every sweep value and tabulates training failures
/// against final return.
pub fn tradeoff(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TradeoffReport> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::validation("sweep", "missing [sweep] block"))?;
    if !matches!(
        sweep.parameter,
        SweepParam::Penalty | SweepParam::InitialLambda | SweepParam::Budget
    ) {
        return Err(Error::validation(
            "sweep.parameter",
            format!(
                "tradeoff sweeps penalty, initial_lambda or budget, not {}",
                sweep.parameter.name()
            ),
        ));
    }
    let kinds: Vec<AgentKind> = if sweep.kinds.is_empty() {
        std::iter::once(cfg.kind)
            .chain(sr_counterpart(cfg.kind))
            .collect()
    } else {
        sweep.kinds.clone()
    };
    let lagrangian = matches!(sweep.parameter, SweepParam::InitialLambda | SweepParam::Budget);
    for k in &kinds {
        if lagrangian != k.is_lagrangian() {
            return Err(Error::validation(
                "sweep.kinds",
                format!("{k} cannot be swept over {}", sweep.parameter.name()),
            ));
        }
    }
    let wrapped: Vec<Option<AgentKind>> = kinds.iter().copied().map(Some).collect();
    let rows = sweep_runs(cfg, out_dir, &wrapped)?;
    let points: Vec<TradeoffPoint> = rows
        .into_iter()
        .map(|r| TradeoffPoint {
            kind: r.kind,
            value: r.value,
            total_failures: r.summary.total_failures,
            final_return: r.summary.final_return,
            pooled_cost_rate: r.summary.pooled_cost_rate,
        })
        .collect();
    let mut w = csv::Writer::from_path(out_dir.join("tradeoff.csv"))?;
    w.write_record([
        "kind",
        sweep.parameter.name(),
        "failures_median",
        "failures_q1",
        "failures_q3",
        "return_median",
        "return_q1",
        "return_q3",
        "cost_rate",
    ])?;
    for p in &points {
        w.write_record([
            p.kind.to_string(),
            p.value.to_string(),
            p.total_failures.median.to_string(),
            p.total_failures.q1.to_string(),
            p.total_failures.q3.to_string(),
            p.final_return.median.to_string(),
            p.final_return.q1.to_string(),
            p.final_return.q3.to_string(),
            p.pooled_cost_rate.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(out_dir.join("tradeoff.csv"), e))?;
    let report = TradeoffReport {
        name: cfg.name.clone(),
        parameter: sweep.parameter,
        points,
    };
    write_json(out_dir.join("report.json"), &report)?;
    Ok(report)
}

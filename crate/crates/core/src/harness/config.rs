use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentKind, DqnConfig};
use crate::envs::{EnvConfig, IslandEnv, IslandSuite};
use crate::error::{Error, Result};
use crate::s2c::SafetyConfig;

/// A declarative experiment, read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: AgentKind,
    #[serde(default)]
    pub suite: SuiteConfig,
    pub seeds: Vec<u64>,
    pub total_steps: usize,
    #[serde(default)]
    pub dqn: DqnConfig,
    #[serde(default)]
    pub safety: SafetyConfig,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// Which layouts episodes are drawn from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    /// Layout files, relative to the config file. Empty means the built-in
    /// suite.
    pub paths: Vec<PathBuf>,
    /// Indices into the suite; empty means all of them.
    pub variants: Vec<usize>,
}

impl SuiteConfig {
    pub fn load(&self) -> Result<IslandSuite> {
        let full = if self.paths.is_empty() {
            IslandSuite::standard()
        } else {
            IslandSuite::from_files(&self.paths)?
        };
        self.select(full)
    }

    /// Same suite restricted to `variants`.
    pub fn with_variants(&self, variants: &[usize]) -> Self {
        Self {
            paths: self.paths.clone(),
            variants: variants.to_vec(),
        }
    }

    fn select(&self, full: IslandSuite) -> Result<IslandSuite> {
        if self.variants.is_empty() {
            return Ok(full);
        }
        let mut picked = Vec::with_capacity(self.variants.len());
        for &i in &self.variants {
            let v = full.variants().get(i).ok_or_else(|| {
                Error::validation(
                    "suite.variants",
                    format!("index {i} out of range for {} layouts", full.len()),
                )
            })?;
            picked.push(v.clone());
        }
        IslandSuite::new(picked)
    }
}

/// Transfer of a pretrained steps-to-cost model (and optionally a policy)
/// to the configured suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    /// S2C checkpoint to transfer. When absent, a source agent is trained
    /// per seed on `source_variants`.
    #[serde(default)]
    pub source_checkpoint: Option<PathBuf>,
    /// Agent checkpoint for the policy arms; required with
    /// `source_checkpoint` if a policy arm is requested.
    #[serde(default)]
    pub source_agent_checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub source_variants: Vec<usize>,
    #[serde(default)]
    pub source_steps: Option<usize>,
    #[serde(default = "TransferArm::all")]
    pub arms: Vec<TransferArm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferArm {
    /// No transfer: S2C learned from scratch on the target.
    Scratch,
    /// Transferred S2C, never updated.
    Frozen,
    /// Transferred S2C, trained further on the target.
    Finetune,
    /// Transferred Q-network and frozen S2C.
    PolicyFrozen,
    /// Transferred Q-network and finetuned S2C.
    PolicyFinetune,
}

impl TransferArm {
    pub fn all() -> Vec<TransferArm> {
        vec![
            TransferArm::Scratch,
            TransferArm::Frozen,
            TransferArm::Finetune,
            TransferArm::PolicyFrozen,
            TransferArm::PolicyFinetune,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            TransferArm::Scratch => "scratch",
            TransferArm::Frozen => "frozen",
            TransferArm::Finetune => "finetune",
            TransferArm::PolicyFrozen => "policy_frozen",
            TransferArm::PolicyFinetune => "policy_finetune",
        }
    }

    pub fn uses_source(self) -> bool {
        self != TransferArm::Scratch
    }

    pub fn transfers_policy(self) -> bool {
        matches!(self, TransferArm::PolicyFrozen | TransferArm::PolicyFinetune)
    }

    pub fn freezes_s2c(self) -> bool {
        matches!(self, TransferArm::Frozen | TransferArm::PolicyFrozen)
    }
}

impl fmt::Display for TransferArm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameter varied by `ablate` and `tradeoff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    BinWidth,
    Horizon,
    Kind,
    /// Magnitude of the water penalty; the reward becomes `-value`.
    Penalty,
    InitialLambda,
    Budget,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::BinWidth => "bin_width",
            SweepParam::Horizon => "horizon",
            SweepParam::Kind => "kind",
            SweepParam::Penalty => "penalty",
            SweepParam::InitialLambda => "initial_lambda",
            SweepParam::Budget => "budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Number(v) => write!(f, "{v}"),
            SweepValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParam,
    pub values: Vec<SweepValue>,
    /// Kinds compared at every value by `tradeoff`. Defaults to the
    /// configured kind and its steps-to-cost counterpart.
    #[serde(default)]
    pub kinds: Vec<AgentKind>,
}

impl ExperimentConfig {
    /// Parses and validates a TOML document. Relative layout paths are kept
    /// as written.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; layout paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            for p in &mut cfg.suite.paths {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
            if let Some(t) = &mut cfg.transfer {
                for p in [&mut t.source_checkpoint, &mut t.source_agent_checkpoint]
                    .into_iter()
                    .flatten()
                {
                    if p.is_relative() {
                        *p = dir.join(&*p);
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("seeds", "must not be empty"));
        }
        let mut seen = HashSet::new();
        for s in &self.seeds {
            if !seen.insert(s) {
                return Err(Error::validation("seeds", format!("seed {s} repeated")));
            }
        }
        if self.total_steps == 0 {
            return Err(Error::validation("total_steps", "must be positive"));
        }
        self.dqn.validate()?;
        if self.env.max_steps == 0 {
            return Err(Error::validation("env.max_steps", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.env.slip_prob) {
            return Err(Error::validation("env.slip_prob", "must lie in [0, 1]"));
        }
        if self.kind.pipeline() != crate::agents::Pipeline::Raw
            && self.kind.pipeline() != crate::agents::Pipeline::GroundTruth
        {
            self.safety.validate(self.env.max_steps)?;
        }
        if let Some(t) = &self.transfer {
            if !self.kind.uses_s2c() {
                return Err(Error::validation(
                    "transfer",
                    format!("kind {} has no steps-to-cost model to transfer", self.kind),
                ));
            }
            if t.arms.is_empty() {
                return Err(Error::validation("transfer.arms", "must not be empty"));
            }
            if t.source_checkpoint.is_none() && t.source_variants.is_empty() {
                return Err(Error::validation(
                    "transfer.source_variants",
                    "needed when no source_checkpoint is given",
                ));
            }
            let policy = t.arms.iter().any(|a| a.transfers_policy());
            if t.source_checkpoint.is_some() && policy && t.source_agent_checkpoint.is_none() {
                return Err(Error::validation(
                    "transfer.source_agent_checkpoint",
                    "policy arms need an agent checkpoint",
                ));
            }
            if t.source_steps == Some(0) {
                return Err(Error::validation("transfer.source_steps", "must be positive"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::validation("sweep.values", "must not be empty"));
            }
            for (i, v) in s.values.iter().enumerate() {
                self.with_sweep_value(s.parameter, v)
                    .and_then(|c| c.validate_base())
                    .map_err(|e| Error::validation(format!("sweep.values[{i}]"), e.to_string()))?;
            }
        }
        self.validate_base()
    }

    /// Checks that need the layouts, without the sweep block.
    fn validate_base(&self) -> Result<()> {
        let suite = self.suite.load()?;
        if let Some(t) = &self.transfer {
            if !t.source_variants.is_empty() {
                let source = self.suite.with_variants(&t.source_variants).load()?;
                if source.dims() != suite.dims() {
                    return Err(Error::validation(
                        "transfer.source_variants",
                        "source and target layouts differ in size",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Copy with one swept parameter set to `value`.
    pub fn with_sweep_value(&self, param: SweepParam, value: &SweepValue) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.sweep = None;
        let number = |what: &str| match value {
            SweepValue::Number(v) if v.is_finite() => Ok(*v),
            _ => Err(Error::validation(what, format!("expected a number, got `{value}`"))),
        };
        let whole = |what: &str| {
            let v = number(what)?;
            if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
                return Err(Error::validation(what, format!("expected a whole number, got {v}")));
            }
            Ok(v as u32)
        };
        match param {
            SweepParam::BinWidth => cfg.safety.bin_width = whole("safety.bin_width")?,
            SweepParam::Horizon => cfg.safety.horizon = whole("safety.horizon")?,
            SweepParam::Kind => {
                cfg.kind = match value {
                    SweepValue::Text(s) => s.parse()?,
                    SweepValue::Number(_) => {
                        return Err(Error::validation("kind", format!("`{value}` is not a kind")))
                    }
                }
            }
            SweepParam::Penalty => {
                let v = number("env.rewards.water")?;
                if v < 0.0 {
                    return Err(Error::validation(
                        "env.rewards.water",
                        format!("penalty magnitude {v} is negative"),
                    ));
                }
                cfg.env.rewards.water = -v;
            }
            SweepParam::InitialLambda => {
                cfg.dqn.lagrange.initial_lambda = number("dqn.lagrange.initial_lambda")?
            }
            SweepParam::Budget => cfg.dqn.lagrange.budget = number("dqn.lagrange.budget")?,
        }
        if matches!(param, SweepParam::BinWidth | SweepParam::Horizon)
            && matches!(
                cfg.kind.pipeline(),
                crate::agents::Pipeline::Distribution | crate::agents::Pipeline::Scalar
            )
        {
            cfg.safety.validate(cfg.env.max_steps)?;
        }
        cfg.dqn.validate()?;
        Ok(cfg)
    }

    pub fn build_env(&self) -> Result<IslandEnv> {
        IslandEnv::new(self.suite.load()?, self.env)
    }
}

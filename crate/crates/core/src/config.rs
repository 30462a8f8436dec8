//! Run configuration: one TOML file with a section per subsystem.
//!
//! ```toml
//! policy = "chargecache"
//! traces = ["core0.trace", "core1.trace"]
//!
//! [hcrac]
//! caching_duration_ms = 1.0
//!
//! [sim]
//! instruction_budget = 1000000
//! warmup_cycles = 0
//! ```
//!
//! Every section is optional and defaults to the DDR3-1600 system described
//! in the README. Trace paths are relative to the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::ChargeModel;
use crate::controller::{ControllerConfig, RowPolicy};
use crate::cpu::CoreConfig;
use crate::dram::{DramGeometry, ReducedDeltas, TimingParams, TimingSet};
use crate::energy::PowerParams;
use crate::error::{ConfigError, Error};
use crate::policy::{HcracConfig, NuatConfig, PolicyKind, PolicySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Instructions each core must retire in the measured phase.
    pub instruction_budget: u64,
    /// Core cycles simulated before statistics are reset.
    pub warmup_cycles: u64,
    /// Recorded with the results; synthetic generators take it as their seed.
    pub seed: u64,
    /// Memory cycles without any progress before the run is abandoned.
    pub stall_limit: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            instruction_budget: 1_000_000,
            warmup_cycles: 200_000_000,
            seed: 0,
            stall_limit: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub policy: PolicyKind,
    pub traces: Vec<PathBuf>,
    pub geometry: DramGeometry,
    pub timing: TimingParams,
    pub reduced: ReducedDeltas,
    pub hcrac: HcracConfig,
    pub nuat: NuatConfig,
    pub controller: ControllerConfig,
    pub core: CoreConfig,
    pub power: PowerParams,
    pub sim: SimParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Baseline,
            traces: Vec::new(),
            geometry: DramGeometry::default(),
            timing: TimingParams::default(),
            reduced: ReducedDeltas::default(),
            hcrac: HcracConfig::default(),
            nuat: NuatConfig::default(),
            controller: ControllerConfig::default(),
            core: CoreConfig::default(),
            power: PowerParams::default(),
            sim: SimParams::default(),
        }
    }
}

impl RunConfig {
    /// Parses TOML text. Without an explicit `geometry.channels`, one core
    /// gets one channel and several cores get two. Relative trace paths are
    /// joined onto `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        let explicit_channels = table
            .get("geometry")
            .and_then(|g| g.as_table())
            .is_some_and(|g| g.contains_key("channels"));
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        if !explicit_channels {
            cfg.geometry.channels = if cfg.traces.len() > 1 { 2 } else { 1 };
        }
        if let Some(dir) = base_dir {
            for t in &mut cfg.traces {
                if t.is_relative() {
                    *t = dir.join(&*t);
                }
            }
        }
        Ok(cfg)
    }

    /// Reads, parses and validates a config file, checking that every trace
    /// exists. Returns the config and any consistency warnings.
    pub fn load(path: &Path) -> Result<(Self, Vec<String>), Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg = Self::from_toml_str(&text, path.parent())?;
        let warnings = cfg.validate()?;
        if cfg.traces.is_empty() {
            return Err(ConfigError::Invalid("at least one trace path is required".into()).into());
        }
        for t in &cfg.traces {
            if !t.is_file() {
                return Err(Error::Io {
                    path: t.display().to_string(),
                    source: std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        "trace file not found",
                    ),
                });
            }
        }
        Ok((cfg, warnings))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn timing_set(&self) -> Result<TimingSet, ConfigError> {
        TimingSet::new(self.timing, self.reduced)
    }

    pub fn row_policy(&self, cores: usize) -> RowPolicy {
        self.controller.row_policy.resolve(cores)
    }

    pub fn policy_spec(&self, cores: usize) -> PolicySpec {
        PolicySpec::new(self.policy, &self.hcrac, &self.nuat, &self.timing, cores)
    }

    /// Checks every section. The returned strings are non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        self.geometry.validate()?;
        self.timing.validate()?;
        self.reduced.validate(&self.timing)?;
        self.hcrac.validate()?;
        if !(self.nuat.window_ms >= 0.0 && self.nuat.window_ms.is_finite()) {
            return Err(ConfigError::Invalid("nuat.window_ms must be >= 0".into()));
        }
        self.controller.validate()?;
        self.core.validate()?;
        self.power.validate()?;
        if self.sim.instruction_budget == 0 {
            return Err(ConfigError::NonPositive {
                field: "sim.instruction_budget",
            });
        }
        if self.sim.stall_limit == 0 {
            return Err(ConfigError::NonPositive {
                field: "sim.stall_limit",
            });
        }
        let mut warnings = Vec::new();
        if let Some(msg) = self.check_reduction_bound()? {
            if self.reduced == ReducedDeltas::default() {
                warnings.push(msg);
            } else {
                return Err(ConfigError::Invalid(msg));
            }
        }
        Ok(warnings)
    }

    /// The reduced timings must not exceed what the charge model allows for
    /// the oldest row the policy can still treat as highly charged. The
    /// stock 4/8-cycle deltas exceed it slightly and only warn.
    fn check_reduction_bound(&self) -> Result<Option<String>, ConfigError> {
        let age = match self.policy {
            PolicyKind::ChargeCache => self.hcrac.caching_duration_ms,
            PolicyKind::NuatSimplified => self.nuat.window_ms,
            PolicyKind::ChargeCachePlusNuat => {
                self.hcrac.caching_duration_ms.max(self.nuat.window_ms)
            }
            PolicyKind::Baseline | PolicyKind::LowLatencyDram => return Ok(None),
        };
        let model = ChargeModel::calibrated().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        model
            .check_deltas(&self.reduced, &self.timing, age)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

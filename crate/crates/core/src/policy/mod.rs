//! Activation timing-class decisions.
//!
//! The controller consults its channel's policy on every ACT (to pick the
//! timing class) and every PRE (so the policy can remember the row). The
//! ChargeCache policy remembers recently precharged rows in an HCRAC; the
//! others are comparison points.

mod hcrac;
pub mod replay;

pub use hcrac::{HcracEntry, HcracTable, InsertOutcome, Lookup, RowTag};
pub use replay::{classify_replay, ReplayCounts};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dram::{DramCoord, DramGeometry, SafetyRule, TimingClass, TimingParams};
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum PolicyKind {
    #[default]
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "chargecache")]
    ChargeCache,
    #[serde(rename = "nuat")]
    NuatSimplified,
    #[serde(rename = "ll-dram")]
    LowLatencyDram,
    #[serde(rename = "chargecache+nuat")]
    ChargeCachePlusNuat,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Baseline,
        PolicyKind::ChargeCache,
        PolicyKind::NuatSimplified,
        PolicyKind::LowLatencyDram,
        PolicyKind::ChargeCachePlusNuat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Baseline => "baseline",
            PolicyKind::ChargeCache => "chargecache",
            PolicyKind::NuatSimplified => "nuat",
            PolicyKind::LowLatencyDram => "ll-dram",
            PolicyKind::ChargeCachePlusNuat => "chargecache+nuat",
        }
    }

    pub fn uses_hcrac(self) -> bool {
        matches!(
            self,
            PolicyKind::ChargeCache | PolicyKind::ChargeCachePlusNuat
        )
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

/// `[hcrac]` configuration section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HcracConfig {
    pub entries_per_core: usize,
    pub associativity: usize,
    pub caching_duration_ms: f64,
    /// One table per channel instead of one per (core, channel).
    pub shared: bool,
}

impl Default for HcracConfig {
    fn default() -> Self {
        Self {
            entries_per_core: 128,
            associativity: 2,
            caching_duration_ms: 1.0,
            shared: false,
        }
    }
}

impl HcracConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let (e, a) = (self.entries_per_core, self.associativity);
        if a == 0 || !a.is_power_of_two() {
            return Err(ConfigError::NotPowerOfTwo {
                field: "hcrac.associativity",
                value: a as u64,
            });
        }
        if e < a || !e.is_power_of_two() {
            return Err(ConfigError::Invalid(format!(
                "hcrac.entries_per_core ({e}) must be a power of two >= associativity ({a})"
            )));
        }
        if !(self.caching_duration_ms >= 0.0 && self.caching_duration_ms.is_finite()) {
            return Err(ConfigError::Invalid(
                "hcrac.caching_duration_ms must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// `[nuat]` configuration section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuatConfig {
    pub window_ms: f64,
}

impl Default for NuatConfig {
    fn default() -> Self {
        Self { window_ms: 4.0 }
    }
}

/// Cycle-resolved HCRAC parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HcracParams {
    pub entries: usize,
    pub ways: usize,
    pub caching_duration: u64,
    pub shared: bool,
}

impl HcracParams {
    pub fn from_config(cfg: &HcracConfig, timing: &TimingParams) -> Self {
        Self {
            entries: cfg.entries_per_core,
            ways: cfg.associativity,
            caching_duration: timing.ms_to_cycles(cfg.caching_duration_ms),
            shared: cfg.shared,
        }
    }

    /// A table that never evicts and never expires: one set per row index
    /// and one way per bank, so every row of the channel has a slot.
    pub fn unbounded(geometry: &DramGeometry) -> Self {
        let ways = geometry.banks_per_channel();
        Self {
            entries: geometry.rows_per_bank as usize * ways,
            ways,
            caching_duration: u64::MAX,
            shared: true,
        }
    }

    /// Periodic invalidation interval: an eighth of the caching duration.
    pub fn sweep_interval(&self) -> u64 {
        (self.caching_duration / 8).max(1)
    }
}

/// Everything needed to build a policy instance for one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub hcrac: HcracParams,
    pub nuat_window: u64,
    pub cores: usize,
}

impl PolicySpec {
    pub fn new(
        kind: PolicyKind,
        hcrac: &HcracConfig,
        nuat: &NuatConfig,
        timing: &TimingParams,
        cores: usize,
    ) -> Self {
        Self {
            kind,
            hcrac: HcracParams::from_config(hcrac, timing),
            nuat_window: timing.ms_to_cycles(nuat.window_ms),
            cores,
        }
    }

    pub fn build(&self) -> Box<dyn LatencyPolicy> {
        match self.kind {
            PolicyKind::Baseline => Box::new(Baseline),
            PolicyKind::LowLatencyDram => Box::new(LowLatencyDram),
            PolicyKind::NuatSimplified => Box::new(NuatSimplified {
                window: self.nuat_window,
            }),
            PolicyKind::ChargeCache => Box::new(ChargeCache::new(self.hcrac, self.cores)),
            PolicyKind::ChargeCachePlusNuat => Box::new(ChargeCachePlusNuat {
                cache: ChargeCache::new(self.hcrac, self.cores),
                nuat: NuatSimplified {
                    window: self.nuat_window,
                },
            }),
        }
    }

    /// The rule the independent verifier should hold this policy to.
    pub fn safety_rule(&self) -> SafetyRule {
        match self.kind {
            PolicyKind::Baseline | PolicyKind::ChargeCache => SafetyRule::ChargeWindow {
                caching_duration: self.hcrac.caching_duration,
            },
            PolicyKind::NuatSimplified => SafetyRule::RefreshWindow {
                window: self.nuat_window,
            },
            PolicyKind::ChargeCachePlusNuat => SafetyRule::ChargeOrRefresh {
                caching_duration: self.hcrac.caching_duration,
                window: self.nuat_window,
            },
            PolicyKind::LowLatencyDram => SafetyRule::Unchecked,
        }
    }
}

/// HCRAC activity counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PolicyStats {
    pub lookups: u64,
    pub hits: u64,
    pub insertions: u64,
    pub evictions: u64,
    pub expired_on_lookup: u64,
    pub expired_by_sweep: u64,
}

impl PolicyStats {
    pub fn merge(&mut self, o: &PolicyStats) {
        self.lookups += o.lookups;
        self.hits += o.hits;
        self.insertions += o.insertions;
        self.evictions += o.evictions;
        self.expired_on_lookup += o.expired_on_lookup;
        self.expired_by_sweep += o.expired_by_sweep;
    }
}

/// Timing-class decision engine owned by one channel controller.
pub trait LatencyPolicy: Send {
    fn kind(&self) -> PolicyKind;

    /// A PRE closing `coord.row` was just issued; `core` opened that row.
    fn on_precharge(&mut self, core: usize, coord: DramCoord, now: u64);

    /// An ACT for `coord` on behalf of `core` is about to be issued.
    /// `last_refresh` is when the row was last refreshed, if ever.
    fn on_activate(
        &mut self,
        core: usize,
        coord: DramCoord,
        now: u64,
        last_refresh: Option<u64>,
    ) -> TimingClass;

    /// Periodic invalidation. Returns the number of entries dropped.
    fn expire(&mut self, _now: u64) -> u64 {
        0
    }

    /// How often [`LatencyPolicy::expire`] should run, if at all.
    fn sweep_interval(&self) -> Option<u64> {
        None
    }

    fn stats(&self) -> PolicyStats {
        PolicyStats::default()
    }

    fn reset_stats(&mut self) {}
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Baseline;

impl LatencyPolicy for Baseline {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Baseline
    }
    fn on_precharge(&mut self, _: usize, _: DramCoord, _: u64) {}
    fn on_activate(&mut self, _: usize, _: DramCoord, _: u64, _: Option<u64>) -> TimingClass {
        TimingClass::Standard
    }
}

/// Every activation is fast.
#[derive(Debug, Clone, Copy, Default)]
pub struct LowLatencyDram;

impl LatencyPolicy for LowLatencyDram {
    fn kind(&self) -> PolicyKind {
        PolicyKind::LowLatencyDram
    }
    fn on_precharge(&mut self, _: usize, _: DramCoord, _: u64) {}
    fn on_activate(&mut self, _: usize, _: DramCoord, _: u64, _: Option<u64>) -> TimingClass {
        TimingClass::Reduced
    }
}

/// Single-threshold refresh-recency policy.
#[derive(Debug, Clone, Copy)]
pub struct NuatSimplified {
    pub window: u64,
}

impl NuatSimplified {
    fn decide(&self, now: u64, last_refresh: Option<u64>) -> TimingClass {
        match last_refresh {
            Some(t) if now - t <= self.window => TimingClass::Reduced,
            _ => TimingClass::Standard,
        }
    }
}

impl LatencyPolicy for NuatSimplified {
    fn kind(&self) -> PolicyKind {
        PolicyKind::NuatSimplified
    }
    fn on_precharge(&mut self, _: usize, _: DramCoord, _: u64) {}
    fn on_activate(
        &mut self,
        _: usize,
        _: DramCoord,
        now: u64,
        last_refresh: Option<u64>,
    ) -> TimingClass {
        self.decide(now, last_refresh)
    }
}

/// HCRAC-backed policy.
#[derive(Debug, Clone)]
pub struct ChargeCache {
    tables: Vec<HcracTable>,
    params: HcracParams,
    stats: PolicyStats,
}

impl ChargeCache {
    pub fn new(params: HcracParams, cores: usize) -> Self {
        let n = if params.shared { 1 } else { cores.max(1) };
        Self {
            tables: (0..n)
                .map(|_| HcracTable::new(params.entries, params.ways, params.caching_duration))
                .collect(),
            params,
            stats: PolicyStats::default(),
        }
    }

    fn table(&mut self, core: usize) -> &mut HcracTable {
        if self.params.shared {
            &mut self.tables[0]
        } else {
            &mut self.tables[core]
        }
    }

    pub fn tables(&self) -> &[HcracTable] {
        &self.tables
    }

    fn tag(coord: &DramCoord) -> RowTag {
        RowTag {
            rank: coord.rank,
            bank: coord.bank,
            row: coord.row,
        }
    }
}

impl LatencyPolicy for ChargeCache {
    fn kind(&self) -> PolicyKind {
        PolicyKind::ChargeCache
    }

    fn on_precharge(&mut self, core: usize, coord: DramCoord, now: u64) {
        let outcome = self.table(core).insert(Self::tag(&coord), now);
        self.stats.insertions += 1;
        if matches!(outcome, InsertOutcome::Evicted(_)) {
            self.stats.evictions += 1;
        }
    }

    fn on_activate(
        &mut self,
        core: usize,
        coord: DramCoord,
        now: u64,
        _: Option<u64>,
    ) -> TimingClass {
        self.stats.lookups += 1;
        match self.table(core).lookup(Self::tag(&coord), now) {
            Lookup::Hit => {
                self.stats.hits += 1;
                TimingClass::Reduced
            }
            Lookup::Expired => {
                self.stats.expired_on_lookup += 1;
                TimingClass::Standard
            }
            Lookup::Miss => TimingClass::Standard,
        }
    }

    fn expire(&mut self, now: u64) -> u64 {
        let n: usize = self.tables.iter_mut().map(|t| t.expire(now)).sum();
        self.stats.expired_by_sweep += n as u64;
        n as u64
    }

    fn sweep_interval(&self) -> Option<u64> {
        Some(self.params.sweep_interval())
    }

    fn stats(&self) -> PolicyStats {
        self.stats
    }

    fn reset_stats(&mut self) {
        self.stats = PolicyStats::default();
    }
}

#[derive(Debug, Clone)]
pub struct ChargeCachePlusNuat {
    cache: ChargeCache,
    nuat: NuatSimplified,
}

impl LatencyPolicy for ChargeCachePlusNuat {
    fn kind(&self) -> PolicyKind {
        PolicyKind::ChargeCachePlusNuat
    }
    fn on_precharge(&mut self, core: usize, coord: DramCoord, now: u64) {
        self.cache.on_precharge(core, coord, now);
    }
    fn on_activate(
        &mut self,
        core: usize,
        coord: DramCoord,
        now: u64,
        last_refresh: Option<u64>,
    ) -> TimingClass {
        let cached = self.cache.on_activate(core, coord, now, last_refresh);
        match (cached, self.nuat.decide(now, last_refresh)) {
            (TimingClass::Standard, TimingClass::Standard) => TimingClass::Standard,
            _ => TimingClass::Reduced,
        }
    }
    fn expire(&mut self, now: u64) -> u64 {
        self.cache.expire(now)
    }
    fn sweep_interval(&self) -> Option<u64> {
        self.cache.sweep_interval()
    }
    fn stats(&self) -> PolicyStats {
        self.cache.stats()
    }
    fn reset_stats(&mut self) {
        self.cache.reset_stats();
    }
}

/// Standard/reduced activation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ActCounts {
    pub standard: u64,
    pub reduced: u64,
}

impl ActCounts {
    pub fn record(&mut self, class: TimingClass) {
        match class {
            TimingClass::Standard => self.standard += 1,
            TimingClass::Reduced => self.reduced += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.standard + self.reduced
    }

    pub fn merge(&mut self, o: &ActCounts) {
        self.standard += o.standard;
        self.reduced += o.reduced;
    }

    pub fn hit_rate(&self) -> HitRate {
        hit_rate(self.reduced, self.total())
    }
}

/// Fraction of reduced activations; `None` when there were no activations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRate(pub Option<f64>);

impl fmt::Display for HitRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(r) => write!(f, "{r:.6}"),
            None => f.write_str("undefined"),
        }
    }
}

pub fn hit_rate(reduced: u64, total: u64) -> HitRate {
    if total == 0 {
        HitRate(None)
    } else {
        HitRate(Some(reduced as f64 / total as f64))
    }
}

//! DRAM device model: geometry, timing constraints, the per-bank state
//! machine and an independent command-trace verifier.

mod bank;
mod command;
mod timing;
pub mod verify;

pub use bank::{
    apply_command, can_issue, earliest_issue, BankPhase, BankState, BusTiming, RankTiming, RankView,
};
pub use command::{parse_command_trace, CommandKind, DramCommand};
pub use timing::{effective_timings, ReducedDeltas, TimingClass, TimingParams, TimingSet};
pub use verify::{
    verify_command_trace, verify_trace_text, SafetyRule, VerifyReport, Violation, ViolationKind,
};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Physical organisation of the memory system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DramGeometry {
    pub channels: u32,
    pub ranks_per_channel: u32,
    pub banks_per_rank: u32,
    pub rows_per_bank: u32,
    pub row_buffer_bytes: u32,
    pub cacheline_bytes: u32,
}

impl Default for DramGeometry {
    /// DDR3-1600, 1 rank/channel, 8 banks, 64K rows, 8KB row buffer, 64B lines.
    fn default() -> Self {
        Self {
            channels: 1,
            ranks_per_channel: 1,
            banks_per_rank: 8,
            rows_per_bank: 65536,
            row_buffer_bytes: 8192,
            cacheline_bytes: 64,
        }
    }
}

fn check_pow2(field: &'static str, value: u64) -> Result<(), ConfigError> {
    if value == 0 || !value.is_power_of_two() {
        return Err(ConfigError::NotPowerOfTwo { field, value });
    }
    Ok(())
}

impl DramGeometry {
    pub fn with_channels(mut self, channels: u32) -> Self {
        self.channels = channels;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_pow2("channels", self.channels.into())?;
        check_pow2("ranks_per_channel", self.ranks_per_channel.into())?;
        check_pow2("banks_per_rank", self.banks_per_rank.into())?;
        check_pow2("rows_per_bank", self.rows_per_bank.into())?;
        check_pow2("row_buffer_bytes", self.row_buffer_bytes.into())?;
        check_pow2("cacheline_bytes", self.cacheline_bytes.into())?;
        if self.row_buffer_bytes % self.cacheline_bytes != 0
            || self.row_buffer_bytes < self.cacheline_bytes
        {
            return Err(ConfigError::Invalid(
                "row_buffer_bytes must be a multiple of cacheline_bytes".into(),
            ));
        }
        let bits = self.offset_bits()
            + self.channel_bits()
            + self.column_bits()
            + self.bank_bits()
            + self.rank_bits()
            + self.row_bits();
        if bits > 63 {
            return Err(ConfigError::Invalid(format!(
                "geometry needs {bits} address bits"
            )));
        }
        Ok(())
    }

    /// Cache lines per row buffer.
    pub fn columns(&self) -> u32 {
        self.row_buffer_bytes / self.cacheline_bytes
    }

    pub fn banks_per_channel(&self) -> usize {
        (self.ranks_per_channel * self.banks_per_rank) as usize
    }

    pub fn capacity_bytes(&self) -> u64 {
        1u64 << (self.offset_bits()
            + self.channel_bits()
            + self.column_bits()
            + self.bank_bits()
            + self.rank_bits()
            + self.row_bits())
    }

    pub fn offset_bits(&self) -> u32 {
        self.cacheline_bytes.trailing_zeros()
    }
    pub fn channel_bits(&self) -> u32 {
        self.channels.trailing_zeros()
    }
    pub fn column_bits(&self) -> u32 {
        self.columns().trailing_zeros()
    }
    pub fn bank_bits(&self) -> u32 {
        self.banks_per_rank.trailing_zeros()
    }
    pub fn rank_bits(&self) -> u32 {
        self.ranks_per_channel.trailing_zeros()
    }
    pub fn row_bits(&self) -> u32 {
        self.rows_per_bank.trailing_zeros()
    }

    /// True when every index of `coord` is inside this geometry.
    pub fn contains(&self, coord: &DramCoord) -> bool {
        coord.channel < self.channels
            && coord.rank < self.ranks_per_channel
            && coord.bank < self.banks_per_rank
            && coord.row < self.rows_per_bank
            && coord.column < self.columns()
    }
}

/// Zero-based location of a cache line inside the DRAM system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DramCoord {
    pub channel: u32,
    pub rank: u32,
    pub bank: u32,
    pub row: u32,
    pub column: u32,
}

impl DramCoord {
    pub fn new(channel: u32, rank: u32, bank: u32, row: u32, column: u32) -> Self {
        Self {
            channel,
            rank,
            bank,
            row,
            column,
        }
    }

    /// Index of this coordinate's bank within its channel.
    pub fn bank_index(&self, geometry: &DramGeometry) -> usize {
        (self.rank * geometry.banks_per_rank + self.bank) as usize
    }
}

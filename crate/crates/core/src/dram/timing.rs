use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// DRAM timing constraints in memory-clock cycles.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingParams {
    pub tRCD: u64,
    pub tRAS: u64,
    pub tRP: u64,
    pub tCL: u64,
    pub tCWL: u64,
    pub tBL: u64,
    pub tCCD: u64,
    pub tRTP: u64,
    pub tWTR: u64,
    pub tWR: u64,
    pub tRRD: u64,
    pub tFAW: u64,
    pub tRFC: u64,
    pub tREFI: u64,
    pub clock_period_ns: f64,
}

impl Default for TimingParams {
    /// DDR3-1600 11-11-11 at an 800MHz bus clock.
    fn default() -> Self {
        Self {
            tRCD: 11,
            tRAS: 28,
            tRP: 11,
            tCL: 11,
            tCWL: 8,
            tBL: 4,
            tCCD: 4,
            tRTP: 6,
            tWTR: 6,
            tWR: 12,
            tRRD: 5,
            tFAW: 24,
            tRFC: 208,
            tREFI: 6240,
            clock_period_ns: 1.25,
        }
    }
}

impl TimingParams {
    /// Activate-to-activate delay for one bank.
    pub fn trc(&self) -> u64 {
        self.tRAS + self.tRP
    }

    /// Cycles from a write command until its last data beat.
    pub fn write_data_end(&self) -> u64 {
        self.tCWL + self.tBL
    }

    /// Minimum RD-to-WR command spacing on one channel.
    pub fn read_to_write(&self) -> u64 {
        (self.tCL + self.tBL + 2).saturating_sub(self.tCWL)
    }

    pub fn cycles_per_ms(&self) -> f64 {
        1.0e6 / self.clock_period_ns
    }

    /// Milliseconds converted to whole cycles (rounded to nearest).
    pub fn ms_to_cycles(&self, ms: f64) -> u64 {
        (ms * self.cycles_per_ms()).round() as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("tRCD", self.tRCD),
            ("tRAS", self.tRAS),
            ("tRP", self.tRP),
            ("tCL", self.tCL),
            ("tCWL", self.tCWL),
            ("tBL", self.tBL),
            ("tCCD", self.tCCD),
            ("tRTP", self.tRTP),
            ("tWTR", self.tWTR),
            ("tWR", self.tWR),
            ("tRRD", self.tRRD),
            ("tFAW", self.tFAW),
            ("tRFC", self.tRFC),
            ("tREFI", self.tREFI),
        ];
        for (field, value) in fields {
            if value == 0 {
                return Err(ConfigError::NonPositive { field });
            }
        }
        if !(self.clock_period_ns > 0.0 && self.clock_period_ns.is_finite()) {
            return Err(ConfigError::NonPositive {
                field: "clock_period_ns",
            });
        }
        if self.tRAS < self.tRCD {
            return Err(ConfigError::Invalid(format!(
                "tRAS ({}) must be >= tRCD ({})",
                self.tRAS, self.tRCD
            )));
        }
        Ok(())
    }
}

/// Which timing set governs an activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TimingClass {
    #[default]
    Standard,
    Reduced,
}

impl TimingClass {
    pub fn symbol(self) -> char {
        match self {
            TimingClass::Standard => 'S',
            TimingClass::Reduced => 'R',
        }
    }
}

/// Cycle reductions applied to tRCD and tRAS on a reduced-latency activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducedDeltas {
    pub trcd_delta: u64,
    pub tras_delta: u64,
}

impl Default for ReducedDeltas {
    fn default() -> Self {
        Self {
            trcd_delta: 4,
            tras_delta: 8,
        }
    }
}

impl ReducedDeltas {
    pub const ZERO: ReducedDeltas = ReducedDeltas {
        trcd_delta: 0,
        tras_delta: 0,
    };

    pub fn validate(&self, base: &TimingParams) -> Result<(), ConfigError> {
        if self.trcd_delta >= base.tRCD {
            return Err(ConfigError::Invalid(format!(
                "tRCD reduction {} must be below tRCD {}",
                self.trcd_delta, base.tRCD
            )));
        }
        if self.tras_delta >= base.tRAS {
            return Err(ConfigError::Invalid(format!(
                "tRAS reduction {} must be below tRAS {}",
                self.tras_delta, base.tRAS
            )));
        }
        if base.tRAS - self.tras_delta < base.tRCD - self.trcd_delta {
            return Err(ConfigError::Invalid(
                "reduced tRAS would fall below reduced tRCD".into(),
            ));
        }
        Ok(())
    }
}

/// Timing parameters in effect for an activation of the given class.
///
/// Only tRCD and tRAS (and through them tRC) change; every other field is
/// copied from `base`.
pub fn effective_timings(
    base: &TimingParams,
    deltas: ReducedDeltas,
    class: TimingClass,
) -> Result<TimingParams, ConfigError> {
    deltas.validate(base)?;
    Ok(match class {
        TimingClass::Standard => *base,
        TimingClass::Reduced => TimingParams {
            tRCD: base.tRCD - deltas.trcd_delta,
            tRAS: base.tRAS - deltas.tras_delta,
            ..*base
        },
    })
}

/// Both timing variants, resolved once at configuration time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSet {
    pub standard: TimingParams,
    pub reduced: TimingParams,
    pub deltas: ReducedDeltas,
}

impl TimingSet {
    pub fn new(base: TimingParams, deltas: ReducedDeltas) -> Result<Self, ConfigError> {
        base.validate()?;
        let reduced = effective_timings(&base, deltas, TimingClass::Reduced)?;
        Ok(Self {
            standard: base,
            reduced,
            deltas,
        })
    }

    pub fn base(&self) -> &TimingParams {
        &self.standard
    }

    pub fn for_class(&self, class: TimingClass) -> &TimingParams {
        match class {
            TimingClass::Standard => &self.standard,
            TimingClass::Reduced => &self.reduced,
        }
    }
}

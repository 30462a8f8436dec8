//! Command-level DRAM energy accounting from IDD currents.

use serde::{Deserialize, Serialize};

use crate::dram::{TimingClass, TimingSet};
use crate::error::{ConfigError, Error};

/// HCRAC power, a published reference figure (not modeled).
pub const HCRAC_POWER_MW: f64 = 0.149;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct PowerParams {
    pub VDD: f64,
    pub IDD0: f64,
    pub IDD2N: f64,
    pub IDD3N: f64,
    pub IDD4R: f64,
    pub IDD4W: f64,
    pub IDD5: f64,
    /// Currents are per device; a rank draws this many times as much.
    pub devices_per_rank: u32,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            VDD: 1.5,
            IDD0: 75.0,
            IDD2N: 32.0,
            IDD3N: 38.0,
            IDD4R: 157.0,
            IDD4W: 165.0,
            IDD5: 235.0,
            devices_per_rank: 8,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("power.VDD", self.VDD),
            ("power.IDD0", self.IDD0),
            ("power.IDD2N", self.IDD2N),
            ("power.IDD3N", self.IDD3N),
            ("power.IDD4R", self.IDD4R),
            ("power.IDD4W", self.IDD4W),
            ("power.IDD5", self.IDD5),
        ];
        for (field, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::NonPositive { field });
            }
        }
        if self.devices_per_rank == 0 {
            return Err(ConfigError::NonPositive {
                field: "power.devices_per_rank",
            });
        }
        if self.IDD3N < self.IDD2N {
            return Err(ConfigError::Invalid(
                "power.IDD3N must be at least power.IDD2N".into(),
            ));
        }
        if self.IDD0 < self.IDD3N {
            return Err(ConfigError::Invalid(
                "power.IDD0 must be at least power.IDD3N".into(),
            ));
        }
        Ok(())
    }

    // mA * V * cycles * ns/cycle = pJ; scaled to joules for a whole rank
    fn joules(&self, milliamps: f64, cycles: f64, period_ns: f64) -> f64 {
        self.VDD * milliamps * cycles * period_ns * 1e-12 * f64::from(self.devices_per_rank)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CommandCounts {
    pub act_standard: u64,
    pub act_reduced: u64,
    pub pre: u64,
    pub rd: u64,
    pub wr: u64,
    pub refresh: u64,
}

impl CommandCounts {
    pub fn record_act(&mut self, class: TimingClass) {
        match class {
            TimingClass::Standard => self.act_standard += 1,
            TimingClass::Reduced => self.act_reduced += 1,
        }
    }

    pub fn acts(&self) -> u64 {
        self.act_standard + self.act_reduced
    }

    pub fn merge(&mut self, o: &CommandCounts) {
        self.act_standard += o.act_standard;
        self.act_reduced += o.act_reduced;
        self.pre += o.pre;
        self.rd += o.rd;
        self.wr += o.wr;
        self.refresh += o.refresh;
    }
}

/// Rank-cycles spent with at least one bank open versus all precharged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StateDurations {
    pub active_cycles: u64,
    pub precharged_cycles: u64,
}

impl StateDurations {
    pub fn total(&self) -> u64 {
        self.active_cycles + self.precharged_cycles
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyReport {
    pub act_pre: f64,
    pub read: f64,
    pub write: f64,
    pub refresh: f64,
    pub background: f64,
    pub hcrac: f64,
    pub total: f64,
}

impl EnergyReport {
    /// Percent change of `self` relative to `baseline` (negative is a saving).
    pub fn percent_vs(&self, baseline: &EnergyReport) -> Option<f64> {
        (baseline.total > 0.0).then(|| (self.total - baseline.total) / baseline.total * 100.0)
    }

    pub fn components(&self) -> [(&'static str, f64); 6] {
        [
            ("act_pre", self.act_pre),
            ("read", self.read),
            ("write", self.write),
            ("refresh", self.refresh),
            ("background", self.background),
            ("hcrac", self.hcrac),
        ]
    }
}

/// Energy of one ACT/PRE pair above the standby floor, in joules.
pub fn activation_energy(params: &PowerParams, timings: &TimingSet, class: TimingClass) -> f64 {
    let t = timings.for_class(class);
    let p = t.clock_period_ns;
    let tras = t.tRAS as f64;
    let trp = t.tRP as f64;
    params.joules(params.IDD0, tras + trp, p)
        - params.joules(params.IDD3N, tras, p)
        - params.joules(params.IDD2N, trp, p)
}

/// Energy for a run.
///
/// `durations` must cover `wall_cycles` on each of `ranks` ranks exactly.
/// `hcrac_present` adds the table's constant power over the wall time.
pub fn energy_from_run(
    counts: &CommandCounts,
    durations: &StateDurations,
    params: &PowerParams,
    timings: &TimingSet,
    wall_cycles: u64,
    ranks: u64,
    hcrac_present: bool,
) -> Result<EnergyReport, Error> {
    if durations.total() != wall_cycles * ranks {
        return Err(Error::Accounting(format!(
            "state durations cover {} rank-cycles but the run spans {} cycles on {} ranks",
            durations.total(),
            wall_cycles,
            ranks
        )));
    }
    let base = timings.base();
    let p = base.clock_period_ns;
    let act_pre = counts.act_standard as f64
        * activation_energy(params, timings, TimingClass::Standard)
        + counts.act_reduced as f64 * activation_energy(params, timings, TimingClass::Reduced);
    let burst = base.tBL as f64;
    let read = counts.rd as f64 * params.joules(params.IDD4R - params.IDD3N, burst, p);
    let write = counts.wr as f64 * params.joules(params.IDD4W - params.IDD3N, burst, p);
    let refresh =
        counts.refresh as f64 * params.joules(params.IDD5 - params.IDD2N, base.tRFC as f64, p);
    let background = params.joules(params.IDD3N, durations.active_cycles as f64, p)
        + params.joules(params.IDD2N, durations.precharged_cycles as f64, p);
    let hcrac = if hcrac_present {
        HCRAC_POWER_MW * 1e-3 * wall_cycles as f64 * p * 1e-9
    } else {
        0.0
    };
    let total = act_pre + read + write + refresh + background + hcrac;
    Ok(EnergyReport {
        act_pre,
        read,
        write,
        refresh,
        background,
        hcrac,
        total,
    })
}

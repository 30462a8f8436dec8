//! Analytic bitline charge model and HCRAC storage cost.
//!
//! The charge model replaces circuit simulation with three pieces: the cell
//! voltage decays exponentially after its last replenish, charge sharing
//! moves the bitline by a fixed fraction of the cell's deviation from
//! VDD/2, and the sense amplifier grows that deviation exponentially until
//! it reaches the ready-to-access level. The two time constants are found
//! by bisection so that a fully charged cell senses in 10ns and a cell left
//! for a full retention period senses in 14.5ns.

use serde::Serialize;
use thiserror::Error;

use crate::dram::{ReducedDeltas, TimingParams};

/// HCRAC area from the published synthesis result (not modeled).
pub const HCRAC_AREA_MM2: f64 = 0.022;
pub use crate::energy::HCRAC_POWER_MW;

const BISECT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("time since replenish must be non-negative (got {0} ms)")]
    NegativeTime(f64),
    #[error("cell voltage {0} V is not above VDD/2: row unreadable")]
    SensingFailure(f64),
    #[error("{field} must be a power of two (got {value})")]
    NotPowerOfTwo { field: &'static str, value: u64 },
    #[error("invalid charge model: {0}")]
    BadModel(String),
    #[error("calibration did not converge: {0}")]
    Calibration(String),
}

/// Calibration targets and fixed circuit constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargeAnchors {
    pub full_sense_ns: f64,
    pub retention_sense_ns: f64,
    pub max_trcd_reduction_ns: f64,
    pub max_tras_reduction_ns: f64,
}

impl Default for ChargeAnchors {
    fn default() -> Self {
        Self {
            full_sense_ns: 10.0,
            retention_sense_ns: 14.5,
            max_trcd_reduction_ns: 4.5,
            max_tras_reduction_ns: 9.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargeModel {
    pub vdd: f64,
    pub v_ready_frac: f64,
    pub restore_frac: f64,
    pub retention_ms: f64,
    /// Fraction of the cell's deviation from VDD/2 seen on the bitline.
    pub transfer_ratio: f64,
    pub t0_ns: f64,
    pub tau_leak_ms: f64,
    pub tau_sense_ns: f64,
    pub anchors: ChargeAnchors,
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> Result<f64, AnalyticsError> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return Err(AnalyticsError::Calibration(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    let rising = flo < 0.0;
    while (hi - lo) > BISECT_TOL * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl ChargeModel {
    /// Builds and calibrates the model with the default circuit constants.
    pub fn calibrated() -> Result<Self, AnalyticsError> {
        Self::calibrate(1.5, 0.75, 0.95, 64.0, 0.2, 0.0, ChargeAnchors::default())
    }

    pub fn calibrate(
        vdd: f64,
        v_ready_frac: f64,
        restore_frac: f64,
        retention_ms: f64,
        transfer_ratio: f64,
        t0_ns: f64,
        anchors: ChargeAnchors,
    ) -> Result<Self, AnalyticsError> {
        if !(0.5 < v_ready_frac && v_ready_frac < restore_frac && restore_frac <= 1.0) {
            return Err(AnalyticsError::BadModel(
                "need 0.5 < v_ready_frac < restore_frac <= 1".into(),
            ));
        }
        if !(vdd > 0.0 && retention_ms > 0.0 && transfer_ratio > 0.0 && transfer_ratio <= 1.0) {
            return Err(AnalyticsError::BadModel(
                "vdd, retention and transfer ratio must be positive".into(),
            ));
        }
        // a full cell must start below the ready level so that sensing takes time
        if transfer_ratio * 0.5 >= v_ready_frac - 0.5 {
            return Err(AnalyticsError::BadModel(
                "charge sharing alone reaches the ready level".into(),
            ));
        }
        let mut m = Self {
            vdd,
            v_ready_frac,
            restore_frac,
            retention_ms,
            transfer_ratio,
            t0_ns,
            tau_leak_ms: 1.0,
            tau_sense_ns: 1.0,
            anchors,
        };
        m.tau_sense_ns = bisect(1e-3, 1e3, |tau| {
            let probe = Self {
                tau_sense_ns: tau,
                ..m
            };
            probe.sense_unchecked(vdd) - anchors.full_sense_ns
        })?;
        m.tau_leak_ms = bisect(retention_ms * 1e-3, retention_ms * 1e4, |tau| {
            let probe = Self {
                tau_leak_ms: tau,
                ..m
            };
            probe.sense_unchecked(probe.voltage_unchecked(retention_ms))
                - anchors.retention_sense_ns
        })?;
        Ok(m)
    }

    fn voltage_unchecked(&self, t_ms: f64) -> f64 {
        self.vdd * (-t_ms / self.tau_leak_ms).exp()
    }

    fn sense_unchecked(&self, v: f64) -> f64 {
        let target = (self.v_ready_frac - 0.5) * self.vdd;
        let dv0 = self.transfer_ratio * (v - 0.5 * self.vdd);
        self.tau_sense_ns * (target / dv0).ln() + self.t0_ns
    }

    pub fn cell_voltage(&self, t_ms: f64) -> Result<f64, AnalyticsError> {
        if t_ms < 0.0 || t_ms.is_nan() {
            return Err(AnalyticsError::NegativeTime(t_ms));
        }
        Ok(self.voltage_unchecked(t_ms))
    }

    pub fn sensing_time(&self, v_cell: f64) -> Result<f64, AnalyticsError> {
        if v_cell <= 0.5 * self.vdd || v_cell.is_nan() {
            return Err(AnalyticsError::SensingFailure(v_cell));
        }
        Ok(self.sense_unchecked(v_cell))
    }

    /// Sensing time of a row `t_ms` after its last replenish.
    pub fn sensing_time_after(&self, t_ms: f64) -> Result<f64, AnalyticsError> {
        self.sensing_time(self.cell_voltage(t_ms)?)
    }

    /// Safe (tRCD, tRAS) reductions in ns for a row replenished `t_ms` ago.
    pub fn timing_reduction(&self, t_ms: f64) -> Result<(f64, f64), AnalyticsError> {
        let worst = self.sense_unchecked(self.voltage_unchecked(self.retention_ms));
        let a = self.anchors;
        let d_trcd = (worst - self.sensing_time_after(t_ms)?).clamp(0.0, a.max_trcd_reduction_ns);
        Ok((
            d_trcd,
            a.max_tras_reduction_ns * d_trcd / a.max_trcd_reduction_ns,
        ))
    }

    /// Compares configured cycle reductions against the analytic bound at
    /// `age_ms`; returns the shortfall description when they exceed it.
    pub fn check_deltas(
        &self,
        deltas: &ReducedDeltas,
        timing: &TimingParams,
        age_ms: f64,
    ) -> Result<Option<String>, AnalyticsError> {
        let (trcd_ns, tras_ns) = self.timing_reduction(age_ms)?;
        let p = timing.clock_period_ns;
        let want_trcd = deltas.trcd_delta as f64 * p;
        let want_tras = deltas.tras_delta as f64 * p;
        let eps = 1e-9;
        if want_trcd <= trcd_ns + eps && want_tras <= tras_ns + eps {
            return Ok(None);
        }
        Ok(Some(format!(
            "reduced timings ({} tRCD / {} tRAS cycles = {want_trcd:.3} / {want_tras:.3} ns) exceed the analytic \
             reduction at {age_ms} ms ({trcd_ns:.3} / {tras_ns:.3} ns)",
            deltas.trcd_delta, deltas.tras_delta
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverheadInput {
    pub cores: u64,
    pub channels: u64,
    pub entries: u64,
    pub ranks: u64,
    pub banks: u64,
    pub rows: u64,
    pub lru_bits_per_entry: u64,
}

impl Default for OverheadInput {
    fn default() -> Self {
        Self {
            cores: 8,
            channels: 2,
            entries: 128,
            ranks: 1,
            banks: 8,
            rows: 65536,
            lru_bits_per_entry: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverheadReport {
    pub entry_size_bits: u64,
    pub total_bits: u64,
    pub total_bytes: u64,
    pub bytes_per_core: u64,
}

fn log2_exact(field: &'static str, value: u64) -> Result<u64, AnalyticsError> {
    if value == 0 || !value.is_power_of_two() {
        return Err(AnalyticsError::NotPowerOfTwo { field, value });
    }
    Ok(u64::from(value.trailing_zeros()))
}

/// Bits per entry: row address (rank, bank, row) plus a valid bit. Totals
/// multiply by cores, channels and entries per table; bytes round up.
pub fn storage_overhead(input: &OverheadInput) -> Result<OverheadReport, AnalyticsError> {
    let entry_size_bits = log2_exact("ranks", input.ranks)?
        + log2_exact("banks", input.banks)?
        + log2_exact("rows", input.rows)?
        + 1;
    let per_core_bits =
        input.channels * input.entries * (entry_size_bits + input.lru_bits_per_entry);
    let total_bits = input.cores * per_core_bits;
    Ok(OverheadReport {
        entry_size_bits,
        total_bits,
        total_bytes: total_bits.div_ceil(8),
        bytes_per_core: per_core_bits.div_ceil(8),
    })
}

use std::collections::HashMap;

use crate::dram::{CommandKind, DramCommand};
use crate::error::Error;
use crate::policy::{hit_rate, HitRate};

/// Intervals reported by default, in milliseconds.
pub const DEFAULT_INTERVALS_MS: [f64; 9] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowEvent {
    Act,
    Pre,
}

/// A row identity: (channel, rank, bank, row).
pub type RowId = (u32, u32, u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowLogEntry {
    pub time: u64,
    pub row: RowId,
    pub event: RowEvent,
}

/// Extracts the ACT/PRE events of a command schedule.
pub fn activation_log(commands: &[DramCommand]) -> Vec<RowLogEntry> {
    commands
        .iter()
        .filter_map(|c| {
            let event = match c.kind {
                CommandKind::Act => RowEvent::Act,
                CommandKind::Pre => RowEvent::Pre,
                _ => return None,
            };
            let k = c.coord;
            Some(RowLogEntry {
                time: c.issue_time,
                row: (k.channel, k.rank, k.bank, k.row),
                event,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RltlCurve {
    pub intervals_ms: Vec<f64>,
    /// Activations whose previous same-row precharge lies within each interval.
    pub qualifying: Vec<u64>,
    pub total_activations: u64,
    /// Activations of rows precharged at least once before (the unbounded interval).
    pub reactivations: u64,
}

impl RltlCurve {
    pub fn fractions(&self) -> Vec<HitRate> {
        self.qualifying
            .iter()
            .map(|&q| hit_rate(q, self.total_activations))
            .collect()
    }

    pub fn unbounded_fraction(&self) -> HitRate {
        hit_rate(self.reactivations, self.total_activations)
    }

    /// CSV with one row per interval plus a final `inf` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("interval_ms,fraction,qualifying,total\n");
        for ((t, q), f) in self
            .intervals_ms
            .iter()
            .zip(&self.qualifying)
            .zip(self.fractions())
        {
            s.push_str(&format!("{t},{f},{q},{}\n", self.total_activations));
        }
        s.push_str(&format!(
            "inf,{},{},{}\n",
            self.unbounded_fraction(),
            self.reactivations,
            self.total_activations
        ));
        s
    }
}

/// Computes t-RLTL for each interval.
///
/// An activation of row r at time a qualifies for t when the most recent
/// earlier precharge of r happened at p with a - p <= t.
pub fn rltl(
    log: &[RowLogEntry],
    intervals_ms: &[f64],
    clock_period_ns: f64,
) -> Result<RltlCurve, Error> {
    let limits: Vec<u64> = intervals_ms
        .iter()
        .map(|t| (t * 1e6 / clock_period_ns).round() as u64)
        .collect();
    let mut qualifying = vec![0u64; limits.len()];
    let mut last_pre: HashMap<RowId, u64> = HashMap::new();
    let mut total = 0;
    let mut reactivations = 0;
    let mut previous = 0;
    for (index, e) in log.iter().enumerate() {
        if e.time < previous {
            return Err(Error::UnsortedLog {
                index,
                time: e.time,
                previous,
            });
        }
        previous = e.time;
        match e.event {
            RowEvent::Pre => {
                last_pre.insert(e.row, e.time);
            }
            RowEvent::Act => {
                total += 1;
                if let Some(&p) = last_pre.get(&e.row) {
                    reactivations += 1;
                    let gap = e.time - p;
                    for (q, &limit) in qualifying.iter_mut().zip(&limits) {
                        if gap <= limit {
                            *q += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(RltlCurve {
        intervals_ms: intervals_ms.to_vec(),
        qualifying,
        total_activations: total,
        reactivations,
    })
}

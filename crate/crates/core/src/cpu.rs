//! Trace-driven core: an in-order-retire instruction window fed from a
//! post-LLC trace, with an issue width and a cap on outstanding reads.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::trace::{AccessKind, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreConfig {
    pub issue_width: u32,
    pub window_entries: u32,
    pub mshrs: u32,
    /// Core cycles per memory cycle.
    pub clock_ratio: u32,
}

impl Default for CoreConfig {
    fn default() -> Self {
        Self {
            issue_width: 3,
            window_entries: 128,
            mshrs: 8,
            clock_ratio: 5,
        }
    }
}

impl CoreConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, v) in [
            ("core.issue_width", self.issue_width),
            ("core.window_entries", self.window_entries),
            ("core.mshrs", self.mshrs),
            ("core.clock_ratio", self.clock_ratio),
        ] {
            if v == 0 {
                return Err(ConfigError::NonPositive { field });
            }
        }
        Ok(())
    }
}

/// Result of handing a memory operation to the memory system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendOutcome {
    Rejected,
    Accepted,
    /// Accepted and already complete.
    Completed,
}

pub trait MemoryPort {
    fn send(&mut self, core: usize, kind: AccessKind, address: u64, token: u64) -> SendOutcome;
}

/// Memory that completes every access immediately.
#[derive(Debug, Default)]
pub struct InstantMemory;

impl MemoryPort for InstantMemory {
    fn send(&mut self, _: usize, _: AccessKind, _: u64, _: u64) -> SendOutcome {
        SendOutcome::Completed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    NonMem(u64),
    Read { token: u64, done: bool },
}

#[derive(Debug, Clone)]
pub struct Core {
    id: usize,
    config: CoreConfig,
    trace: Vec<TraceRecord>,
    cursor: usize,
    // non-memory instructions of the current record still to fetch
    pending_nonmem: u64,
    window: VecDeque<Slot>,
    occupancy: u64,
    outstanding_reads: u32,
    next_token: u64,
    retired: u64,
    retired_at_reset: u64,
    reset_cycle: u64,
    budget: u64,
    finish_cycle: Option<u64>,
    fetching: bool,
    reads_sent: u64,
    writes_sent: u64,
    stall_cycles: u64,
}

impl Core {
    /// `trace` must not be empty; it is replayed from the start when exhausted.
    pub fn new(id: usize, config: CoreConfig, trace: Vec<TraceRecord>, budget: u64) -> Self {
        assert!(
            !trace.is_empty(),
            "contract violation: empty trace for core {id}"
        );
        let pending_nonmem = trace[0].nonmem;
        Self {
            id,
            config,
            trace,
            cursor: 0,
            pending_nonmem,
            window: VecDeque::new(),
            occupancy: 0,
            outstanding_reads: 0,
            next_token: 0,
            retired: 0,
            retired_at_reset: 0,
            reset_cycle: 0,
            budget,
            finish_cycle: None,
            fetching: true,
            reads_sent: 0,
            writes_sent: 0,
            stall_cycles: 0,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Instructions retired since the last reset.
    pub fn retired(&self) -> u64 {
        self.retired - self.retired_at_reset
    }

    pub fn outstanding_reads(&self) -> u32 {
        self.outstanding_reads
    }

    pub fn window_occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn is_finished(&self) -> bool {
        self.finish_cycle.is_some()
    }

    /// Core cycles from the last reset until the budget was reached.
    pub fn measured_cycles(&self) -> Option<u64> {
        self.finish_cycle.map(|f| f - self.reset_cycle)
    }

    pub fn ipc(&self) -> Option<f64> {
        self.measured_cycles()
            .map(|c| self.budget as f64 / c as f64)
    }

    pub fn reads_sent(&self) -> u64 {
        self.reads_sent
    }

    pub fn writes_sent(&self) -> u64 {
        self.writes_sent
    }

    /// Cycles in which the oldest window entry was an incomplete read.
    pub fn stall_cycles(&self) -> u64 {
        self.stall_cycles
    }

    /// Starts the measured phase at core cycle `now`.
    pub fn reset_stats(&mut self, now: u64) {
        self.retired_at_reset = self.retired;
        self.reset_cycle = now;
        self.finish_cycle = None;
        self.reads_sent = 0;
        self.writes_sent = 0;
        self.stall_cycles = 0;
    }

    /// Stops taking new instructions from the trace.
    pub fn stop_fetch(&mut self) {
        self.fetching = false;
    }

    pub fn complete(&mut self, token: u64) {
        for slot in self.window.iter_mut() {
            if let Slot::Read { token: t, done } = slot {
                if *t == token {
                    assert!(!*done, "contract violation: read {token} completed twice");
                    *done = true;
                    self.outstanding_reads -= 1;
                    return;
                }
            }
        }
        panic!(
            "contract violation: completion for unknown read {token} on core {}",
            self.id
        );
    }

    fn advance_record(&mut self) {
        self.cursor += 1;
        if self.cursor == self.trace.len() {
            self.cursor = 0;
        }
        self.pending_nonmem = self.trace[self.cursor].nonmem;
    }

    fn push_nonmem(&mut self, n: u64) {
        if let Some(Slot::NonMem(k)) = self.window.back_mut() {
            *k += n;
        } else {
            self.window.push_back(Slot::NonMem(n));
        }
        self.occupancy += n;
    }

    fn fill(&mut self, port: &mut dyn MemoryPort) {
        let cap = u64::from(self.config.window_entries);
        let mut budget = u64::from(self.config.issue_width);
        while budget > 0 && self.occupancy < cap {
            if self.pending_nonmem > 0 {
                let n = self.pending_nonmem.min(budget).min(cap - self.occupancy);
                self.push_nonmem(n);
                self.pending_nonmem -= n;
                budget -= n;
                continue;
            }
            let rec = self.trace[self.cursor];
            match rec.kind {
                AccessKind::Read => {
                    if self.outstanding_reads >= self.config.mshrs {
                        return;
                    }
                    let token = self.next_token;
                    let done = match port.send(self.id, AccessKind::Read, rec.address, token) {
                        SendOutcome::Rejected => return,
                        SendOutcome::Accepted => {
                            self.outstanding_reads += 1;
                            false
                        }
                        SendOutcome::Completed => true,
                    };
                    self.next_token += 1;
                    self.reads_sent += 1;
                    self.window.push_back(Slot::Read { token, done });
                    self.occupancy += 1;
                    budget -= 1;
                }
                AccessKind::Write => {
                    if port.send(self.id, AccessKind::Write, rec.address, u64::MAX)
                        == SendOutcome::Rejected
                    {
                        return;
                    }
                    self.writes_sent += 1;
                }
            }
            self.advance_record();
        }
    }

    fn retire(&mut self) {
        let mut budget = u64::from(self.config.issue_width);
        while budget > 0 {
            match self.window.front_mut() {
                Some(Slot::NonMem(k)) => {
                    let n = (*k).min(budget);
                    *k -= n;
                    budget -= n;
                    self.retired += n;
                    self.occupancy -= n;
                    if *k == 0 {
                        self.window.pop_front();
                    }
                }
                Some(Slot::Read { done: true, .. }) => {
                    self.window.pop_front();
                    budget -= 1;
                    self.retired += 1;
                    self.occupancy -= 1;
                }
                Some(Slot::Read { done: false, .. }) => {
                    if budget == u64::from(self.config.issue_width) {
                        self.stall_cycles += 1;
                    }
                    return;
                }
                None => return,
            }
        }
    }

    /// One core cycle: fetch into the window, then retire.
    pub fn tick(&mut self, now: u64, port: &mut dyn MemoryPort) {
        if self.fetching {
            self.fill(port);
        }
        self.retire();
        if self.finish_cycle.is_none() && self.retired() >= self.budget {
            self.finish_cycle = Some(now + 1);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreMetrics {
    pub core: usize,
    pub instructions: u64,
    pub cycles: u64,
    pub ipc: f64,
    pub alone_ipc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub cores: Vec<CoreMetrics>,
    pub weighted_speedup: Option<f64>,
}

/// Per-core IPC and, given solo-run IPCs, weighted speedup.
pub fn compute_metrics(per_core: &[(u64, u64)], alone_ipcs: Option<&[f64]>) -> MetricsReport {
    let alone = alone_ipcs.filter(|a| {
        let ok = a.len() == per_core.len();
        if !ok {
            log::warn!(
                "solo-run IPCs for {} cores supplied for {} cores; weighted speedup omitted",
                a.len(),
                per_core.len()
            );
        }
        ok
    });
    let cores: Vec<CoreMetrics> = per_core
        .iter()
        .enumerate()
        .map(|(core, &(instructions, cycles))| CoreMetrics {
            core,
            instructions,
            cycles,
            ipc: instructions as f64 / cycles as f64,
            alone_ipc: alone.map(|a| a[core]),
        })
        .collect();
    let weighted_speedup = alone.map(|a| cores.iter().zip(a).map(|(c, al)| c.ipc / al).sum());
    MetricsReport {
        cores,
        weighted_speedup,
    }
}

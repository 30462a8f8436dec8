//! Per-channel memory controller: request queues, FR-FCFS command
//! selection, row-buffer policy and refresh.

mod mapping;
mod refresh;

pub use mapping::{encode_address, map_address};
pub use refresh::{RefreshState, RefreshUrgency, MAX_POSTPONE_INTERVALS, REFRESHES_PER_WINDOW};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dram::{
    apply_command, can_issue, BankState, BusTiming, CommandKind, DramCommand, DramCoord,
    DramGeometry, RankTiming, RankView, TimingSet,
};
use crate::energy::{CommandCounts, StateDurations};
use crate::error::ConfigError;
use crate::policy::{ActCounts, LatencyPolicy, PolicyStats};

/// Writes get priority once the write queue is more than this full.
pub const WRITE_DRAIN_PERCENT: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowPolicy {
    Open,
    Closed,
}

/// Row policy as written in a config file; `auto` picks open for one core
/// and closed for several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowPolicySetting {
    #[default]
    Auto,
    Open,
    Closed,
}

impl RowPolicySetting {
    pub fn resolve(self, cores: usize) -> RowPolicy {
        match self {
            RowPolicySetting::Open => RowPolicy::Open,
            RowPolicySetting::Closed => RowPolicy::Closed,
            RowPolicySetting::Auto if cores > 1 => RowPolicy::Closed,
            RowPolicySetting::Auto => RowPolicy::Open,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub row_policy: RowPolicySetting,
    /// Capacity of each of the read and write queues, per channel.
    pub queue_capacity: usize,
    pub refresh_enabled: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            row_policy: RowPolicySetting::Auto,
            queue_capacity: 64,
            refresh_enabled: true,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.queue_capacity == 0 {
            return Err(ConfigError::NonPositive {
                field: "controller.queue_capacity",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReqKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOutcome {
    Hit,
    Miss,
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemRequest {
    pub core_id: usize,
    pub kind: ReqKind,
    pub address: u64,
    pub coord: DramCoord,
    /// Opaque value handed back on completion (the core's sequence number).
    pub token: u64,
    pub arrive_time: u64,
    pub first_issue_time: Option<u64>,
}

impl MemRequest {
    pub fn new(
        core_id: usize,
        kind: ReqKind,
        address: u64,
        coord: DramCoord,
        token: u64,
        arrive_time: u64,
    ) -> Self {
        Self {
            core_id,
            kind,
            address,
            coord,
            token,
            arrive_time,
            first_issue_time: None,
        }
    }
}

/// A read whose data is back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub core_id: usize,
    pub token: u64,
    pub time: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelStats {
    pub acts_per_core: Vec<ActCounts>,
    pub commands: CommandCounts,
    pub row_hits: u64,
    pub row_misses: u64,
    pub row_conflicts: u64,
    pub reads_completed: u64,
    pub read_latency_sum: u64,
    pub writes_completed: u64,
    pub read_queue_hist: Vec<u64>,
    pub write_queue_hist: Vec<u64>,
    pub residency: StateDurations,
    pub cycles: u64,
}

impl ChannelStats {
    fn new(cores: usize, capacity: usize) -> Self {
        Self {
            acts_per_core: vec![ActCounts::default(); cores],
            read_queue_hist: vec![0; capacity + 1],
            write_queue_hist: vec![0; capacity + 1],
            ..Default::default()
        }
    }

    pub fn acts(&self) -> ActCounts {
        let mut a = ActCounts::default();
        for c in &self.acts_per_core {
            a.merge(c);
        }
        a
    }

    pub fn avg_read_latency(&self) -> Option<f64> {
        (self.reads_completed > 0)
            .then(|| self.read_latency_sum as f64 / self.reads_completed as f64)
    }

    pub fn merge(&mut self, o: &ChannelStats) {
        if self.acts_per_core.len() < o.acts_per_core.len() {
            self.acts_per_core
                .resize(o.acts_per_core.len(), ActCounts::default());
        }
        for (a, b) in self.acts_per_core.iter_mut().zip(&o.acts_per_core) {
            a.merge(b);
        }
        self.commands.merge(&o.commands);
        self.row_hits += o.row_hits;
        self.row_misses += o.row_misses;
        self.row_conflicts += o.row_conflicts;
        self.reads_completed += o.reads_completed;
        self.read_latency_sum += o.read_latency_sum;
        self.writes_completed += o.writes_completed;
        for (h, src) in [
            (&mut self.read_queue_hist, &o.read_queue_hist),
            (&mut self.write_queue_hist, &o.write_queue_hist),
        ] {
            if h.len() < src.len() {
                h.resize(src.len(), 0);
            }
            for (a, b) in h.iter_mut().zip(src) {
                *a += b;
            }
        }
        self.residency.active_cycles += o.residency.active_cycles;
        self.residency.precharged_cycles += o.residency.precharged_cycles;
        self.cycles = self.cycles.max(o.cycles);
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Queue {
    Read,
    Write,
}

/// One channel's controller and the DRAM state it drives.
pub struct Channel {
    id: u32,
    geometry: DramGeometry,
    timings: TimingSet,
    row_policy: RowPolicy,
    config: ControllerConfig,
    banks: Vec<BankState>,
    ranks: Vec<RankTiming>,
    refresh: Vec<RefreshState>,
    bus: BusTiming,
    read_q: Vec<MemRequest>,
    write_q: Vec<MemRequest>,
    auto_pre: Vec<bool>,
    policy: Box<dyn LatencyPolicy>,
    completions: VecDeque<Completion>,
    stats: ChannelStats,
    log: Option<Vec<DramCommand>>,
    cores: usize,
    // per-tick scratch: queued requests targeting each bank's open row
    open_row_demand: Vec<u32>,
}

impl Channel {
    pub fn new(
        id: u32,
        geometry: DramGeometry,
        timings: TimingSet,
        row_policy: RowPolicy,
        config: ControllerConfig,
        policy: Box<dyn LatencyPolicy>,
        cores: usize,
    ) -> Self {
        let banks = geometry.banks_per_channel();
        let ranks = geometry.ranks_per_channel as usize;
        Self {
            id,
            geometry,
            timings,
            row_policy,
            config,
            banks: vec![BankState::default(); banks],
            ranks: vec![RankTiming::default(); ranks],
            refresh: (0..ranks)
                .map(|_| RefreshState::new(geometry.rows_per_bank, timings.base()))
                .collect(),
            bus: BusTiming::default(),
            read_q: Vec::with_capacity(config.queue_capacity),
            write_q: Vec::with_capacity(config.queue_capacity),
            auto_pre: vec![false; banks],
            policy,
            completions: VecDeque::new(),
            stats: ChannelStats::new(cores, config.queue_capacity),
            log: None,
            cores,
            open_row_demand: vec![0; banks],
        }
    }

    pub fn record_commands(&mut self, enabled: bool) {
        self.log = enabled.then(Vec::new);
    }

    pub fn take_log(&mut self) -> Vec<DramCommand> {
        self.log.take().unwrap_or_default()
    }

    pub fn stats(&self) -> &ChannelStats {
        &self.stats
    }

    pub fn policy_stats(&self) -> PolicyStats {
        self.policy.stats()
    }

    pub fn banks(&self) -> &[BankState] {
        &self.banks
    }

    pub fn refresh_state(&self, rank: usize) -> &RefreshState {
        &self.refresh[rank]
    }

    pub fn reset_stats(&mut self) {
        self.stats = ChannelStats::new(self.cores, self.config.queue_capacity);
        self.policy.reset_stats();
    }

    pub fn queue_len(&self, kind: ReqKind) -> usize {
        match kind {
            ReqKind::Read => self.read_q.len(),
            ReqKind::Write => self.write_q.len(),
        }
    }

    pub fn can_accept(&self, kind: ReqKind) -> bool {
        self.queue_len(kind) < self.config.queue_capacity
    }

    /// Queues `req`, handing it back if the matching queue is full.
    pub fn enqueue(&mut self, req: MemRequest) -> Result<(), MemRequest> {
        if !self.can_accept(req.kind) {
            return Err(req);
        }
        match req.kind {
            ReqKind::Read => self.read_q.push(req),
            ReqKind::Write => self.write_q.push(req),
        }
        Ok(())
    }

    /// No queued requests, outstanding reads or pending auto-precharges.
    pub fn is_drained(&self) -> bool {
        self.read_q.is_empty()
            && self.write_q.is_empty()
            && self.completions.is_empty()
            && !self
                .auto_pre
                .iter()
                .zip(&self.banks)
                .any(|(&p, b)| p && b.is_open())
    }

    /// Moves every read completed by `now` into `out`.
    pub fn drain_completions(&mut self, now: u64, out: &mut Vec<Completion>) {
        while self.completions.front().is_some_and(|c| c.time <= now) {
            out.push(self.completions.pop_front().expect("checked"));
        }
    }

    fn rank_of_bank(&self, bank: usize) -> usize {
        bank / self.geometry.banks_per_rank as usize
    }

    fn bank_of(&self, coord: &DramCoord) -> usize {
        coord.bank_index(&self.geometry)
    }

    fn view(&self, rank: usize) -> RankView<'_> {
        let per = self.geometry.banks_per_rank as usize;
        RankView {
            banks: &self.banks[rank * per..(rank + 1) * per],
            rank: &self.ranks[rank],
            bus: &self.bus,
        }
    }

    fn issuable(&self, cmd: &DramCommand, now: u64) -> bool {
        can_issue(&self.view(cmd.coord.rank as usize), cmd, now, &self.timings)
    }

    fn column_cmd(req: &MemRequest, now: u64) -> DramCommand {
        let kind = match req.kind {
            ReqKind::Read => CommandKind::Rd,
            ReqKind::Write => CommandKind::Wr,
        };
        DramCommand::new(kind, req.coord, now)
    }

    fn queue(&self, q: Queue) -> &[MemRequest] {
        match q {
            Queue::Read => &self.read_q,
            Queue::Write => &self.write_q,
        }
    }

    fn queue_order(&self) -> [Queue; 2] {
        let drain = self.write_q.len() * 100 > self.config.queue_capacity * WRITE_DRAIN_PERCENT;
        if drain || self.read_q.is_empty() {
            [Queue::Write, Queue::Read]
        } else {
            [Queue::Read, Queue::Write]
        }
    }

    /// Advances one memory cycle and returns the command issued, if any.
    pub fn tick(&mut self, now: u64) -> Option<DramCommand> {
        if let Some(interval) = self.policy.sweep_interval() {
            if now > 0 && now % interval == 0 {
                self.policy.expire(now);
            }
        }
        self.account(now);
        let cmd = self.select(now)?;
        Some(cmd)
    }

    fn account(&mut self, _now: u64) {
        let s = &mut self.stats;
        s.cycles += 1;
        s.read_queue_hist[self.read_q.len()] += 1;
        s.write_queue_hist[self.write_q.len()] += 1;
        let per = self.geometry.banks_per_rank as usize;
        for r in 0..self.ranks.len() {
            if self.banks[r * per..(r + 1) * per]
                .iter()
                .any(|b| b.is_open())
            {
                s.residency.active_cycles += 1;
            } else {
                s.residency.precharged_cycles += 1;
            }
        }
    }

    fn select(&mut self, now: u64) -> Option<DramCommand> {
        let urgency: Vec<RefreshUrgency> = if self.config.refresh_enabled {
            self.refresh
                .iter()
                .map(|r| r.urgency(now, self.timings.base()))
                .collect()
        } else {
            vec![RefreshUrgency::Idle; self.ranks.len()]
        };

        // refresh
        for (rank, u) in urgency.iter().enumerate() {
            if *u == RefreshUrgency::Idle {
                continue;
            }
            let all_closed = !self.view(rank).banks.iter().any(|b| b.is_open());
            if let Some(cmd) = self.refresh[rank].refresh_due(self.id, rank as u32, all_closed, now)
            {
                if self.issuable(&cmd, now) {
                    return Some(self.issue(cmd, now, None));
                }
            }
        }

        let nothing_queued = self.read_q.is_empty() && self.write_q.is_empty();
        let any_closing =
            urgency.iter().any(|u| *u != RefreshUrgency::Idle) || self.auto_pre.iter().any(|&p| p);
        if nothing_queued && !any_closing {
            return None;
        }

        self.open_row_demand.iter_mut().for_each(|d| *d = 0);
        for req in self.read_q.iter().chain(&self.write_q) {
            let b = self.bank_of(&req.coord);
            if self.banks[b].open_row == Some(req.coord.row) {
                self.open_row_demand[b] += 1;
            }
        }

        let order = self.queue_order();

        // first ready: column commands to open rows, oldest first
        for q in order {
            for (idx, req) in self.queue(q).iter().enumerate() {
                if urgency[req.coord.rank as usize] == RefreshUrgency::Forced {
                    continue;
                }
                let b = self.bank_of(&req.coord);
                if self.banks[b].open_row != Some(req.coord.row) {
                    continue;
                }
                let cmd = Self::column_cmd(req, now);
                if self.issuable(&cmd, now) {
                    return Some(self.issue(cmd, now, Some((q, idx))));
                }
            }
        }

        // precharges owed to the row policy or to refresh
        for b in 0..self.banks.len() {
            let Some(row) = self.banks[b].open_row else {
                continue;
            };
            let rank = self.rank_of_bank(b);
            let closing = urgency[rank] != RefreshUrgency::Idle
                || (self.row_policy == RowPolicy::Closed && self.auto_pre[b]);
            if !closing {
                continue;
            }
            if urgency[rank] != RefreshUrgency::Forced && self.open_row_demand[b] > 0 {
                continue;
            }
            let coord = DramCoord {
                channel: self.id,
                rank: rank as u32,
                bank: (b % self.geometry.banks_per_rank as usize) as u32,
                row,
                column: 0,
            };
            let cmd = DramCommand::new(CommandKind::Pre, coord, now);
            if self.issuable(&cmd, now) {
                return Some(self.issue(cmd, now, None));
            }
        }

        // oldest request's next command
        for q in order {
            for (idx, req) in self.queue(q).iter().enumerate() {
                let rank = req.coord.rank as usize;
                let b = self.bank_of(&req.coord);
                let cmd = match self.banks[b].open_row {
                    Some(r) if r == req.coord.row => continue,
                    Some(r) => {
                        if self.open_row_demand[b] > 0 {
                            continue;
                        }
                        DramCommand::new(
                            CommandKind::Pre,
                            DramCoord {
                                row: r,
                                column: 0,
                                ..req.coord
                            },
                            now,
                        )
                    }
                    None => {
                        if urgency[rank] != RefreshUrgency::Idle {
                            continue;
                        }
                        DramCommand::new(
                            CommandKind::Act,
                            DramCoord {
                                column: 0,
                                ..req.coord
                            },
                            now,
                        )
                    }
                };
                if self.issuable(&cmd, now) {
                    return Some(self.issue(cmd, now, Some((q, idx))));
                }
            }
        }
        None
    }

    fn classify(&mut self, q: Queue, idx: usize, outcome: RowOutcome, now: u64) {
        let req = match q {
            Queue::Read => &mut self.read_q[idx],
            Queue::Write => &mut self.write_q[idx],
        };
        if req.first_issue_time.is_some() {
            return;
        }
        req.first_issue_time = Some(now);
        match outcome {
            RowOutcome::Hit => self.stats.row_hits += 1,
            RowOutcome::Miss => self.stats.row_misses += 1,
            RowOutcome::Conflict => self.stats.row_conflicts += 1,
        }
    }

    fn issue(
        &mut self,
        mut cmd: DramCommand,
        now: u64,
        req: Option<(Queue, usize)>,
    ) -> DramCommand {
        let b = self.bank_of(&cmd.coord);
        let rank = cmd.coord.rank as usize;
        match cmd.kind {
            CommandKind::Act => {
                let (q, idx) = req.expect("ACT is always on behalf of a request");
                let core = self.queue(q)[idx].core_id;
                let last_refresh = self.refresh[rank].last_refresh_of(cmd.coord.row);
                let class = self.policy.on_activate(core, cmd.coord, now, last_refresh);
                cmd.timing_class = class;
                self.banks[b].act_core = Some(core);
                self.stats.acts_per_core[core].record(class);
                self.stats.commands.record_act(class);
                self.classify(q, idx, RowOutcome::Miss, now);
            }
            CommandKind::Pre => {
                let core = self.banks[b].act_core.unwrap_or(0);
                self.policy.on_precharge(core, cmd.coord, now);
                self.auto_pre[b] = false;
                self.stats.commands.pre += 1;
                if let Some((q, idx)) = req {
                    self.classify(q, idx, RowOutcome::Conflict, now);
                }
            }
            CommandKind::Rd | CommandKind::Wr => {
                let (q, idx) = req.expect("column command is always on behalf of a request");
                self.classify(q, idx, RowOutcome::Hit, now);
                let done = match q {
                    Queue::Read => self.read_q.remove(idx),
                    Queue::Write => self.write_q.remove(idx),
                };
                let base = self.timings.base();
                if cmd.kind == CommandKind::Rd {
                    let t = now + base.tCL + base.tBL;
                    self.stats.commands.rd += 1;
                    self.stats.reads_completed += 1;
                    self.stats.read_latency_sum += t - done.arrive_time;
                    self.completions.push_back(Completion {
                        core_id: done.core_id,
                        token: done.token,
                        time: t,
                    });
                } else {
                    self.stats.commands.wr += 1;
                    self.stats.writes_completed += 1;
                }
                if self.row_policy == RowPolicy::Closed {
                    let same_row = self.read_q.iter().chain(&self.write_q).any(|r| {
                        r.coord.rank == cmd.coord.rank
                            && r.coord.bank == cmd.coord.bank
                            && r.coord.row == cmd.coord.row
                    });
                    self.auto_pre[b] = !same_row;
                }
            }
            CommandKind::Ref => {
                self.refresh[rank].on_refresh(now, self.timings.base());
                self.stats.commands.refresh += 1;
            }
        }
        if cmd.kind == CommandKind::Ref {
            let per = self.geometry.banks_per_rank as usize;
            for bank in &mut self.banks[rank * per..(rank + 1) * per] {
                *bank = apply_command(*bank, &cmd, now);
            }
        } else {
            self.banks[b] = apply_command(self.banks[b], &cmd, now);
        }
        self.ranks[rank].record(&cmd);
        self.bus.record(&cmd);
        if let Some(log) = &mut self.log {
            log.push(cmd);
        }
        cmd
    }
}

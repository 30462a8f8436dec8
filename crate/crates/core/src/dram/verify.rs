//! Independent replay of a DRAM command trace.
//!
//! Nothing here is shared with the controller: the replay keeps its own
//! bank/rank/channel records and re-derives every constraint from the raw
//! timing parameters, so a bug in the scheduler cannot hide itself.

use std::collections::HashMap;

use super::command::parse_command_trace;
use super::{CommandKind, DramCommand, DramGeometry, ReducedDeltas, TimingClass, TimingParams};
use crate::error::ParseError;

/// When is a reduced-latency activation allowed?
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetyRule {
    /// The row must have been precharged no more than `caching_duration`
    /// cycles before the ACT (inclusive).
    ChargeWindow { caching_duration: u64 },
    /// The row must have been refreshed no more than `window` cycles before.
    RefreshWindow { window: u64 },
    /// Either of the above.
    ChargeOrRefresh { caching_duration: u64, window: u64 },
    /// Idealized comparison point: reduced ACTs are never flagged.
    Unchecked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Timing,
    Safety,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Zero-based position in the command sequence.
    pub index: usize,
    /// Source line, when the trace came from text.
    pub line: Option<usize>,
    pub cycle: u64,
    pub kind: ViolationKind,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            ViolationKind::Timing => "timing",
            ViolationKind::Safety => "safety",
        };
        match self.line {
            Some(l) => write!(
                f,
                "line {l} (cycle {}): {kind}: {}",
                self.cycle, self.detail
            ),
            None => write!(
                f,
                "command {} (cycle {}): {kind}: {}",
                self.index, self.cycle, self.detail
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub commands: usize,
    pub act_standard: u64,
    pub act_reduced: u64,
    pub timing_violations: usize,
    pub safety_violations: usize,
    pub first_violation: Option<usize>,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn violation_count(&self) -> usize {
        self.timing_violations + self.safety_violations
    }

    pub fn is_clean(&self) -> bool {
        self.violation_count() == 0
    }
}

#[derive(Default, Clone, Copy)]
struct ReplayBank {
    open: Option<u32>,
    act_at: Option<u64>,
    act_reduced: bool,
    pre_at: Option<u64>,
    rd_at: Option<u64>,
    wr_at: Option<u64>,
}

#[derive(Default, Clone)]
struct ReplayRank {
    act_times: Vec<u64>,
    ref_at: Option<u64>,
    refreshes: u64,
}

#[derive(Default, Clone, Copy)]
struct ReplayChannel {
    last_cmd: Option<u64>,
    rd_at: Option<u64>,
    wr_at: Option<u64>,
}

struct Replay<'a> {
    geometry: &'a DramGeometry,
    std: TimingParams,
    red: TimingParams,
    rule: SafetyRule,
    banks: Vec<ReplayBank>,
    ranks: Vec<ReplayRank>,
    channels: Vec<ReplayChannel>,
    row_precharged_at: HashMap<(u32, u32, u32, u32), u64>,
    group_refreshed_at: HashMap<(u32, u32, u32), u64>,
    rows_per_refresh: u32,
    refresh_groups: u32,
    report: VerifyReport,
}

impl<'a> Replay<'a> {
    fn new(
        geometry: &'a DramGeometry,
        base: &TimingParams,
        deltas: ReducedDeltas,
        rule: SafetyRule,
    ) -> Self {
        let mut red = *base;
        red.tRCD = base.tRCD.saturating_sub(deltas.trcd_delta);
        red.tRAS = base.tRAS.saturating_sub(deltas.tras_delta);
        let ch = geometry.channels as usize;
        let rk = geometry.ranks_per_channel as usize;
        let rows_per_refresh = (geometry.rows_per_bank / 8192).max(1);
        Replay {
            geometry,
            std: *base,
            red,
            rule,
            banks: vec![ReplayBank::default(); ch * rk * geometry.banks_per_rank as usize],
            ranks: vec![ReplayRank::default(); ch * rk],
            channels: vec![ReplayChannel::default(); ch],
            row_precharged_at: HashMap::new(),
            group_refreshed_at: HashMap::new(),
            rows_per_refresh,
            refresh_groups: geometry.rows_per_bank / rows_per_refresh,
            report: VerifyReport::default(),
        }
    }

    fn flag(
        &mut self,
        index: usize,
        line: Option<usize>,
        cycle: u64,
        kind: ViolationKind,
        detail: String,
    ) {
        match kind {
            ViolationKind::Timing => self.report.timing_violations += 1,
            ViolationKind::Safety => self.report.safety_violations += 1,
        }
        self.report.first_violation.get_or_insert(index);
        self.report.violations.push(Violation {
            index,
            line,
            cycle,
            kind,
            detail,
        });
    }

    fn rank_idx(&self, c: &DramCommand) -> usize {
        (c.coord.channel * self.geometry.ranks_per_channel + c.coord.rank) as usize
    }

    fn bank_idx(&self, c: &DramCommand) -> usize {
        self.rank_idx(c) * self.geometry.banks_per_rank as usize + c.coord.bank as usize
    }

    fn step(&mut self, index: usize, line: Option<usize>, cmd: &DramCommand) {
        let now = cmd.issue_time;
        let std = self.std;
        let mut broken: Vec<String> = Vec::new();
        // (constraint name, previous event, minimum distance)
        let gap = |name: &str, prev: Option<u64>, min: u64| match prev {
            Some(p) if now < p + min => Some(format!("{name}: {} < {min}", now - p)),
            _ => None,
        };

        let ri = self.rank_idx(cmd);
        let bi = self.bank_idx(cmd);
        let ch = cmd.coord.channel as usize;
        let bank = self.banks[bi];
        let chan = self.channels[ch];
        let act_timing = if bank.act_reduced { self.red } else { std };

        match cmd.kind {
            CommandKind::Act => {
                if let Some(r) = bank.open {
                    broken.push(format!("ACT while row {r} open"));
                }
                broken.extend(gap("tRP", bank.pre_at, std.tRP));
                broken.extend(gap("tRC", bank.act_at, act_timing.tRAS + act_timing.tRP));
                let rank = &self.ranks[ri];
                broken.extend(gap("tRRD", rank.act_times.last().copied(), std.tRRD));
                if rank.act_times.len() >= 4 {
                    broken.extend(gap(
                        "tFAW",
                        Some(rank.act_times[rank.act_times.len() - 4]),
                        std.tFAW,
                    ));
                }
                broken.extend(gap("tRFC", rank.ref_at, std.tRFC));
            }
            CommandKind::Pre => {
                match bank.open {
                    None => broken.push("PRE to closed bank".into()),
                    Some(r) if r != cmd.coord.row => {
                        broken.push(format!("PRE names row {} but {r} open", cmd.coord.row))
                    }
                    _ => {}
                }
                broken.extend(gap("tRAS", bank.act_at, act_timing.tRAS));
                broken.extend(gap("tRTP", bank.rd_at, std.tRTP));
                broken.extend(gap("tWR", bank.wr_at, std.tCWL + std.tBL + std.tWR));
            }
            CommandKind::Rd | CommandKind::Wr => {
                if bank.open != Some(cmd.coord.row) {
                    broken.push(format!(
                        "column access to row {} with {:?} open",
                        cmd.coord.row, bank.open
                    ));
                }
                broken.extend(gap("tRCD", bank.act_at, act_timing.tRCD));
                if cmd.kind == CommandKind::Rd {
                    broken.extend(gap("tCCD", chan.rd_at, std.tCCD));
                    broken.extend(gap("tWTR", chan.wr_at, std.tCWL + std.tBL + std.tWTR));
                } else {
                    broken.extend(gap("tCCD", chan.wr_at, std.tCCD));
                    broken.extend(gap(
                        "tRTW",
                        chan.rd_at,
                        (std.tCL + std.tBL + 2).saturating_sub(std.tCWL),
                    ));
                }
            }
            CommandKind::Ref => {
                let per_rank = self.geometry.banks_per_rank as usize;
                let first = ri * per_rank;
                for b in &self.banks[first..first + per_rank] {
                    if b.open.is_some() {
                        broken.push("REF with open bank".into());
                    }
                    let t = if b.act_reduced { self.red } else { std };
                    broken.extend(gap("tRP", b.pre_at, std.tRP));
                    broken.extend(gap("tRC", b.act_at, t.tRAS + t.tRP));
                }
                broken.extend(gap("tRFC", self.ranks[ri].ref_at, std.tRFC));
            }
        }
        for detail in broken {
            self.flag(
                index,
                line,
                now,
                ViolationKind::Timing,
                format!("{} {detail}", cmd.kind.mnemonic()),
            );
        }

        if cmd.kind == CommandKind::Act {
            match cmd.timing_class {
                TimingClass::Standard => self.report.act_standard += 1,
                TimingClass::Reduced => {
                    self.report.act_reduced += 1;
                    if let Some(why) = self.unsafe_reduction(cmd) {
                        self.flag(index, line, now, ViolationKind::Safety, why);
                    }
                }
            }
        }

        self.commit(cmd, ri, bi, ch);
    }

    fn unsafe_reduction(&self, cmd: &DramCommand) -> Option<String> {
        let c = cmd.coord;
        let now = cmd.issue_time;
        let charged = |limit: u64| {
            self.row_precharged_at
                .get(&(c.channel, c.rank, c.bank, c.row))
                .is_some_and(|&p| now - p <= limit)
        };
        let refreshed = |limit: u64| {
            let group = c.row / self.rows_per_refresh;
            self.group_refreshed_at
                .get(&(c.channel, c.rank, group))
                .is_some_and(|&r| now - r <= limit)
        };
        let ok = match self.rule {
            SafetyRule::ChargeWindow { caching_duration } => charged(caching_duration),
            SafetyRule::RefreshWindow { window } => refreshed(window),
            SafetyRule::ChargeOrRefresh {
                caching_duration,
                window,
            } => charged(caching_duration) || refreshed(window),
            SafetyRule::Unchecked => true,
        };
        if ok {
            return None;
        }
        let last = self
            .row_precharged_at
            .get(&(c.channel, c.rank, c.bank, c.row));
        Some(match last {
            None => format!("reduced ACT of row {} with no prior precharge", c.row),
            Some(p) => format!(
                "reduced ACT of row {} {} cycles after its last precharge",
                c.row,
                now - p
            ),
        })
    }

    fn commit(&mut self, cmd: &DramCommand, ri: usize, bi: usize, ch: usize) {
        let now = cmd.issue_time;
        self.channels[ch].last_cmd = Some(now);
        match cmd.kind {
            CommandKind::Act => {
                let b = &mut self.banks[bi];
                b.open = Some(cmd.coord.row);
                b.act_at = Some(now);
                b.act_reduced = cmd.timing_class == TimingClass::Reduced;
                let acts = &mut self.ranks[ri].act_times;
                acts.push(now);
                if acts.len() > 4 {
                    acts.remove(0);
                }
            }
            CommandKind::Pre => {
                let b = &mut self.banks[bi];
                if let Some(row) = b.open.take() {
                    let c = cmd.coord;
                    self.row_precharged_at
                        .insert((c.channel, c.rank, c.bank, row), now);
                }
                b.pre_at = Some(now);
            }
            CommandKind::Rd => {
                self.banks[bi].rd_at = Some(now);
                self.channels[ch].rd_at = Some(now);
            }
            CommandKind::Wr => {
                self.banks[bi].wr_at = Some(now);
                self.channels[ch].wr_at = Some(now);
            }
            CommandKind::Ref => {
                let rank = &mut self.ranks[ri];
                let group = (rank.refreshes % self.refresh_groups as u64) as u32;
                rank.refreshes += 1;
                rank.ref_at = Some(now);
                self.group_refreshed_at
                    .insert((cmd.coord.channel, cmd.coord.rank, group), now);
            }
        }
    }
}

fn check_shape(
    cmds: &[(Option<usize>, DramCommand)],
    geometry: &DramGeometry,
) -> Result<(), ParseError> {
    let mut last: Vec<Option<u64>> = vec![None; geometry.channels as usize];
    for (i, (line, c)) in cmds.iter().enumerate() {
        let line_no = line.unwrap_or(i + 1);
        let k = c.coord;
        let in_range = k.channel < geometry.channels
            && k.rank < geometry.ranks_per_channel
            && k.bank < geometry.banks_per_rank
            && k.row < geometry.rows_per_bank
            && k.column < geometry.columns();
        if !in_range {
            return Err(ParseError::new(
                line_no,
                format!("coordinate outside geometry: {c}"),
            ));
        }
        let prev = &mut last[k.channel as usize];
        if let Some(p) = *prev {
            if c.issue_time <= p {
                return Err(ParseError::new(
                    line_no,
                    format!(
                        "channel {} time {} not after previous command at {p}",
                        k.channel, c.issue_time
                    ),
                ));
            }
        }
        *prev = Some(c.issue_time);
    }
    Ok(())
}

fn run(
    cmds: &[(Option<usize>, DramCommand)],
    geometry: &DramGeometry,
    base: &TimingParams,
    deltas: ReducedDeltas,
    rule: SafetyRule,
) -> Result<VerifyReport, ParseError> {
    check_shape(cmds, geometry)?;
    let mut replay = Replay::new(geometry, base, deltas, rule);
    for (i, (line, c)) in cmds.iter().enumerate() {
        replay.step(i, *line, c);
    }
    replay.report.commands = cmds.len();
    Ok(replay.report)
}

/// Replays `trace` and reports every timing and safety violation.
///
/// Commands must be strictly increasing in time per channel; a violation of
/// that, or a coordinate outside `geometry`, is reported as a parse error
/// whose line is the 1-based position in `trace`.
pub fn verify_command_trace(
    trace: &[DramCommand],
    geometry: &DramGeometry,
    base: &TimingParams,
    deltas: ReducedDeltas,
    rule: SafetyRule,
) -> Result<VerifyReport, ParseError> {
    let tagged: Vec<_> = trace.iter().map(|c| (None, *c)).collect();
    run(&tagged, geometry, base, deltas, rule)
}

/// Like [`verify_command_trace`] but reads the text format, reporting
/// source line numbers.
pub fn verify_trace_text(
    text: &str,
    geometry: &DramGeometry,
    base: &TimingParams,
    deltas: ReducedDeltas,
    rule: SafetyRule,
) -> Result<VerifyReport, ParseError> {
    let tagged: Vec<_> = parse_command_trace(text)?
        .into_iter()
        .map(|(line, c)| (Some(line), c))
        .collect();
    run(&tagged, geometry, base, deltas, rule)
}

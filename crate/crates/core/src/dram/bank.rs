use super::{CommandKind, DramCommand, TimingClass, TimingSet};

/// Coarse bank phase. `Activating` and `Precharging` are transient views
/// derived from timestamps; the stored state only toggles between
/// `Active` and `Precharged`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BankPhase {
    #[default]
    Precharged,
    Activating,
    Active,
    Precharging,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BankState {
    pub open_row: Option<u32>,
    pub state: BankPhase,
    pub last_act_time: Option<u64>,
    pub last_pre_time: Option<u64>,
    pub last_rd_time: Option<u64>,
    pub last_wr_time: Option<u64>,
    pub act_timing_class: TimingClass,
    /// Core whose request opened the current (or most recent) row.
    pub act_core: Option<usize>,
}

impl BankState {
    pub fn is_open(&self) -> bool {
        self.open_row.is_some()
    }

    /// Phase refined by elapsed time since the last ACT/PRE.
    pub fn phase(&self, now: u64, timings: &TimingSet) -> BankPhase {
        match (self.state, self.last_act_time, self.last_pre_time) {
            (BankPhase::Active, Some(act), _)
                if now < act + timings.for_class(self.act_timing_class).tRCD =>
            {
                BankPhase::Activating
            }
            (BankPhase::Precharged, _, Some(pre)) if now < pre + timings.base().tRP => {
                BankPhase::Precharging
            }
            (s, _, _) => s,
        }
    }
}

/// Rank-wide activation history and refresh bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RankTiming {
    /// Issue times of the most recent ACTs, newest last.
    recent_acts: [Option<u64>; 4],
    pub last_ref_time: Option<u64>,
}

impl RankTiming {
    pub fn last_act(&self) -> Option<u64> {
        self.recent_acts[3]
    }

    /// The ACT four activations back, which bounds the tFAW window.
    pub fn fourth_last_act(&self) -> Option<u64> {
        self.recent_acts[0]
    }

    pub fn record(&mut self, cmd: &DramCommand) {
        match cmd.kind {
            CommandKind::Act => {
                self.recent_acts.rotate_left(1);
                self.recent_acts[3] = Some(cmd.issue_time);
            }
            CommandKind::Ref => self.last_ref_time = Some(cmd.issue_time),
            _ => {}
        }
    }
}

/// Channel-wide column command history (data bus turnaround).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BusTiming {
    pub last_rd: Option<u64>,
    pub last_wr: Option<u64>,
}

impl BusTiming {
    pub fn record(&mut self, cmd: &DramCommand) {
        match cmd.kind {
            CommandKind::Rd => self.last_rd = Some(cmd.issue_time),
            CommandKind::Wr => self.last_wr = Some(cmd.issue_time),
            _ => {}
        }
    }
}

/// Everything `can_issue` needs to see around the target bank.
#[derive(Debug, Clone, Copy)]
pub struct RankView<'a> {
    /// Banks of the command's rank, indexed by bank number.
    pub banks: &'a [BankState],
    pub rank: &'a RankTiming,
    pub bus: &'a BusTiming,
}

fn after(t: Option<u64>, delay: u64) -> u64 {
    t.map_or(0, |t| t + delay)
}

/// Earliest cycle at which `cmd` satisfies every timing constraint, or
/// `None` if the bank state makes it illegal regardless of time.
///
/// tRCD and tRAS come from the timing class of the bank's current
/// activation; everything else comes from the standard set.
pub fn earliest_issue(view: &RankView<'_>, cmd: &DramCommand, timings: &TimingSet) -> Option<u64> {
    let base = timings.base();
    let bank = view.banks.get(cmd.coord.bank as usize)?;
    let refresh_done = after(view.rank.last_ref_time, base.tRFC);
    match cmd.kind {
        CommandKind::Act => {
            if bank.is_open() {
                return None;
            }
            let prev = timings.for_class(bank.act_timing_class);
            let mut t = after(bank.last_pre_time, base.tRP)
                .max(after(bank.last_act_time, prev.trc()))
                .max(after(view.rank.last_act(), base.tRRD))
                .max(refresh_done);
            if let Some(fourth) = view.rank.fourth_last_act() {
                t = t.max(fourth + base.tFAW);
            }
            Some(t)
        }
        CommandKind::Pre => {
            bank.open_row?;
            let eff = timings.for_class(bank.act_timing_class);
            Some(
                after(bank.last_act_time, eff.tRAS)
                    .max(after(bank.last_rd_time, base.tRTP))
                    .max(after(bank.last_wr_time, base.write_data_end() + base.tWR)),
            )
        }
        CommandKind::Rd | CommandKind::Wr => {
            if bank.open_row != Some(cmd.coord.row) {
                return None;
            }
            let eff = timings.for_class(bank.act_timing_class);
            let t = after(bank.last_act_time, eff.tRCD);
            let bus = if cmd.kind == CommandKind::Rd {
                after(view.bus.last_rd, base.tCCD)
                    .max(after(view.bus.last_wr, base.write_data_end() + base.tWTR))
            } else {
                after(view.bus.last_wr, base.tCCD)
                    .max(after(view.bus.last_rd, base.read_to_write()))
            };
            Some(t.max(bus))
        }
        CommandKind::Ref => {
            let mut t = refresh_done;
            for b in view.banks {
                if b.is_open() {
                    return None;
                }
                t = t.max(after(b.last_pre_time, base.tRP)).max(after(
                    b.last_act_time,
                    timings.for_class(b.act_timing_class).trc(),
                ));
            }
            Some(t)
        }
    }
}

/// True iff `cmd` may be issued at `now`.
pub fn can_issue(view: &RankView<'_>, cmd: &DramCommand, now: u64, timings: &TimingSet) -> bool {
    earliest_issue(view, cmd, timings).is_some_and(|t| t <= now)
}

/// Applies `cmd` to `bank`, returning the successor state.
///
/// # Panics
///
/// On an illegal FSM transition (e.g. RD to a precharged bank). The caller
/// must have checked [`can_issue`] first.
pub fn apply_command(bank: BankState, cmd: &DramCommand, now: u64) -> BankState {
    let mut next = bank;
    match cmd.kind {
        CommandKind::Act => {
            assert!(
                !bank.is_open(),
                "contract violation at cycle {now}: ACT row {} to bank with row {:?} open",
                cmd.coord.row,
                bank.open_row
            );
            next.open_row = Some(cmd.coord.row);
            next.state = BankPhase::Active;
            next.last_act_time = Some(now);
            next.act_timing_class = cmd.timing_class;
        }
        CommandKind::Pre => {
            assert!(
                bank.is_open(),
                "contract violation at cycle {now}: PRE to precharged bank"
            );
            next.open_row = None;
            next.state = BankPhase::Precharged;
            next.last_pre_time = Some(now);
        }
        CommandKind::Rd | CommandKind::Wr => {
            assert!(
                bank.open_row == Some(cmd.coord.row),
                "contract violation at cycle {now}: {} row {} with open row {:?}",
                cmd.kind.mnemonic(),
                cmd.coord.row,
                bank.open_row
            );
            if cmd.kind == CommandKind::Rd {
                next.last_rd_time = Some(now);
            } else {
                next.last_wr_time = Some(now);
            }
        }
        CommandKind::Ref => {
            assert!(
                !bank.is_open(),
                "contract violation at cycle {now}: REF with open bank"
            );
        }
    }
    next
}

use crate::dram::{CommandKind, DramCommand, DramCoord, TimingParams};

/// Refresh commands per retention period (64ms at tREFI = 7.8us).
pub const REFRESHES_PER_WINDOW: u32 = 8192;

/// Late refreshes are tolerated up to this many tREFI before open banks
/// are forcibly closed.
pub const MAX_POSTPONE_INTERVALS: u64 = 4;

/// Per-rank all-bank refresh bookkeeping.
#[derive(Debug, Clone)]
pub struct RefreshState {
    next_due: u64,
    pointer: u32,
    rows_per_ref: u32,
    rows_per_bank: u32,
    /// Last refresh time per group of `rows_per_ref` rows.
    group_times: Vec<Option<u64>>,
    refreshes: u64,
}

/// What the scheduler should do about refresh on this cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefreshUrgency {
    Idle,
    /// Deadline reached: stop opening rows, close idle banks.
    Pending,
    /// Postponed too long: close every bank now.
    Forced,
}

impl RefreshState {
    pub fn new(rows_per_bank: u32, timings: &TimingParams) -> Self {
        let rows_per_ref = (rows_per_bank / REFRESHES_PER_WINDOW).max(1);
        Self {
            next_due: timings.tREFI,
            pointer: 0,
            rows_per_ref,
            rows_per_bank,
            group_times: vec![None; (rows_per_bank / rows_per_ref) as usize],
            refreshes: 0,
        }
    }

    pub fn pointer(&self) -> u32 {
        self.pointer
    }

    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    pub fn next_due(&self) -> u64 {
        self.next_due
    }

    pub fn urgency(&self, now: u64, timings: &TimingParams) -> RefreshUrgency {
        if now < self.next_due {
            RefreshUrgency::Idle
        } else if now >= self.next_due + MAX_POSTPONE_INTERVALS * timings.tREFI {
            RefreshUrgency::Forced
        } else {
            RefreshUrgency::Pending
        }
    }

    /// The REF this rank owes at `now`, provided every bank is precharged.
    pub fn refresh_due(
        &self,
        channel: u32,
        rank: u32,
        all_precharged: bool,
        now: u64,
    ) -> Option<DramCommand> {
        (now >= self.next_due && all_precharged).then(|| {
            DramCommand::new(
                CommandKind::Ref,
                DramCoord::new(channel, rank, 0, 0, 0),
                now,
            )
        })
    }

    /// Records an issued REF: advances the deadline by one interval and the
    /// row pointer by one group.
    pub fn on_refresh(&mut self, now: u64, timings: &TimingParams) {
        let group = (self.pointer / self.rows_per_ref) as usize;
        self.group_times[group] = Some(now);
        self.pointer = (self.pointer + self.rows_per_ref) % self.rows_per_bank;
        self.next_due += timings.tREFI;
        self.refreshes += 1;
    }

    pub fn last_refresh_of(&self, row: u32) -> Option<u64> {
        self.group_times[(row / self.rows_per_ref) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn due_at_interval_when_precharged() {
        let t = TimingParams::default();
        let r = RefreshState::new(65536, &t);
        assert!(r.refresh_due(0, 0, true, t.tREFI - 1).is_none());
        let cmd = r.refresh_due(0, 0, true, t.tREFI).unwrap();
        assert_eq!(cmd.kind, CommandKind::Ref);
        assert!(r.refresh_due(0, 0, false, t.tREFI).is_none());
    }

    #[test]
    fn pointer_wraps_after_full_window() {
        let t = TimingParams::default();
        let mut r = RefreshState::new(65536, &t);
        for i in 0..REFRESHES_PER_WINDOW as u64 {
            assert_eq!(r.pointer(), (i as u32 * 8) % 65536);
            r.on_refresh((i + 1) * t.tREFI, &t);
        }
        assert_eq!(r.pointer(), 0);
        // 8192 intervals of 7.8us cover the 64ms retention period
        let span_ms = REFRESHES_PER_WINDOW as f64 * t.tREFI as f64 * t.clock_period_ns / 1e6;
        assert!((span_ms - 63.8976).abs() < 1e-9);
    }

    #[test]
    fn small_banks_refresh_one_row_per_command() {
        let t = TimingParams::default();
        let mut r = RefreshState::new(1024, &t);
        for i in 0..1024u64 {
            r.on_refresh(i, &t);
        }
        assert_eq!(r.pointer(), 0);
        assert_eq!(r.last_refresh_of(7), Some(7));
    }

    #[test]
    fn urgency_escalates() {
        let t = TimingParams::default();
        let r = RefreshState::new(65536, &t);
        assert_eq!(r.urgency(0, &t), RefreshUrgency::Idle);
        assert_eq!(r.urgency(t.tREFI, &t), RefreshUrgency::Pending);
        assert_eq!(r.urgency(5 * t.tREFI, &t), RefreshUrgency::Forced);
    }

    #[test]
    fn tracks_group_refresh_times() {
        let t = TimingParams::default();
        let mut r = RefreshState::new(65536, &t);
        assert_eq!(r.last_refresh_of(3), None);
        r.on_refresh(6240, &t);
        assert_eq!(r.last_refresh_of(3), Some(6240));
        assert_eq!(r.last_refresh_of(8), None);
    }
}

//! Classification-only replay: feed the ACT/PRE stream of an existing
//! command schedule through an HCRAC and count would-be hits, without
//! letting the classification change the schedule.

use super::{HcracParams, HcracTable, Lookup, RowTag};
use crate::dram::{CommandKind, DramCommand, DramGeometry};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplayCounts {
    pub activations: u64,
    pub hits: u64,
}

/// Counts HCRAC hits over `commands` with one table per channel.
///
/// Commands must be sorted by issue time. Periodic invalidation runs at the
/// same cycle boundaries the simulator uses (multiples of the sweep
/// interval, before any command of that cycle).
pub fn classify_replay(
    commands: &[DramCommand],
    geometry: &DramGeometry,
    params: HcracParams,
) -> ReplayCounts {
    let mut tables: Vec<HcracTable> = (0..geometry.channels)
        .map(|_| HcracTable::new(params.entries, params.ways, params.caching_duration))
        .collect();
    let interval = params.sweep_interval();
    let mut swept_until = 0u64;
    let mut counts = ReplayCounts::default();
    let mut open: Vec<Option<u32>> =
        vec![None; geometry.channels as usize * geometry.banks_per_channel()];

    for cmd in commands {
        let due = cmd.issue_time / interval * interval;
        if due > swept_until {
            for t in &mut tables {
                t.expire(due);
            }
            swept_until = due;
        }
        let c = cmd.coord;
        let bank = c.channel as usize * geometry.banks_per_channel() + c.bank_index(geometry);
        let table = &mut tables[c.channel as usize];
        match cmd.kind {
            CommandKind::Act => {
                counts.activations += 1;
                if table.lookup(
                    RowTag {
                        rank: c.rank,
                        bank: c.bank,
                        row: c.row,
                    },
                    cmd.issue_time,
                ) == Lookup::Hit
                {
                    counts.hits += 1;
                }
                open[bank] = Some(c.row);
            }
            CommandKind::Pre => {
                if let Some(row) = open[bank].take() {
                    table.insert(
                        RowTag {
                            rank: c.rank,
                            bank: c.bank,
                            row,
                        },
                        cmd.issue_time,
                    );
                }
            }
            _ => {}
        }
    }
    counts
}

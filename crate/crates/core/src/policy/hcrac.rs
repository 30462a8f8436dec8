//! Set-associative table of recently precharged rows.

/// Row identity inside one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RowTag {
    pub rank: u32,
    pub bank: u32,
    pub row: u32,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HcracEntry {
    pub tag: RowTag,
    pub valid: bool,
    pub inserted_at: u64,
    /// Recency stamp; larger is more recent.
    last_touch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Tag was already resident; its timestamp was refreshed.
    Refreshed,
    /// Placed in an invalid way.
    Filled,
    /// Displaced the least recently used entry.
    Evicted(RowTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Miss,
    /// A matching entry existed but was older than the caching duration;
    /// it has been invalidated.
    Expired,
}

#[derive(Debug, Clone)]
pub struct HcracTable {
    sets: usize,
    ways: usize,
    entries: Vec<HcracEntry>,
    caching_duration: u64,
    clock: u64,
    valid: usize,
}

impl HcracTable {
    /// `entries` and `ways` must be powers of two with `ways <= entries`.
    pub fn new(entries: usize, ways: usize, caching_duration: u64) -> Self {
        assert!(
            ways >= 1 && entries >= ways,
            "hcrac needs 1 <= ways <= entries"
        );
        let sets = entries / ways;
        assert!(
            sets.is_power_of_two(),
            "hcrac set count must be a power of two"
        );
        Self {
            sets,
            ways,
            entries: vec![HcracEntry::default(); sets * ways],
            caching_duration,
            clock: 0,
            valid: 0,
        }
    }

    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn ways(&self) -> usize {
        self.ways
    }

    pub fn valid_entries(&self) -> usize {
        self.valid
    }

    pub fn caching_duration(&self) -> u64 {
        self.caching_duration
    }

    /// Low bits of `row XOR bank`.
    pub fn set_index(&self, tag: &RowTag) -> usize {
        ((tag.row ^ tag.bank) as usize) & (self.sets - 1)
    }

    fn set_mut(&mut self, tag: &RowTag) -> &mut [HcracEntry] {
        let s = self.set_index(tag);
        &mut self.entries[s * self.ways..(s + 1) * self.ways]
    }

    /// Valid entries of the set `tag` maps to, most recent first.
    pub fn set_contents(&self, tag: &RowTag) -> Vec<HcracEntry> {
        let s = self.set_index(tag);
        let mut v: Vec<_> = self.entries[s * self.ways..(s + 1) * self.ways]
            .iter()
            .filter(|e| e.valid)
            .copied()
            .collect();
        v.sort_by(|a, b| b.last_touch.cmp(&a.last_touch));
        v
    }

    pub fn insert(&mut self, tag: RowTag, now: u64) -> InsertOutcome {
        self.clock += 1;
        let stamp = self.clock;
        let set = self.set_mut(&tag);
        if let Some(e) = set.iter_mut().find(|e| e.valid && e.tag == tag) {
            e.inserted_at = now;
            e.last_touch = stamp;
            return InsertOutcome::Refreshed;
        }
        let slot = match set.iter().position(|e| !e.valid) {
            Some(free) => free,
            None => set
                .iter()
                .enumerate()
                .min_by_key(|(_, e)| e.last_touch)
                .map(|(i, _)| i)
                .expect("non-empty set"),
        };
        let old = set[slot];
        set[slot] = HcracEntry {
            tag,
            valid: true,
            inserted_at: now,
            last_touch: stamp,
        };
        if old.valid {
            InsertOutcome::Evicted(old.tag)
        } else {
            self.valid += 1;
            InsertOutcome::Filled
        }
    }

    /// Hit iff a valid entry matches and `now - inserted_at <= caching_duration`.
    pub fn lookup(&mut self, tag: RowTag, now: u64) -> Lookup {
        self.clock += 1;
        let stamp = self.clock;
        let duration = self.caching_duration;
        let set = self.set_mut(&tag);
        let Some(e) = set.iter_mut().find(|e| e.valid && e.tag == tag) else {
            return Lookup::Miss;
        };
        if now.saturating_sub(e.inserted_at) <= duration {
            e.last_touch = stamp;
            Lookup::Hit
        } else {
            e.valid = false;
            self.valid -= 1;
            Lookup::Expired
        }
    }

    /// Invalidates every entry older than the caching duration.
    pub fn expire(&mut self, now: u64) -> usize {
        if self.valid == 0 {
            return 0;
        }
        let duration = self.caching_duration;
        let mut n = 0;
        for e in self.entries.iter_mut().filter(|e| e.valid) {
            if now.saturating_sub(e.inserted_at) > duration {
                e.valid = false;
                n += 1;
            }
        }
        self.valid -= n;
        n
    }
}

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use super::{AccessKind, TraceRecord};
use crate::controller::encode_address;
use crate::dram::{DramCoord, DramGeometry};
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Alternates between two rows of one bank.
    BankPingPong,
    /// Touches every (bank, row) at most once.
    RowStream,
    UniformRandom,
    Zipf,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 4] = [
        SyntheticKind::BankPingPong,
        SyntheticKind::RowStream,
        SyntheticKind::UniformRandom,
        SyntheticKind::Zipf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::BankPingPong => "ping-pong",
            SyntheticKind::RowStream => "row-stream",
            SyntheticKind::UniformRandom => "uniform",
            SyntheticKind::Zipf => "zipf",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ping-pong" | "pingpong" | "bank-ping-pong" => Ok(SyntheticKind::BankPingPong),
            "row-stream" | "stream" => Ok(SyntheticKind::RowStream),
            "uniform" | "uniform-random" => Ok(SyntheticKind::UniformRandom),
            "zipf" => Ok(SyntheticKind::Zipf),
            other => Err(ConfigError::Invalid(format!(
                "unknown trace kind `{other}` (expected ping-pong, row-stream, uniform or zipf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub kind: SyntheticKind,
    pub requests: usize,
    /// The two rows a ping-pong trace alternates between.
    pub ping_pong_rows: (u32, u32),
    /// Row population for the random kinds, starting at `first_row`.
    pub rows: u32,
    pub first_row: u32,
    /// Requests go to banks `bank .. bank + banks` of `channel`, rank 0.
    pub bank: u32,
    pub banks: u32,
    pub channel: u32,
    pub nonmem: u64,
    pub write_fraction: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
    pub geometry: DramGeometry,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            kind: SyntheticKind::BankPingPong,
            requests: 1000,
            ping_pong_rows: (5, 9),
            rows: 1024,
            first_row: 0,
            bank: 0,
            banks: 1,
            channel: 0,
            nonmem: 10,
            write_fraction: 0.0,
            zipf_exponent: 1.0,
            seed: 1,
            geometry: DramGeometry::default(),
        }
    }
}

impl GenParams {
    pub fn new(kind: SyntheticKind, requests: usize) -> Self {
        Self {
            kind,
            requests,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.geometry;
        g.validate()?;
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.channel >= g.channels {
            return bad(format!(
                "channel {} outside {} channels",
                self.channel, g.channels
            ));
        }
        if self.banks == 0 || self.bank + self.banks > g.banks_per_rank {
            return bad(format!(
                "banks {}..{} outside {} banks",
                self.bank,
                self.bank + self.banks,
                g.banks_per_rank
            ));
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return bad(format!(
                "write fraction {} outside [0, 1]",
                self.write_fraction
            ));
        }
        match self.kind {
            SyntheticKind::BankPingPong => {
                let (a, b) = self.ping_pong_rows;
                if a == b || a >= g.rows_per_bank || b >= g.rows_per_bank {
                    return bad(format!(
                        "ping-pong rows ({a}, {b}) must be distinct rows of the bank"
                    ));
                }
            }
            SyntheticKind::RowStream => {
                let avail = u64::from(g.rows_per_bank - self.first_row.min(g.rows_per_bank))
                    * u64::from(self.banks);
                if self.requests as u64 > avail {
                    return bad(format!(
                        "row stream of {} requests needs more than {avail} distinct rows",
                        self.requests
                    ));
                }
            }
            SyntheticKind::UniformRandom | SyntheticKind::Zipf => {
                if self.rows == 0
                    || u64::from(self.first_row) + u64::from(self.rows) > u64::from(g.rows_per_bank)
                {
                    return bad(format!(
                        "rows {}+{} outside {} rows",
                        self.first_row, self.rows, g.rows_per_bank
                    ));
                }
                if self.kind == SyntheticKind::Zipf
                    && !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0)
                {
                    return bad(format!(
                        "zipf exponent {} must be finite and >= 0",
                        self.zipf_exponent
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Generates a synthetic trace; identical parameters give identical output.
pub fn gen_synthetic(p: &GenParams) -> Result<Vec<TraceRecord>, ConfigError> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let zipf = match p.kind {
        SyntheticKind::Zipf => Some(
            Zipf::new(f64::from(p.rows), p.zipf_exponent)
                .map_err(|e| ConfigError::Invalid(format!("zipf: {e}")))?,
        ),
        _ => None,
    };
    let columns = p.geometry.columns();
    let mut out = Vec::with_capacity(p.requests);
    for i in 0..p.requests {
        let (bank, row, column) = match p.kind {
            SyntheticKind::BankPingPong => {
                let (a, b) = p.ping_pong_rows;
                (p.bank, if i % 2 == 0 { a } else { b }, 0)
            }
            SyntheticKind::RowStream => {
                let i = i as u32;
                (p.bank + i % p.banks, p.first_row + i / p.banks, 0)
            }
            SyntheticKind::UniformRandom => {
                let bank = p.bank + rng.random_range(0..p.banks);
                (
                    bank,
                    p.first_row + rng.random_range(0..p.rows),
                    rng.random_range(0..columns),
                )
            }
            SyntheticKind::Zipf => {
                let bank = p.bank + rng.random_range(0..p.banks);
                let rank = zipf.as_ref().expect("built above").sample(&mut rng) as u32;
                (bank, p.first_row + rank - 1, rng.random_range(0..columns))
            }
        };
        let kind = if p.write_fraction > 0.0 && rng.random_bool(p.write_fraction) {
            AccessKind::Write
        } else {
            AccessKind::Read
        };
        let coord = DramCoord::new(p.channel, 0, bank, row, column);
        let address =
            encode_address(&coord, &p.geometry).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        out.push(TraceRecord::new(p.nonmem, address, kind));
    }
    Ok(out)
}

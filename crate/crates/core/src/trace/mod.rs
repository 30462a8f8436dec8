//! CPU trace format, synthetic trace generators and the row-level temporal
//! locality analyzer.
//!
//! A trace line is `<nonmem> <address> <R|W>`: the number of non-memory
//! instructions preceding one last-level-cache miss (R) or writeback (W) at
//! the given hexadecimal physical address. Traces are post-LLC.

mod gen;
mod rltl;

pub use gen::{gen_synthetic, GenParams, SyntheticKind};
pub use rltl::{activation_log, rltl, RltlCurve, RowEvent, RowLogEntry, DEFAULT_INTERVALS_MS};

use std::fmt;

use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

impl AccessKind {
    pub fn symbol(self) -> char {
        match self {
            AccessKind::Read => 'R',
            AccessKind::Write => 'W',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    pub nonmem: u64,
    pub address: u64,
    pub kind: AccessKind,
}

impl TraceRecord {
    pub fn new(nonmem: u64, address: u64, kind: AccessKind) -> Self {
        Self {
            nonmem,
            address,
            kind,
        }
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let mut it = line.split_whitespace();
        let (Some(n), Some(a), Some(k), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(ParseError::new(
                line_no,
                format!("expected `<nonmem> <address> <R|W>`, got `{line}`"),
            ));
        };
        let nonmem = n.parse::<u64>().map_err(|_| {
            ParseError::new(line_no, format!("bad non-memory instruction count `{n}`"))
        })?;
        let digits = a
            .strip_prefix("0x")
            .or_else(|| a.strip_prefix("0X"))
            .unwrap_or(a);
        let address = u64::from_str_radix(digits, 16)
            .map_err(|_| ParseError::new(line_no, format!("bad hex address `{a}`")))?;
        let kind = match k {
            "R" | "r" => AccessKind::Read,
            "W" | "w" => AccessKind::Write,
            _ => {
                return Err(ParseError::new(
                    line_no,
                    format!("access kind must be R or W, got `{k}`"),
                ))
            }
        };
        Ok(Self {
            nonmem,
            address,
            kind,
        })
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:#x} {}",
            self.nonmem,
            self.address,
            self.kind.symbol()
        )
    }
}

/// Parses a whole trace, skipping blank lines and `#` comments.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, ParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| TraceRecord::parse_line(l, i + 1))
        .collect()
}

pub fn serialize_trace(records: &[TraceRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 20);
    for r in records {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_examples() {
        assert_eq!(
            TraceRecord::parse_line("5 0x7f001040 R", 1).unwrap(),
            TraceRecord::new(5, 0x7f00_1040, AccessKind::Read)
        );
        assert_eq!(
            TraceRecord::parse_line("0 0x0 W", 1).unwrap(),
            TraceRecord::new(0, 0, AccessKind::Write)
        );
    }

    #[test]
    fn reports_line_numbers() {
        let e = parse_trace("# header\n1 0x40 R\n\nx 0x10 R\n").unwrap_err();
        assert_eq!(e.line, 4);
        assert_eq!(parse_trace("1 0xzz R").unwrap_err().line, 1);
        assert!(parse_trace("1 0x10 X").is_err());
        assert!(parse_trace("1 0x10").is_err());
        assert!(parse_trace("1 0x10 R extra").is_err());
        assert!(parse_trace("-1 0x10 R").is_err());
    }

    #[test]
    fn empty_input() {
        assert!(parse_trace("").unwrap().is_empty());
        assert!(parse_trace("\n# only a comment\n").unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(recs in prop::collection::vec((0u64..1_000_000, any::<u64>(), any::<bool>()), 0..64)) {
            let records: Vec<TraceRecord> = recs
                .into_iter()
                .map(|(n, a, w)| TraceRecord::new(n, a, if w { AccessKind::Write } else { AccessKind::Read }))
                .collect();
            let text = serialize_trace(&records);
            prop_assert_eq!(parse_trace(&text).unwrap(), records);
        }
    }
}

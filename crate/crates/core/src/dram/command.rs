use std::fmt;
use std::str::FromStr;

use super::{DramCoord, TimingClass};
use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommandKind {
    Act,
    Pre,
    Rd,
    Wr,
    Ref,
}

impl CommandKind {
    pub fn mnemonic(self) -> &'static str {
        match self {
            CommandKind::Act => "ACT",
            CommandKind::Pre => "PRE",
            CommandKind::Rd => "RD",
            CommandKind::Wr => "WR",
            CommandKind::Ref => "REF",
        }
    }

    pub fn is_column(self) -> bool {
        matches!(self, CommandKind::Rd | CommandKind::Wr)
    }
}

impl FromStr for CommandKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ACT" => Ok(CommandKind::Act),
            "PRE" => Ok(CommandKind::Pre),
            "RD" => Ok(CommandKind::Rd),
            "WR" => Ok(CommandKind::Wr),
            "REF" => Ok(CommandKind::Ref),
            other => Err(format!("unknown command kind `{other}`")),
        }
    }
}

/// One command placed on a channel's command bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DramCommand {
    pub kind: CommandKind,
    pub coord: DramCoord,
    pub issue_time: u64,
    /// Only meaningful for ACT; always `Standard` elsewhere.
    pub timing_class: TimingClass,
}

impl DramCommand {
    pub fn new(kind: CommandKind, coord: DramCoord, issue_time: u64) -> Self {
        Self {
            kind,
            coord,
            issue_time,
            timing_class: TimingClass::Standard,
        }
    }

    pub fn with_class(mut self, class: TimingClass) -> Self {
        self.timing_class = class;
        self
    }

    /// Parses one command-trace line. `line_no` is used only for error reporting.
    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, ParseError> {
        let err = |m: String| ParseError::new(line_no, m);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", fields.len())));
        }
        let num = |idx: usize, name: &str| -> Result<u64, ParseError> {
            fields[idx]
                .parse::<u64>()
                .map_err(|_| err(format!("bad {name} `{}`", fields[idx])))
        };
        let opt = |idx: usize, name: &str| -> Result<Option<u64>, ParseError> {
            if fields[idx] == "-" {
                Ok(None)
            } else {
                num(idx, name).map(Some)
            }
        };
        let issue_time = num(0, "cycle")?;
        let kind: CommandKind = fields[1].parse().map_err(err)?;
        let small = |v: u64, name: &str| -> Result<u32, ParseError> {
            u32::try_from(v).map_err(|_| err(format!("{name} {v} out of range")))
        };
        let channel = small(num(2, "channel")?, "channel")?;
        let rank = small(num(3, "rank")?, "rank")?;
        let bank = match opt(4, "bank")? {
            Some(b) => small(b, "bank")?,
            None => 0,
        };
        let row = opt(5, "row")?;
        let col = opt(6, "column")?;
        let class = match fields[7] {
            "S" => TimingClass::Standard,
            "R" => TimingClass::Reduced,
            other => return Err(err(format!("bad timing class `{other}`"))),
        };
        let needs_row = !matches!(kind, CommandKind::Ref);
        let row = match (needs_row, row) {
            (true, Some(r)) => small(r, "row")?,
            (true, None) => return Err(err(format!("{} requires a row", kind.mnemonic()))),
            (false, _) => 0,
        };
        let column = match (kind.is_column(), col) {
            (true, Some(c)) => small(c, "column")?,
            (true, None) => return Err(err(format!("{} requires a column", kind.mnemonic()))),
            (false, _) => 0,
        };
        if class == TimingClass::Reduced && kind != CommandKind::Act {
            return Err(err("only ACT may carry the reduced timing class".into()));
        }
        Ok(DramCommand {
            kind,
            coord: DramCoord {
                channel,
                rank,
                bank,
                row,
                column,
            },
            issue_time,
            timing_class: class,
        })
    }
}

impl fmt::Display for DramCommand {
    /// `<cycle> <kind> <channel> <rank> <bank> <row|-> <col|-> <S|R>`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.coord;
        write!(
            f,
            "{} {} {} {} {} ",
            self.issue_time,
            self.kind.mnemonic(),
            c.channel,
            c.rank,
            c.bank
        )?;
        match self.kind {
            CommandKind::Ref => write!(f, "- - ")?,
            CommandKind::Act | CommandKind::Pre => write!(f, "{} - ", c.row)?,
            CommandKind::Rd | CommandKind::Wr => write!(f, "{} {} ", c.row, c.column)?,
        }
        write!(f, "{}", self.timing_class.symbol())
    }
}

/// Parses a whole command trace; blank lines and `#` comments are skipped.
pub fn parse_command_trace(text: &str) -> Result<Vec<(usize, DramCommand)>, ParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push((idx + 1, DramCommand::parse_line(line, idx + 1)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_each_kind() {
        let c = DramCoord::new(1, 0, 3, 42, 7);
        let act = DramCommand::new(CommandKind::Act, c, 100).with_class(TimingClass::Reduced);
        assert_eq!(act.to_string(), "100 ACT 1 0 3 42 - R");
        assert_eq!(
            DramCommand::new(CommandKind::Rd, c, 107).to_string(),
            "107 RD 1 0 3 42 7 S"
        );
        assert_eq!(
            DramCommand::new(CommandKind::Pre, c, 128).to_string(),
            "128 PRE 1 0 3 42 - S"
        );
        let r = DramCommand::new(CommandKind::Ref, DramCoord::new(1, 0, 0, 0, 0), 6240);
        assert_eq!(r.to_string(), "6240 REF 1 0 0 - - S");
    }

    #[test]
    fn parse_inverts_display() {
        let c = DramCoord::new(0, 0, 5, 9, 3);
        for cmd in [
            DramCommand::new(CommandKind::Act, DramCoord { column: 0, ..c }, 1)
                .with_class(TimingClass::Reduced),
            DramCommand::new(CommandKind::Wr, c, 9),
            DramCommand::new(CommandKind::Pre, DramCoord { column: 0, ..c }, 30),
            DramCommand::new(CommandKind::Ref, DramCoord::default(), 6240),
        ] {
            assert_eq!(DramCommand::parse_line(&cmd.to_string(), 1).unwrap(), cmd);
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "0 ACT 0 0 0 5 - S\n\n# c\n12 RD 0 0 0 5 - S\n";
        let e = parse_command_trace(text).unwrap_err();
        assert_eq!(e.line, 4);
        assert!(DramCommand::parse_line("5 FOO 0 0 0 1 - S", 1).is_err());
        assert!(DramCommand::parse_line("5 RD 0 0 0 1 2 R", 1).is_err());
        assert!(DramCommand::parse_line("x ACT 0 0 0 1 - S", 1).is_err());
    }
}

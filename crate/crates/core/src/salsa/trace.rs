use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Initialise,
    DropStep,
    Simplify,
    Exchange,
    Improve,
    SelectR,
}

/// What a trace entry did to the knot set. Candidate indices refer to the
/// legal knot set; `r` values are 0-based indices into the range sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KnotAction {
    Start { knots: Vec<usize> },
    Drop { candidate: usize },
    Remove { candidate: usize },
    Move { from: usize, to: usize },
    Add { candidate: usize, r: usize },
    SetR { candidate: usize, from: usize, to: usize },
    /// The step found no strictly improving proposal.
    NoChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub outer: usize,
    pub step: StepKind,
    pub action: KnotAction,
    pub before: f64,
    pub after: f64,
    /// Criterion-governed acceptance. Forced drop-step removals are logged
    /// with `accepted = false` because they need not improve the criterion.
    pub accepted: bool,
    pub n_knots: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SalsaTrace {
    pub entries: Vec<TraceEntry>,
}

impl SalsaTrace {
    pub fn push(&mut self, entry: TraceEntry) {
        self.entries.push(entry);
    }

    pub fn accepted(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(|e| e.accepted)
    }

    /// True when every accepted action strictly lowered the criterion.
    pub fn is_monotone(&self) -> bool {
        self.accepted().all(|e| e.after < e.before)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.entries {
            let line = serde_json::to_string(e).map_err(|err| Error::Parse {
                context: "trace".into(),
                message: err.to_string(),
            })?;
            writeln!(out, "{line}").map_err(|source| Error::Io { path: "<trace>".into(), source })?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let e = serde_json::from_str(line).map_err(|err| Error::Parse {
                context: format!("trace line {}", i + 1),
                message: err.to_string(),
            })?;
            entries.push(e);
        }
        Ok(SalsaTrace { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let mut t = SalsaTrace::default();
        t.push(TraceEntry {
            outer: 0,
            step: StepKind::Exchange,
            action: KnotAction::Move { from: 3, to: 9 },
            before: 10.0,
            after: 9.5,
            accepted: true,
            n_knots: 4,
        });
        t.push(TraceEntry {
            outer: 0,
            step: StepKind::Improve,
            action: KnotAction::NoChange,
            before: 9.5,
            after: 9.5,
            accepted: false,
            n_knots: 4,
        });
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"kind\":\"move\""));
        assert_eq!(SalsaTrace::read_jsonl(&text).unwrap(), t);
        assert!(t.is_monotone());
    }
}

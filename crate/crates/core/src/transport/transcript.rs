use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One delivered message. `bytes` counts payload only; framing is excluded.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Record {
    pub round: u64,
    pub from: u8,
    pub to: u8,
    pub bytes: u64,
    pub tag: String,
}

/// Measured (rounds, bytes) over a transcript or a slice of it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasuredCost {
    pub rounds: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    records: Vec<Record>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Union of per-party views, one record per `(round, from, to)`, in
    /// canonical order.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a Transcript>) -> Transcript {
        let mut by_edge: BTreeMap<(u64, u8, u8), Record> = BTreeMap::new();
        for t in parts {
            for r in &t.records {
                by_edge.entry((r.round, r.from, r.to)).or_insert_with(|| r.clone());
            }
        }
        Transcript {
            records: by_edge.into_values().collect(),
        }
    }

    /// Records whose round index lies in `[start, end)`.
    pub fn rounds_between(&self, start: u64, end: u64) -> Transcript {
        Transcript {
            records: self
                .records
                .iter()
                .filter(|r| r.round >= start && r.round < end)
                .cloned()
                .collect(),
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.records.iter().map(|r| r.bytes).sum()
    }

    /// Bytes carried on one directed edge.
    pub fn edge_bytes(&self, from: u8, to: u8) -> u64 {
        self.records
            .iter()
            .filter(|r| r.from == from && r.to == to)
            .map(|r| r.bytes)
            .sum()
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("JSON is UTF-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Transcript> {
        let mut records = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line)?);
        }
        Ok(Transcript { records })
    }
}

/// Distinct rounds and summed payload bytes, optionally restricted to
/// records whose tag starts with `tag` (so `matmul` covers `matmul-open`).
pub fn measured_cost(transcript: &Transcript, tag: Option<&str>) -> MeasuredCost {
    let mut rounds = BTreeSet::new();
    let mut bytes = 0;
    for r in transcript.records() {
        if tag.is_some_and(|t| !r.tag.starts_with(t)) {
            continue;
        }
        rounds.insert(r.round);
        bytes += r.bytes;
    }
    MeasuredCost {
        rounds: rounds.len() as u64,
        bytes,
    }
}

//! JSONL encoding of the event log and its ground-truth sidecar.
//!
//! `events.jsonl` holds one observable event per line with exactly the
//! fields `step`, `source`, `signature_id`, `magnitude`. The sidecar holds the
//! matching label on the same line number.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::types::GroundTruth;

pub fn read_jsonl<T, R>(r: R) -> io::Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Per-window ground truth, as written to `labels.jsonl`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowLabel {
    pub step: u64,
    #[serde(flatten)]
    pub label: GroundTruth,
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

//! Line-oriented text form of an [`EventStream`].
//!
//! ```text
//! # photonlink-events v1
//! # seeds=2004
//! # config_sha256=<hex>
//! # config=<json>
//! time_ns<TAB>detector<TAB>origin
//! 0.8172393<TAB>bob<TAB>dark
//! ```
//!
//! Times are written with the shortest representation that parses back to the
//! same `f64`, so reading a file reproduces the stream bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::config::config_hash;
use crate::sim::{DetectionEvent, EventStream, SimConfig};

pub const MAGIC: &str = "# photonlink-events v1";
const COLUMNS: &str = "time_ns\tdetector\torigin";

#[derive(Debug, Error)]
pub enum EventsIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("config hash mismatch: header says {expected}, config hashes to {actual}")]
    HashMismatch { expected: String, actual: String },
}

pub fn write_events<W: Write>(stream: &EventStream, mut out: W) -> Result<(), EventsIoError> {
    let seeds: Vec<String> = stream.seeds.iter().map(u64::to_string).collect();
    let json = serde_json::to_string(&stream.config).expect("config serializes");
    let mut buf = String::with_capacity(64 + 32 * stream.events.len());
    let _ = writeln!(buf, "{MAGIC}");
    let _ = writeln!(buf, "# seeds={}", seeds.join(","));
    let _ = writeln!(buf, "# config_sha256={}", config_hash(&stream.config));
    let _ = writeln!(buf, "# config={json}");
    let _ = writeln!(buf, "{COLUMNS}");
    for e in &stream.events {
        let _ = writeln!(
            buf,
            "{}\t{}\t{}",
            e.time_ns,
            e.detector.as_str(),
            e.origin.as_str()
        );
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn events_to_string(stream: &EventStream) -> String {
    let mut buf = Vec::new();
    write_events(stream, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_events<R: BufRead>(input: R) -> Result<EventStream, EventsIoError> {
    let mut seeds = None;
    let mut hash = None;
    let mut config: Option<SimConfig> = None;
    let mut events = Vec::new();
    let mut in_body = false;

    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        let bad = |reason: String| EventsIoError::Format { line: n, reason };
        if n == 1 {
            if line != MAGIC {
                return Err(bad("not a photonlink event file".into()));
            }
            continue;
        }
        if !in_body {
            if line == COLUMNS {
                in_body = true;
            } else if let Some(v) = line.strip_prefix("# seeds=") {
                let parsed: Result<Vec<u64>, _> = v.split(',').map(str::parse).collect();
                seeds = Some(parsed.map_err(|e| bad(format!("seeds: {e}")))?);
            } else if let Some(v) = line.strip_prefix("# config_sha256=") {
                hash = Some(v.to_string());
            } else if let Some(v) = line.strip_prefix("# config=") {
                config = Some(serde_json::from_str(v).map_err(|e| bad(format!("config: {e}")))?);
            } else {
                return Err(bad(format!("unexpected header line `{line}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let (Some(t), Some(d), Some(o), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(bad("expected 3 tab-separated fields".into()));
        };
        events.push(DetectionEvent {
            time_ns: t.parse().map_err(|e| bad(format!("time: {e}")))?,
            detector: d.parse().map_err(bad)?,
            origin: o.parse().map_err(bad)?,
        });
    }

    let missing = |what: &str| EventsIoError::Format {
        line: 0,
        reason: format!("missing {what}"),
    };
    if !in_body {
        return Err(missing("column header"));
    }
    let config = config.ok_or_else(|| missing("config"))?;
    let seeds = seeds.ok_or_else(|| missing("seeds"))?;
    if let Some(expected) = hash {
        let actual = config_hash(&config);
        if actual != expected {
            return Err(EventsIoError::HashMismatch { expected, actual });
        }
    }
    Ok(EventStream {
        config,
        seeds,
        events,
    })
}

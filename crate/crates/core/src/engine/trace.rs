use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, JobId};
use crate::rational::TimeValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Release,
    Start,
    Preempt,
    Complete,
    MarkPartial,
    Morph,
    SigmaUpdate,
    Snapshot,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::Release => "release",
            EventKind::Start => "start",
            EventKind::Preempt => "preempt",
            EventKind::Complete => "complete",
            EventKind::MarkPartial => "mark_partial",
            EventKind::Morph => "morph",
            EventKind::SigmaUpdate => "sigma_update",
            EventKind::Snapshot => "snapshot",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: TimeValue,
    pub kind: EventKind,
    pub job: Option<JobId>,
    pub tag: Option<String>,
}

impl TraceEvent {
    pub fn new(time: TimeValue, kind: EventKind, job: Option<JobId>, tag: Option<String>) -> Self {
        TraceEvent { time, kind, job, tag }
    }
}

#[derive(Serialize, Deserialize)]
struct EventLine {
    t: String,
    kind: EventKind,
    job: Option<JobId>,
    tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scheduler: String,
    pub seed: u64,
    pub instance_hash: String,
}

/// Complete record of one simulation: every event plus the realized instance
/// (true processing times fixed, adaptive oracles resolved).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scheduler: String,
    pub seed: u64,
    pub instance: Instance,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            scheduler: self.scheduler.clone(),
            seed: self.seed,
            instance_hash: self.instance.content_hash(),
        }
    }

    pub fn end_time(&self) -> TimeValue {
        self.events.last().map(|e| e.time.clone()).unwrap_or_default()
    }

    /// Distinct event times in increasing order.
    pub fn event_times(&self) -> Vec<TimeValue> {
        let mut times: Vec<TimeValue> = Vec::new();
        for e in &self.events {
            if times.last() != Some(&e.time) {
                times.push(e.time.clone());
            }
        }
        times
    }

    pub fn has_marks(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::MarkPartial)
    }

    /// JSON Lines: a header object, then one object per event.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header())?;
        out.write_all(b"\n")?;
        for e in &self.events {
            let line = EventLine {
                t: e.time.to_fraction_string(),
                kind: e.kind,
                job: e.job,
                tag: e.tag.clone(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parse a JSON Lines trace. The realized instance is not part of the
    /// file; the caller supplies it and its hash must match the header.
    pub fn read_jsonl<R: BufRead>(input: R, instance: Instance) -> Result<Trace> {
        let mut lines = input.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::MalformedTrace("empty trace file".into()))??;
        let header: TraceHeader = serde_json::from_str(&header_line)?;
        if header.instance_hash != instance.content_hash() {
            return Err(Error::MismatchedInstances);
        }
        let mut events = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: EventLine = serde_json::from_str(&line)?;
            events.push(TraceEvent { time: ev.t.parse()?, kind: ev.kind, job: ev.job, tag: ev.tag });
        }
        Ok(Trace { scheduler: header.scheduler, seed: header.seed, instance, events })
    }
}

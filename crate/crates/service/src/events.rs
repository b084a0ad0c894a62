//! Append-only JSON-lines event log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use acgrade_core::sheet::ScanPage;
use acgrade_core::{Assignment, BookletId, Comment, Exam, GraderId, TaskId};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::lifecycle::ExamState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Event {
    ExamUploaded { exam: Box<Exam> },
    StateChanged { from: ExamState, to: ExamState },
    BatchIngested { pages: Vec<ScanPage> },
    AssignmentRecorded { assignment: Assignment },
    CommentAdded { booklet_id: BookletId, task_id: TaskId, comment: Comment },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub actor: GraderId,
    #[serde(flatten)]
    pub event: Event,
}

pub const LOG_FILE: &str = "events.jsonl";

pub struct EventLog {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl EventLog {
    /// Opens (creating if needed) the log in `dir` and returns it with every
    /// record already written.
    pub fn open(dir: &Path) -> Result<(EventLog, Vec<EventRecord>), ServiceError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let records = if path.exists() { read_records(&path)? } else { Vec::new() };
        if path.exists() {
            drop_torn_tail(&path)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let next_seq = records.last().map_or(1, |r| r.seq + 1);
        Ok((EventLog { path, file, next_seq }, records))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one record and flushes it to disk before returning.
    pub fn append(&mut self, timestamp: DateTime<Utc>, actor: &GraderId, event: Event) -> Result<EventRecord, ServiceError> {
        let record = EventRecord { seq: self.next_seq, timestamp, actor: actor.clone(), event };
        let mut line = serde_json::to_string(&record).map_err(std::io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.next_seq += 1;
        Ok(record)
    }
}

/// Cuts an unterminated last line so later appends start on a fresh line.
fn drop_torn_tail(path: &Path) -> Result<(), ServiceError> {
    let bytes = std::fs::read(path)?;
    if bytes.last().is_some_and(|b| *b != b'\n') {
        let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    }
    Ok(())
}

/// Reads all records, checking that sequence numbers increase. A final line
/// without a newline is a write torn by a crash and is ignored.
pub fn read_records(path: &Path) -> Result<Vec<EventRecord>, ServiceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records: Vec<EventRecord> = Vec::new();
    let mut lines = reader.split(b'\n').peekable();
    let complete = std::fs::read(path)?.last().is_none_or(|b| *b == b'\n');
    let mut number = 0;
    while let Some(line) = lines.next() {
        number += 1;
        let line = line?;
        if lines.peek().is_none() && !complete {
            break;
        }
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let record: EventRecord = serde_json::from_slice(&line)
            .map_err(|e| ServiceError::CorruptLog { line: number, message: e.to_string() })?;
        if let Some(prev) = records.last() {
            if record.seq <= prev.seq {
                return Err(ServiceError::CorruptLog {
                    line: number,
                    message: format!("sequence {} does not follow {}", record.seq, prev.seq),
                });
            }
        }
        records.push(record);
    }
    Ok(records)
}

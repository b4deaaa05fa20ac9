//! Command logs and deterministic replay.
//!
//! A log is newline-delimited JSON. An optional first line `{"config": ...}`
//! pins the service configuration; every other line is an entry stamped with
//! the tick at which it was applied:
//!
//! ```text
//! {"tick":0,"command":{"seq":1,"verb":"home"}}
//! {"tick":812,"register_write":{"addr":40,"values":[2]}}
//! ```
//!
//! An entry with tick `n` is applied after `n` control ticks have elapsed.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ServiceConfig;
use crate::control::{Ack, CommandMessage, ControlService, RegisterError, TelemetryFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogEvent {
    Command(CommandMessage),
    RegisterWrite { addr: u16, values: Vec<u16> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub tick: u64,
    #[serde(flatten)]
    pub event: LogEvent,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ServiceConfig,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: tick {tick} is earlier than the previous entry")]
    OutOfOrder { line: usize, tick: u64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandLog {
    pub config: Option<ServiceConfig>,
    pub entries: Vec<LogEntry>,
}

impl CommandLog {
    pub fn read(reader: impl BufRead) -> Result<Self, ReplayError> {
        let mut log = CommandLog::default();
        let mut last = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |e: serde_json::Error| ReplayError::Parse { line: n, message: e.to_string() };
            if log.entries.is_empty() && log.config.is_none() && line.trim_start().starts_with("{\"config\"") {
                let h: Header = serde_json::from_str(&line).map_err(err)?;
                h.config.validate().map_err(|e| ReplayError::Parse { line: n, message: e.to_string() })?;
                log.config = Some(h.config);
                continue;
            }
            let entry: LogEntry = serde_json::from_str(&line).map_err(err)?;
            if entry.tick < last {
                return Err(ReplayError::OutOfOrder { line: n, tick: entry.tick });
            }
            last = entry.tick;
            log.entries.push(entry);
        }
        Ok(log)
    }

    pub fn parse(text: &str) -> Result<Self, ReplayError> {
        Self::read(text.as_bytes())
    }

    pub fn write(&self, mut out: impl Write) -> io::Result<()> {
        if let Some(config) = &self.config {
            let h = Header { config: config.clone() };
            writeln!(out, "{}", serde_json::to_string(&h).expect("serialisable"))?;
        }
        for e in &self.entries {
            writeln!(out, "{}", serde_json::to_string(e).expect("serialisable"))?;
        }
        Ok(())
    }

    pub fn push_command(&mut self, tick: u64, msg: CommandMessage) {
        self.entries.push(LogEntry { tick, event: LogEvent::Command(msg) });
    }

    pub fn push_register_write(&mut self, tick: u64, addr: u16, values: Vec<u16>) {
        self.entries.push(LogEntry { tick, event: LogEvent::RegisterWrite { addr, values } });
    }
}

/// One line of replay output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayRecord {
    Ack { tick: u64, ack: Ack },
    RegisterWrite { tick: u64, addr: u16, error: Option<RegisterError>, ack: Option<Ack> },
    Frame(TelemetryFrame),
}

impl ReplayRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("serialisable")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayOptions {
    /// Emit every n-th frame.
    pub frame_every: u64,
    /// Ticks allowed after the last entry for running motions to finish.
    pub settle_ticks: u64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions { frame_every: 1, settle_ticks: 1_000_000 }
    }
}

/// Applies one logged event to a running service.
pub fn apply_event(svc: &mut ControlService, tick: u64, event: &LogEvent) -> ReplayRecord {
    match event {
        LogEvent::Command(msg) => ReplayRecord::Ack { tick, ack: svc.handle_message(msg) },
        LogEvent::RegisterWrite { addr, values } => match svc.write_registers(*addr, values) {
            Ok(ack) => ReplayRecord::RegisterWrite { tick, addr: *addr, error: None, ack },
            Err(e) => ReplayRecord::RegisterWrite { tick, addr: *addr, error: Some(e), ack: None },
        },
    }
}

/// Replays `log` on a fresh service and hands every record to `sink`.
/// Returns the final service state.
pub fn replay_with(
    config: ServiceConfig,
    log: &CommandLog,
    opts: ReplayOptions,
    mut sink: impl FnMut(&ReplayRecord),
) -> ControlService {
    let every = opts.frame_every.max(1);
    let mut svc = ControlService::new(config);
    let step = |svc: &mut ControlService, sink: &mut dyn FnMut(&ReplayRecord)| {
        let frame = svc.step();
        if frame.tick % every == 0 {
            sink(&ReplayRecord::Frame(frame.clone()));
        }
    };
    for entry in &log.entries {
        while svc.frame().tick < entry.tick {
            step(&mut svc, &mut sink);
        }
        sink(&apply_event(&mut svc, entry.tick, &entry.event));
    }
    let mut n = 0;
    while !svc.is_idle() && n < opts.settle_ticks {
        step(&mut svc, &mut sink);
        n += 1;
    }
    svc
}

/// Replays `log` and writes the records as NDJSON.
pub fn replay_to_writer(
    config: ServiceConfig,
    log: &CommandLog,
    opts: ReplayOptions,
    mut out: impl Write,
) -> io::Result<ControlService> {
    let mut result = Ok(());
    let svc = replay_with(config, log, opts, |rec| {
        if result.is_ok() {
            result = writeln!(out, "{}", rec.to_line());
        }
    });
    result.map(|()| svc)
}

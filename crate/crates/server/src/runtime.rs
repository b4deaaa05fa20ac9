//! The real-time loop. A dedicated thread owns the [`ControlService`]; every
//! other party talks to it through an ordered request queue and observes it
//! through published snapshots.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use rcm_core::control::{Ack, CommandMessage, ControlService, RegisterError, RegisterMap, TelemetryFrame};
use rcm_core::replay::{apply_event, CommandLog, LogEntry, LogEvent, ReplayRecord};
use rcm_core::ServiceConfig;
use tokio::sync::{broadcast, oneshot, watch};

/// How ticks are spaced in wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// One tick per `dt`.
    Realtime,
    /// `factor` times faster than real time.
    Scaled(f64),
    /// As fast as possible.
    FreeRun,
}

#[derive(Debug, Clone)]
pub struct RuntimeOptions {
    pub pacing: Pacing,
    /// Append every applied command and register write to this log file.
    pub record: Option<PathBuf>,
    /// Frames buffered per telemetry subscriber before it counts as lagging.
    pub telemetry_capacity: usize,
}

impl Default for RuntimeOptions {
    fn default() -> Self {
        RuntimeOptions { pacing: Pacing::Realtime, record: None, telemetry_capacity: 1024 }
    }
}

type RegisterReply = Result<Option<Ack>, RegisterError>;

enum Request {
    Command(CommandMessage, oneshot::Sender<Ack>),
    RegisterWrite(u16, Vec<u16>, oneshot::Sender<RegisterReply>),
}

/// Error returned once the control loop has stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stopped;

impl std::fmt::Display for Stopped {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("control loop is not running")
    }
}

impl std::error::Error for Stopped {}

/// Cheap, cloneable access to a running control loop.
#[derive(Clone)]
pub struct ServiceHandle {
    requests: mpsc::Sender<Request>,
    telemetry: broadcast::Sender<Arc<TelemetryFrame>>,
    frames: watch::Receiver<Arc<TelemetryFrame>>,
    registers: watch::Receiver<Arc<RegisterMap>>,
    config: Arc<ServiceConfig>,
    stop: Arc<AtomicBool>,
}

impl ServiceHandle {
    /// Queues a command and waits for its acknowledgement.
    pub async fn submit(&self, msg: CommandMessage) -> Result<Ack, Stopped> {
        let (tx, rx) = oneshot::channel();
        self.requests.send(Request::Command(msg, tx)).map_err(|_| Stopped)?;
        rx.await.map_err(|_| Stopped)
    }

    /// Queues a register write transaction. A command word returns the
    /// acknowledgement of the command it triggered.
    pub async fn write_registers(&self, addr: u16, values: Vec<u16>) -> Result<RegisterReply, Stopped> {
        let (tx, rx) = oneshot::channel();
        self.requests.send(Request::RegisterWrite(addr, values, tx)).map_err(|_| Stopped)?;
        rx.await.map_err(|_| Stopped)
    }

    /// Reads from the last published register snapshot.
    pub fn read_registers(&self, addr: u16, count: u16) -> Result<Vec<u16>, RegisterError> {
        self.registers.borrow().read(addr, count)
    }

    pub fn register_snapshot(&self) -> Arc<RegisterMap> {
        self.registers.borrow().clone()
    }

    pub fn latest_frame(&self) -> Arc<TelemetryFrame> {
        self.frames.borrow().clone()
    }

    /// Every frame from now on, in tick order.
    pub fn subscribe(&self) -> broadcast::Receiver<Arc<TelemetryFrame>> {
        self.telemetry.subscribe()
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    pub fn is_stopped(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }
}

struct Recorder {
    out: BufWriter<File>,
}

impl Recorder {
    fn create(path: &PathBuf, config: &ServiceConfig) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        CommandLog { config: Some(config.clone()), entries: Vec::new() }.write(&mut out)?;
        out.flush()?;
        Ok(Recorder { out })
    }

    fn record(&mut self, entry: &LogEntry) {
        let line = serde_json::to_string(entry).expect("serialisable");
        if let Err(e) = writeln!(self.out, "{line}").and_then(|()| self.out.flush()) {
            tracing::warn!("command log write failed: {e}");
        }
    }
}

/// Starts the control loop on its own thread.
pub fn spawn(config: ServiceConfig, opts: RuntimeOptions) -> io::Result<(ServiceHandle, JoinHandle<ControlService>)> {
    let mut recorder = match &opts.record {
        Some(path) => Some(Recorder::create(path, &config)?),
        None => None,
    };
    let svc = ControlService::new(config.clone());
    let (req_tx, req_rx) = mpsc::channel();
    let (tel_tx, _) = broadcast::channel(opts.telemetry_capacity.max(1));
    let (frame_tx, frame_rx) = watch::channel(Arc::new(svc.frame().clone()));
    let (reg_tx, reg_rx) = watch::channel(Arc::new(svc.registers().clone()));
    let stop = Arc::new(AtomicBool::new(false));
    let handle = ServiceHandle {
        requests: req_tx,
        telemetry: tel_tx.clone(),
        frames: frame_rx,
        registers: reg_rx,
        config: Arc::new(config),
        stop: stop.clone(),
    };
    let pacing = opts.pacing;
    let thread = thread::Builder::new().name("control-loop".into()).spawn(move || {
        let mut svc = svc;
        let dt = svc.dt();
        let period = match pacing {
            Pacing::Realtime => Some(Duration::from_secs_f64(dt)),
            Pacing::Scaled(f) => Some(Duration::from_secs_f64(dt / f)),
            Pacing::FreeRun => None,
        };
        let mut deadline = Instant::now();
        while !stop.load(Ordering::SeqCst) {
            let mut replies = Vec::new();
            while let Ok(req) = req_rx.try_recv() {
                let tick = svc.frame().tick;
                let (event, reply): (LogEvent, Box<dyn FnOnce(ReplayRecord)>) = match req {
                    Request::Command(msg, tx) => (
                        LogEvent::Command(msg),
                        Box::new(move |rec| {
                            if let ReplayRecord::Ack { ack, .. } = rec {
                                let _ = tx.send(ack);
                            }
                        }),
                    ),
                    Request::RegisterWrite(addr, values, tx) => (
                        LogEvent::RegisterWrite { addr, values },
                        Box::new(move |rec| {
                            if let ReplayRecord::RegisterWrite { error, ack, .. } = rec {
                                let _ = tx.send(error.map_or(Ok(ack), Err));
                            }
                        }),
                    ),
                };
                let record = apply_event(&mut svc, tick, &event);
                if let Some(r) = recorder.as_mut() {
                    r.record(&LogEntry { tick, event });
                }
                replies.push((reply, record));
            }
            if !replies.is_empty() {
                // publish before acknowledging so a client never sees pre-command state after its ack
                reg_tx.send_replace(Arc::new(svc.registers().clone()));
                frame_tx.send_replace(Arc::new(svc.frame().clone()));
                for (reply, record) in replies {
                    reply(record);
                }
            }
            let frame = Arc::new(svc.step().clone());
            reg_tx.send_replace(Arc::new(svc.registers().clone()));
            frame_tx.send_replace(frame.clone());
            // no subscribers is not an error
            let _ = tel_tx.send(frame);
            match period {
                Some(p) => {
                    deadline += p;
                    let now = Instant::now();
                    if deadline > now {
                        thread::sleep(deadline - now);
                    } else if now - deadline > Duration::from_millis(250) {
                        // far behind (suspended process?): drop the backlog
                        deadline = now;
                    }
                }
                None => thread::yield_now(),
            }
        }
        svc
    })?;
    Ok((handle, thread))
}

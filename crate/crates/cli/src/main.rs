use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rcm_core::kinematics::KinematicsError;
use rcm_core::replay::{replay_to_writer, CommandLog, ReplayOptions};
use rcm_core::trajectory::export_csv;
use rcm_core::{forward_geometric, inverse_geometric, plan_motion, sample, ActuationMode, JointVector, Point3, ServiceConfig};
use rcm_server::{Pacing, RuntimeOptions};

#[derive(Parser)]
#[command(name = "rcm", version, about = "Spherical RCM manipulator: kinematics, planning and control service")]
struct Cli {
    /// Service configuration (TOML). Defaults to the built-in reference configuration.
    #[arg(long, global = true, env = "RCM_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tip position for joint values q1 [rad], q2 [mm], q3 [mm].
    #[command(allow_negative_numbers = true)]
    Fk {
        #[arg(value_parser = finite)]
        q1: f64,
        #[arg(value_parser = finite)]
        q2: f64,
        #[arg(value_parser = finite)]
        q3: f64,
    },
    /// Joint values for a tip position x y z [mm].
    #[command(allow_negative_numbers = true)]
    Ik {
        #[arg(value_parser = finite)]
        x: f64,
        #[arg(value_parser = finite)]
        y: f64,
        #[arg(value_parser = finite)]
        z: f64,
    },
    /// Plans a move between two tip positions and writes the sampled trajectory as CSV.
    #[command(allow_negative_numbers = true)]
    Plan {
        /// Start and goal: xa ya za xb yb zb [mm].
        #[arg(required = true, num_args = 6, value_names = ["XA", "YA", "ZA", "XB", "YB", "ZB"], value_parser = finite)]
        points: Vec<f64>,
        #[arg(long, default_value = "simultaneous")]
        mode: ActuationMode,
        /// Sampling step [s].
        #[arg(long, default_value_t = 0.004, value_parser = positive)]
        dt: f64,
        /// CSV destination; stdout if omitted (the summary then goes to stderr).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints the effective configuration as TOML.
    Config,
    /// Runs the control service until interrupted.
    Serve {
        /// Run this many times faster than real time.
        #[arg(long, value_parser = positive, conflicts_with = "free_run")]
        speed: Option<f64>,
        /// Tick as fast as possible.
        #[arg(long)]
        free_run: bool,
        /// Record commands and register writes to this log.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Re-executes a command log and writes the resulting telemetry as NDJSON.
    Replay {
        log: PathBuf,
        /// Telemetry destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep every n-th frame.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        every: u64,
    },
}

fn finite(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err("value must be finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match finite(s)? {
        v if v > 0.0 => Ok(v),
        _ => Err("value must be positive".into()),
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ServiceConfig> {
    match path {
        Some(p) => Ok(ServiceConfig::load(p)?),
        None => Ok(ServiceConfig::default()),
    }
}

fn kinematics_error(e: KinematicsError) -> anyhow::Error {
    let kind = match e {
        KinematicsError::DegenerateInput { .. } => "DegenerateInput",
        KinematicsError::OutOfWorkspace { .. } => "OutOfWorkspace",
        KinematicsError::NonFinite => "NonFinite",
    };
    anyhow::anyhow!("{kind}: {e}")
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn plan(cfg: &ServiceConfig, points: &[f64], mode: ActuationMode, dt: f64, out: Option<&Path>) -> anyhow::Result<()> {
    let g = &cfg.geometry;
    let a = Point3::new(points[0], points[1], points[2]);
    let b = Point3::new(points[3], points[4], points[5]);
    let qa = inverse_geometric(&a, g).map_err(kinematics_error).context("start point")?;
    let qb = inverse_geometric(&b, g).map_err(kinematics_error).context("goal point")?;
    let plan = plan_motion(&qa, &qb, mode, g)?;
    let samples = sample(&plan, dt)?;
    let mut csv = output(out)?;
    export_csv(&samples, &mut csv)?;
    csv.flush()?;
    let mut summary = String::new();
    summary.push_str(&format!("mode {mode}\n"));
    for (i, phase) in plan.phases.iter().enumerate() {
        let joints: Vec<String> = phase.profiles.iter().map(|(j, _)| j.to_string()).collect();
        summary.push_str(&format!("phase {} {} {:.6}\n", i + 1, joints.join(","), phase.duration));
    }
    summary.push_str(&format!("total {:.6}\n", plan.duration()));
    if out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

fn replay(cfg: Option<ServiceConfig>, log_path: &Path, out: Option<&Path>, every: u64) -> anyhow::Result<()> {
    let file = File::open(log_path).with_context(|| format!("cannot open {}", log_path.display()))?;
    let log = CommandLog::read(BufReader::new(file))?;
    let cfg = match cfg.or_else(|| log.config.clone()) {
        Some(c) => c,
        None => ServiceConfig::default(),
    };
    let mut w = output(out)?;
    let opts = ReplayOptions { frame_every: every, ..ReplayOptions::default() };
    let svc = replay_to_writer(cfg, &log, opts, &mut w)?;
    w.flush()?;
    eprintln!("replayed {} entries, {} ticks, final mode {}", log.entries.len(), svc.frame().tick, svc.mode());
    Ok(())
}

fn serve(cfg: ServiceConfig, speed: Option<f64>, free_run: bool, record: Option<PathBuf>) -> anyhow::Result<()> {
    let pacing = match (speed, free_run) {
        (_, true) => Pacing::FreeRun,
        (Some(f), _) => Pacing::Scaled(f),
        _ => Pacing::Realtime,
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let opts = RuntimeOptions { pacing, record, ..RuntimeOptions::default() };
        let server = rcm_server::start(cfg, opts).await?;
        tracing::info!(
            command = %server.command_addr,
            http = %server.http_addr,
            modbus = %server.modbus_addr,
            "control service running"
        );
        tokio::signal::ctrl_c().await?;
        tracing::info!("shutting down");
        server.shutdown().await;
        Ok(())
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let explicit = cli.config.as_deref();
    match cli.command {
        Cmd::Fk { q1, q2, q3 } => {
            let cfg = load_config(explicit)?;
            let p = forward_geometric(&JointVector::new(q1, q2, q3), &cfg.geometry);
            println!("{:.6} {:.6} {:.6}", p.x, p.y, p.z);
        }
        Cmd::Ik { x, y, z } => {
            let cfg = load_config(explicit)?;
            let q = inverse_geometric(&Point3::new(x, y, z), &cfg.geometry).map_err(kinematics_error)?;
            println!("{:.9} {:.9} {:.9}", q.q1, q.q2, q.q3);
        }
        Cmd::Plan { points, mode, dt, out } => plan(&load_config(explicit)?, &points, mode, dt, out.as_deref())?,
        Cmd::Config => print!("{}", load_config(explicit)?.to_toml_string()),
        Cmd::Serve { speed, free_run, record } => serve(load_config(explicit)?, speed, free_run, record)?,
        Cmd::Replay { log, out, every } => {
            let cfg = explicit.map(ServiceConfig::load).transpose()?;
            replay(cfg, &log, out.as_deref(), every)?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

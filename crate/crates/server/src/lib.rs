//! Network front end of the control service.
//!
//! [`start`] spawns the control loop and binds three listeners: the NDJSON
//! command channel, HTTP/WebSocket and Modbus TCP.

pub mod command_tcp;
pub mod http;
pub mod modbus_tcp;
pub mod runtime;

use std::io;
use std::net::SocketAddr;
use std::thread::JoinHandle;

use rcm_core::{ControlService, ServiceConfig};
use tokio::net::TcpListener;
use tokio::task::JoinSet;

pub use runtime::{spawn, Pacing, RuntimeOptions, ServiceHandle, Stopped};

pub struct RunningServer {
    pub handle: ServiceHandle,
    pub command_addr: SocketAddr,
    pub http_addr: SocketAddr,
    pub modbus_addr: SocketAddr,
    tasks: JoinSet<()>,
    control: Option<JoinHandle<ControlService>>,
}

impl RunningServer {
    /// Stops the listeners and the control loop; returns the final service.
    pub async fn shutdown(mut self) -> Option<ControlService> {
        self.tasks.abort_all();
        while self.tasks.join_next().await.is_some() {}
        self.handle.stop();
        let control = self.control.take()?;
        tokio::task::spawn_blocking(move || control.join().ok()).await.ok().flatten()
    }
}

/// Starts the service on the ports from `config.network` (0 picks a free port).
pub async fn start(config: ServiceConfig, opts: RuntimeOptions) -> io::Result<RunningServer> {
    let net = config.network.clone();
    let bind = |port: u16| {
        let addr = format!("{}:{port}", net.bind);
        async move { TcpListener::bind(&addr).await.map_err(|e| io::Error::new(e.kind(), format!("{addr}: {e}"))) }
    };
    let command = bind(net.command_port).await?;
    let http = bind(net.http_port).await?;
    let modbus = bind(net.modbus_port).await?;
    let (handle, control) = runtime::spawn(config, opts)?;
    let mut server = RunningServer {
        command_addr: command.local_addr()?,
        http_addr: http.local_addr()?,
        modbus_addr: modbus.local_addr()?,
        handle: handle.clone(),
        tasks: JoinSet::new(),
        control: Some(control),
    };
    server.tasks.spawn(command_tcp::serve(command, handle.clone()));
    server.tasks.spawn(modbus_tcp::serve(modbus, handle.clone()));
    let app = http::router(handle);
    server.tasks.spawn(async move {
        if let Err(e) = axum::serve(http, app).await {
            tracing::error!("http server failed: {e}");
        }
    });
    Ok(server)
}

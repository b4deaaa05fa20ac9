//! Newline-delimited JSON command channel.

use rcm_core::control::{decode_line, Ack, RejectReason};
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};

use crate::runtime::ServiceHandle;

/// Longest accepted command line, in bytes.
pub const MAX_LINE: usize = 64 * 1024;

/// Acknowledges one raw line of input.
pub async fn handle_line(handle: &ServiceHandle, line: &str) -> Option<Ack> {
    let line = line.trim();
    if line.is_empty() {
        return None;
    }
    Some(match decode_line(line) {
        Ok(msg) => {
            let seq = msg.seq;
            match handle.submit(msg).await {
                Ok(ack) => ack,
                Err(e) => Ack::rejected(seq, RejectReason::Busy).with_detail(e.to_string()),
            }
        }
        Err(ack) => ack,
    })
}

pub async fn serve(listener: TcpListener, handle: ServiceHandle) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                let handle = handle.clone();
                tokio::spawn(async move {
                    if let Err(e) = connection(stream, handle).await {
                        tracing::debug!(%peer, "command connection closed: {e}");
                    }
                });
            }
            Err(e) => tracing::warn!("command accept failed: {e}"),
        }
    }
}

async fn connection(stream: TcpStream, handle: ServiceHandle) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let (read, mut write) = stream.into_split();
    let mut reader = BufReader::new(read);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = (&mut reader).take(MAX_LINE as u64 + 1).read_until(b'\n', &mut buf).await?;
        if n == 0 {
            return Ok(());
        }
        if buf.len() > MAX_LINE {
            let ack = Ack::rejected(0, RejectReason::BadArgument).with_detail("line too long");
            write.write_all(format!("{}\n", ack.to_line()).as_bytes()).await?;
            return Ok(());
        }
        let line = String::from_utf8_lossy(&buf);
        if let Some(ack) = handle_line(&handle, &line).await {
            write.write_all(format!("{}\n", ack.to_line()).as_bytes()).await?;
        }
    }
}

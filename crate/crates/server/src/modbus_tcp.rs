//! Modbus-TCP holding-register server.

use rcm_core::control::modbus::{decode_request, encode_response, frame_length, respond, Request, Response};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

use crate::runtime::ServiceHandle;

pub async fn serve(listener: TcpListener, handle: ServiceHandle) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                let handle = handle.clone();
                tokio::spawn(async move {
                    if let Err(e) = connection(stream, handle).await {
                        tracing::debug!(%peer, "modbus connection closed: {e}");
                    }
                });
            }
            Err(e) => tracing::warn!("modbus accept failed: {e}"),
        }
    }
}

/// Executes one decoded request against the service.
pub async fn execute(handle: &ServiceHandle, request: &Request) -> Response {
    match request {
        Request::ReadHolding { addr, count } => respond(request, handle.read_registers(*addr, *count).map(Some)),
        Request::WriteMultiple { addr, values } => match handle.write_registers(*addr, values.clone()).await {
            Ok(result) => respond(request, result.map(|_| None)),
            // server device failure
            Err(_) => Response::Exception { function: request.function_code(), code: 0x04 },
        },
    }
}

async fn connection(mut stream: TcpStream, handle: ServiceHandle) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let invalid = |e| std::io::Error::new(std::io::ErrorKind::InvalidData, e);
    let mut frame = vec![0u8; 6];
    loop {
        frame.resize(6, 0);
        match stream.read_exact(&mut frame).await {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        }
        let len = frame_length(&frame).map_err(invalid)?.expect("header is complete");
        frame.resize(len, 0);
        stream.read_exact(&mut frame[6..]).await?;
        let (header, decoded) = decode_request(&frame).map_err(invalid)?;
        let response = match decoded {
            Ok(request) => execute(&handle, &request).await,
            Err((function, code)) => Response::Exception { function, code },
        };
        stream.write_all(&encode_response(header, &response)).await?;
    }
}

//! HTTP and WebSocket surface: `GET /state`, `GET /config`,
//! `/ws/telemetry[?every=n]` and `/ws/command`.

use std::collections::HashMap;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use tokio::sync::broadcast::error::RecvError;

use crate::command_tcp::handle_line;
use crate::runtime::ServiceHandle;

/// Close code sent to telemetry subscribers that fall behind.
pub const CLOSE_LAGGING: u16 = 4000;

pub fn router(handle: ServiceHandle) -> Router {
    Router::new()
        .route("/state", get(state))
        .route("/config", get(config))
        .route("/ws/telemetry", get(telemetry))
        .route("/ws/command", get(command))
        .with_state(handle)
}

async fn state(State(h): State<ServiceHandle>) -> Response {
    Json(h.latest_frame().as_ref().clone()).into_response()
}

async fn config(State(h): State<ServiceHandle>) -> Response {
    Json(h.config().geometry).into_response()
}

async fn telemetry(
    ws: WebSocketUpgrade,
    Query(params): Query<HashMap<String, String>>,
    State(h): State<ServiceHandle>,
) -> Response {
    let every = match params.get("every").map(|v| v.parse::<u64>()) {
        None => h.config().network.telemetry_decimation as u64,
        Some(Ok(n)) if n > 0 => n,
        Some(_) => return (axum::http::StatusCode::BAD_REQUEST, "every must be a positive integer").into_response(),
    };
    ws.on_upgrade(move |socket| stream_telemetry(socket, h, every))
}

async fn stream_telemetry(mut socket: WebSocket, h: ServiceHandle, every: u64) {
    let mut rx = h.subscribe();
    loop {
        tokio::select! {
            frame = rx.recv() => match frame {
                Ok(frame) => {
                    if frame.tick % every != 0 {
                        continue;
                    }
                    if socket.send(Message::Text(frame.to_line().into())).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(n)) => {
                    tracing::info!("dropping telemetry subscriber {n} frames behind");
                    let close = CloseFrame { code: CLOSE_LAGGING, reason: "lagging".into() };
                    let _ = socket.send(Message::Close(Some(close))).await;
                    return;
                }
                Err(RecvError::Closed) => return,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn command(ws: WebSocketUpgrade, State(h): State<ServiceHandle>) -> Response {
    ws.on_upgrade(move |socket| run_commands(socket, h))
}

async fn run_commands(mut socket: WebSocket, h: ServiceHandle) {
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            Message::Close(_) => return,
            _ => continue,
        };
        for line in text.lines() {
            if let Some(ack) = handle_line(&h, line).await {
                if socket.send(Message::Text(ack.to_line().into())).await.is_err() {
                    return;
                }
            }
        }
    }
}

//! HTTP front end for an [`Emulator`].
//!
//! Routes: `POST /functions` with a raw archive body, `POST
//! /functions/{name}/invoke` with an event body, `GET /functions` and
//! `DELETE /functions/{name}`.

use std::net::SocketAddr;
use std::thread;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use tokio::sync::oneshot;

use super::{Emulator, EmulatorError};
use crate::package::UnitArchive;

const BODY_LIMIT: usize = 64 << 20;

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({"message": message.into()}))).into_response()
}

fn json_text(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn create(State(emu): State<Emulator>, body: Bytes) -> Response {
    let archive = UnitArchive { bytes: body.to_vec() };
    match tokio::task::spawn_blocking(move || emu.create_from_archive(archive)).await {
        Ok(Ok(report)) => (StatusCode::CREATED, Json(report)).into_response(),
        Ok(Err(e)) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn invoke(State(emu): State<Emulator>, Path(name): Path<String>, body: Bytes) -> Response {
    let Ok(event) = String::from_utf8(body.to_vec()) else {
        return error(StatusCode::BAD_REQUEST, "body is not UTF-8");
    };
    if let Err(e) = serde_json::from_str::<serde_json::Value>(&event) {
        return error(StatusCode::BAD_REQUEST, format!("body is not JSON: {e}"));
    }
    match tokio::task::spawn_blocking(move || emu.invoke(&name, &event)).await {
        Ok(Ok(text)) => json_text(text),
        Ok(Err(e @ EmulatorError::UnknownFunction(_))) => error(StatusCode::NOT_FOUND, e.to_string()),
        Ok(Err(e)) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn list(State(emu): State<Emulator>) -> Response {
    Json(emu.list()).into_response()
}

async fn delete(State(emu): State<Emulator>, Path(name): Path<String>) -> Response {
    if emu.delete(&name) {
        StatusCode::NO_CONTENT.into_response()
    } else {
        error(StatusCode::NOT_FOUND, format!("unknown function {name:?}"))
    }
}

pub fn router(emu: Emulator) -> Router {
    Router::new()
        .route("/functions", post(create).get(list))
        .route("/functions/{name}/invoke", post(invoke))
        .route("/functions/{name}", axum::routing::delete(delete))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(emu)
}

/// A gateway running on a background thread; stops when dropped.
pub struct Gateway {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl Gateway {
    /// Binds `addr` (port 0 picks a free port) and starts serving `emu`.
    pub fn start(emu: Emulator, addr: &str) -> std::io::Result<Gateway> {
        let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
        let local = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = thread::Builder::new().name("gateway".into()).spawn(move || {
            runtime.block_on(async move {
                let _ = axum::serve(listener, router(emu))
                    .with_graceful_shutdown(async {
                        let _ = stopped.await;
                    })
                    .await;
            });
        })?;
        Ok(Gateway {
            addr: local,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Serves `emu` on `addr` until the process exits.
pub fn serve(emu: Emulator, addr: &str) -> std::io::Result<()> {
    let gateway = Gateway::start(emu, addr)?;
    eprintln!("serving on {}", gateway.url());
    gateway.wait();
    Ok(())
}

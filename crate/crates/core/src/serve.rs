//! WebSocket session server and a blocking client.
//!
//! Every accepted connection gets its own thread and its own [`Env`]. A
//! plain HTTP `GET` (no WebSocket upgrade) is answered from the optional web
//! root so the browser client and the server can share one port.

use std::borrow::Cow;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;
use tungstenite::protocol::frame::coding::CloseCode;
use tungstenite::protocol::{CloseFrame, WebSocketConfig};
use tungstenite::{Message, WebSocket};

use crate::env::{Env, ObservationSpec};
use crate::protocol::{
    close, ClientMessage, Frame, Handshake, HandshakeReply, Pacing, ProtocolError, HANDSHAKE_TIMEOUT_SECS,
    MAX_HANDSHAKE,
};
use crate::sim::ActionVector;

const MAX_REQUEST_HEAD: usize = 8192;

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub bind: String,
    /// When set, only this level is served.
    pub level: Option<String>,
    /// Pacing for handshakes that do not name one.
    pub pacing: Pacing,
    pub web_root: Option<PathBuf>,
    pub handshake_timeout: Duration,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            bind: "127.0.0.1:8765".into(),
            level: None,
            pacing: Pacing::LockStep,
            web_root: None,
            handshake_timeout: Duration::from_secs(HANDSHAKE_TIMEOUT_SECS),
        }
    }
}

pub struct Server {
    listener: TcpListener,
    config: Arc<ServeConfig>,
}

impl Server {
    pub fn bind(config: ServeConfig) -> io::Result<Server> {
        let listener = TcpListener::bind(&config.bind)?;
        Ok(Server {
            listener,
            config: Arc::new(config),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accept connections until the listener fails.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            };
            let config = self.config.clone();
            thread::spawn(move || handle_connection(stream, &config));
        }
        Ok(())
    }

    pub fn spawn(self) -> JoinHandle<io::Result<()>> {
        thread::spawn(move || self.run())
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

enum Request {
    Upgrade,
    Get { path: String, head_len: usize },
    Other { head_len: usize },
}

/// Look at the request head without consuming it, so the WebSocket
/// handshake can still read it.
fn sniff(stream: &TcpStream, deadline: Instant) -> io::Result<Option<Request>> {
    let mut buf = vec![0u8; MAX_REQUEST_HEAD];
    loop {
        let n = match stream.peek(&mut buf) {
            Ok(0) => return Ok(None),
            Ok(n) => n,
            Err(e) if is_timeout(&e) => 0,
            Err(e) => return Err(e),
        };
        if let Some(end) = buf[..n].windows(4).position(|w| w == b"\r\n\r\n") {
            let head = String::from_utf8_lossy(&buf[..end]).to_ascii_lowercase();
            let head_len = end + 4;
            let mut lines = head.lines();
            let mut parts = lines.next().unwrap_or("").split_whitespace();
            let method = parts.next().unwrap_or("");
            let path = parts.next().unwrap_or("/").to_string();
            let upgrade = lines.any(|l| l.starts_with("upgrade:") && l.contains("websocket"));
            return Ok(Some(match (upgrade, method) {
                (true, _) => Request::Upgrade,
                (false, "get") => Request::Get { path, head_len },
                _ => Request::Other { head_len },
            }));
        }
        if n == buf.len() || Instant::now() >= deadline {
            return Ok(None);
        }
        thread::sleep(Duration::from_millis(2));
    }
}

fn handle_connection(stream: TcpStream, config: &ServeConfig) {
    let _ = stream.set_nodelay(true);
    let deadline = Instant::now() + config.handshake_timeout;
    if stream.set_read_timeout(Some(config.handshake_timeout)).is_err() {
        return;
    }
    match sniff(&stream, deadline) {
        Ok(Some(Request::Upgrade)) => {
            let ws_config = WebSocketConfig {
                max_message_size: Some(MAX_HANDSHAKE),
                max_frame_size: Some(MAX_HANDSHAKE),
                ..WebSocketConfig::default()
            };
            if let Ok(ws) = tungstenite::accept_with_config(stream, Some(ws_config)) {
                run_session(ws, config, deadline);
            }
        }
        Ok(Some(Request::Get { path, head_len })) => {
            let _ = serve_static(stream, head_len, &path, config.web_root.as_deref());
        }
        Ok(Some(Request::Other { head_len })) => {
            let _ = respond(stream, head_len, "405 Method Not Allowed", "text/plain", b"method not allowed\n");
        }
        _ => {}
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "wasm" => "application/wasm",
        "css" => "text/css; charset=utf-8",
        "json" => "application/json",
        "png" => "image/png",
        "svg" => "image/svg+xml",
        "txt" | "md" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

/// Map a request path onto the web root, refusing anything that could
/// escape it.
pub fn resolve_static(root: &Path, request_path: &str) -> Option<PathBuf> {
    let path = request_path.split(['?', '#']).next().unwrap_or("/");
    let rel = Path::new(path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let mut full = root.join(rel);
    if full.is_dir() {
        full.push("index.html");
    }
    full.is_file().then_some(full)
}

fn serve_static(stream: TcpStream, head_len: usize, path: &str, root: Option<&Path>) -> io::Result<()> {
    let Some(root) = root else {
        return respond(stream, head_len, "404 Not Found", "text/plain", b"no web root configured\n");
    };
    match resolve_static(root, path) {
        Some(file) => {
            let body = std::fs::read(&file)?;
            respond(stream, head_len, "200 OK", content_type(&file), &body)
        }
        None => respond(stream, head_len, "404 Not Found", "text/plain", b"not found\n"),
    }
}

fn respond(mut stream: TcpStream, head_len: usize, status: &str, ctype: &str, body: &[u8]) -> io::Result<()> {
    let mut head = vec![0u8; head_len];
    stream.read_exact(&mut head)?;
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    stream.write_all(body)?;
    stream.flush()
}

fn close_with(ws: &mut WebSocket<TcpStream>, code: u16, reason: &str) {
    let frame = CloseFrame {
        code: CloseCode::from(code),
        reason: Cow::Owned(reason.chars().take(100).collect()),
    };
    let _ = ws.close(Some(frame));
    let _ = ws.get_mut().set_read_timeout(Some(Duration::from_secs(1)));
    // Drain until the peer acknowledges or the socket dies.
    while ws.read().is_ok() {}
}

fn map_read_error(e: &tungstenite::Error) -> Option<u16> {
    match e {
        tungstenite::Error::Capacity(_) => Some(close::OVERSIZE),
        tungstenite::Error::Utf8 => Some(close::BAD_HANDSHAKE),
        _ => None,
    }
}

fn run_session(mut ws: WebSocket<TcpStream>, config: &ServeConfig, deadline: Instant) {
    let handshake = loop {
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            return close_with(&mut ws, close::HANDSHAKE_TIMEOUT, "handshake timeout");
        }
        let _ = ws.get_mut().set_read_timeout(Some(remaining));
        match ws.read() {
            Ok(Message::Text(text)) => break text,
            Ok(Message::Binary(_)) => return close_with(&mut ws, close::BAD_HANDSHAKE, "expected handshake text"),
            Ok(Message::Close(_)) => return,
            Ok(_) => continue,
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {
                return close_with(&mut ws, close::HANDSHAKE_TIMEOUT, "handshake timeout")
            }
            Err(e) => {
                if let Some(code) = map_read_error(&e) {
                    close_with(&mut ws, code, &e.to_string());
                }
                return;
            }
        }
    };

    let reject = |ws: &mut WebSocket<TcpStream>, code: u16, msg: String| {
        let _ = ws.send(Message::Text(HandshakeReply::Error { error: msg.clone() }.to_json()));
        close_with(ws, code, &msg);
    };
    let handshake = match Handshake::parse(&handshake) {
        Ok(h) => h,
        Err(e) => return reject(&mut ws, e.close_code(), e.to_string()),
    };
    if let Some(level) = &config.level {
        if &handshake.level != level {
            let msg = format!("this server only serves {level:?}");
            return reject(&mut ws, close::BAD_HANDSHAKE, msg);
        }
    }
    let mut env = match handshake.env_config().and_then(Env::new) {
        Ok(env) => env,
        Err(e) => return reject(&mut ws, close::BAD_HANDSHAKE, e.to_string()),
    };
    if let Err(e) = env.reset(Some(handshake.seed)) {
        return reject(&mut ws, close::BAD_HANDSHAKE, e.to_string());
    }
    let reply = HandshakeReply::ok(env.observation_spec()).to_json();
    if ws.send(Message::Text(reply)).is_err() || send_frame(&mut ws, &mut env, 0.0).is_err() {
        return;
    }
    match handshake.pacing.unwrap_or(config.pacing) {
        Pacing::LockStep => lockstep(ws, env),
        Pacing::RealTime => realtime(ws, env),
    }
}

fn send_frame(ws: &mut WebSocket<TcpStream>, env: &mut Env, reward: f64) -> Result<(), ()> {
    let frame = Frame::from_env(env, reward).map_err(|_| ())?;
    ws.send(Message::Binary(frame.encode())).map_err(|_| ())
}

enum Incoming {
    Message(ClientMessage),
    Idle,
    Stop,
}

fn next_message(ws: &mut WebSocket<TcpStream>) -> Incoming {
    match ws.read() {
        Ok(Message::Binary(bytes)) => match ClientMessage::decode(&bytes) {
            Ok(m) => Incoming::Message(m),
            Err(e) => {
                close_with(ws, e.close_code(), &e.to_string());
                Incoming::Stop
            }
        },
        Ok(Message::Text(_)) => {
            let e = ProtocolError::BadMagic(b'{');
            close_with(ws, e.close_code(), "text after handshake");
            Incoming::Stop
        }
        Ok(Message::Close(_)) => Incoming::Stop,
        Ok(_) => Incoming::Idle,
        Err(tungstenite::Error::Io(e)) if is_timeout(&e) => Incoming::Idle,
        Err(e) => {
            if let Some(code) = map_read_error(&e) {
                close_with(ws, code, &e.to_string());
            }
            Incoming::Stop
        }
    }
}

/// Render only in answer to a client message.
fn lockstep(mut ws: WebSocket<TcpStream>, mut env: Env) {
    let _ = ws.get_mut().set_read_timeout(None);
    loop {
        let reward = match next_message(&mut ws) {
            Incoming::Stop => return,
            Incoming::Idle => continue,
            Incoming::Message(ClientMessage::Action { action, num_steps }) => {
                if !env.is_running() {
                    return close_with(&mut ws, close::EPISODE_FINISHED, "episode finished; send RESET");
                }
                match env.step(&action, num_steps as u32) {
                    Ok(r) => r,
                    Err(e) => return close_with(&mut ws, close::EPISODE_FINISHED, &e.to_string()),
                }
            }
            Incoming::Message(ClientMessage::Reset { seed }) => match env.reset(Some(seed)) {
                Ok(()) => 0.0,
                Err(e) => return close_with(&mut ws, close::BAD_HANDSHAKE, &e.to_string()),
            },
        };
        if send_frame(&mut ws, &mut env, reward).is_err() {
            return;
        }
    }
}

/// Step at the configured frame rate, repeating the latest action and
/// starting a new episode whenever one ends.
fn realtime(mut ws: WebSocket<TcpStream>, mut env: Env) {
    let period = Duration::from_secs_f64(env.dt());
    let mut action = ActionVector::ZERO;
    let mut next_tick = Instant::now() + period;
    loop {
        let now = Instant::now();
        if now < next_tick {
            let wait = (next_tick - now).max(Duration::from_millis(1));
            let _ = ws.get_mut().set_read_timeout(Some(wait));
            match next_message(&mut ws) {
                Incoming::Stop => return,
                Incoming::Idle => {}
                Incoming::Message(ClientMessage::Action { action: a, .. }) => action = a,
                Incoming::Message(ClientMessage::Reset { seed }) => {
                    if env.reset(Some(seed)).is_err() || send_frame(&mut ws, &mut env, 0.0).is_err() {
                        return;
                    }
                    next_tick = Instant::now() + period;
                }
            }
            continue;
        }
        let reward = if env.is_running() {
            env.step(&action, 1).unwrap_or(0.0)
        } else {
            if env.reset(None).is_err() {
                return;
            }
            0.0
        };
        if send_frame(&mut ws, &mut env, reward).is_err() {
            return;
        }
        next_tick += period;
        // Never try to catch up more than one frame.
        if next_tick + period < Instant::now() {
            next_tick = Instant::now() + period;
        }
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    WebSocket(#[from] tungstenite::Error),
    #[error("server rejected the session: {0}")]
    Rejected(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("connection closed (code {0:?})")]
    Closed(Option<u16>),
    #[error("unexpected message")]
    Unexpected,
}

/// Blocking client for scripted agents and tests.
pub struct Client {
    ws: WebSocket<TcpStream>,
    spec: Vec<ObservationSpec>,
}

impl Client {
    /// Connect, handshake, and return the client with the tick-0 frame.
    pub fn connect(addr: impl ToSocketAddrs, handshake: &Handshake) -> Result<(Client, Frame), ClientError> {
        let mut client = Self::open(addr)?;
        client.ws.send(Message::Text(handshake.to_json()))?;
        let reply = match client.read()? {
            Message::Text(t) => t,
            _ => return Err(ClientError::Unexpected),
        };
        match serde_json::from_str::<HandshakeReply>(&reply) {
            Ok(HandshakeReply::Ok { spec, .. }) => client.spec = spec,
            Ok(HandshakeReply::Error { error }) => return Err(ClientError::Rejected(error)),
            Err(e) => return Err(ClientError::Rejected(e.to_string())),
        }
        let frame = client.recv_frame()?;
        Ok((client, frame))
    }

    /// Connect without a handshake.
    pub fn open(addr: impl ToSocketAddrs) -> Result<Client, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let url = format!("ws://{}/", stream.peer_addr()?);
        let (ws, _) = tungstenite::client(url, stream).map_err(|e| match e {
            tungstenite::HandshakeError::Failure(e) => ClientError::WebSocket(e),
            tungstenite::HandshakeError::Interrupted(_) => ClientError::Unexpected,
        })?;
        Ok(Client { ws, spec: Vec::new() })
    }

    pub fn spec(&self) -> &[ObservationSpec] {
        &self.spec
    }

    pub fn step(&mut self, action: &ActionVector, num_steps: u16) -> Result<Frame, ClientError> {
        self.send(&ClientMessage::Action {
            action: *action,
            num_steps,
        })?;
        self.recv_frame()
    }

    pub fn reset(&mut self, seed: u64) -> Result<Frame, ClientError> {
        self.send(&ClientMessage::Reset { seed })?;
        self.recv_frame()
    }

    pub fn send(&mut self, msg: &ClientMessage) -> Result<(), ClientError> {
        self.send_raw(msg.encode())
    }

    pub fn send_raw(&mut self, bytes: Vec<u8>) -> Result<(), ClientError> {
        self.ws.send(Message::Binary(bytes))?;
        Ok(())
    }

    pub fn send_text(&mut self, text: &str) -> Result<(), ClientError> {
        self.ws.send(Message::Text(text.to_string()))?;
        Ok(())
    }

    fn read(&mut self) -> Result<Message, ClientError> {
        loop {
            match self.ws.read() {
                Ok(Message::Close(frame)) => return Err(ClientError::Closed(frame.map(|f| u16::from(f.code)))),
                Ok(Message::Ping(_)) | Ok(Message::Pong(_)) => continue,
                Ok(m) => return Ok(m),
                Err(tungstenite::Error::ConnectionClosed) | Err(tungstenite::Error::AlreadyClosed) => {
                    return Err(ClientError::Closed(None))
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Next FRAME as raw bytes.
    pub fn recv_raw(&mut self) -> Result<Vec<u8>, ClientError> {
        match self.read()? {
            Message::Binary(b) => Ok(b),
            _ => Err(ClientError::Unexpected),
        }
    }

    pub fn recv_frame(&mut self) -> Result<Frame, ClientError> {
        Ok(Frame::decode(&self.recv_raw()?)?)
    }

    /// Read until the server closes; returns its close code.
    pub fn wait_closed(&mut self) -> Option<u16> {
        loop {
            match self.read() {
                Err(ClientError::Closed(code)) => return code,
                Err(_) => return None,
                Ok(_) => continue,
            }
        }
    }

    pub fn set_read_timeout(&mut self, timeout: Option<Duration>) -> io::Result<()> {
        self.ws.get_mut().set_read_timeout(timeout)
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        while self.ws.read().is_ok() {}
    }
}

//! Framed TCP protocol for externally served seeker policies.
//!
//! Request: an 8-byte little-endian payload length, then the payload, which
//! is a compact JSON header `{policy, agent_id, n, h, w, c, dtype:"u8"}`
//! followed directly by `n·h·w·c` raw tensor bytes (row-major, frames oldest
//! first, channel-last). The header ends where its JSON object closes.
//!
//! Response: an 8-byte little-endian length, then JSON. Either an action
//! `{x, y, sin_o, cos_o}` normalized to [-1, 1] against the arena bounds, or
//! `{error, kind}` with `kind` one of `shape` or `protocol`.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use hideseek_core::config::WorldConfig;
use hideseek_core::dataset::denormalize_action;
use hideseek_core::math::Vec2;
use hideseek_core::observation::{pixel_center, OBS_CHANNELS, OBS_SIZE};
use hideseek_core::policy::{DecisionContext, PolicyError, SeekerPolicy};
use hideseek_core::world::{AgentId, Waypoint};

pub const DEFAULT_DEADLINE: Duration = Duration::from_millis(100);
/// Refuse frames larger than this (a 16-frame stack is ~1.6 MB).
pub const MAX_FRAME: u64 = 64 << 20;

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("deadline exceeded")]
    Timeout,
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("remote error ({kind}): {message}")]
    Remote { kind: String, message: String },
    #[error("bad endpoint {0:?}, expected host:port/policy")]
    Endpoint(String),
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

impl BridgeError {
    fn from_io(e: io::Error) -> Self {
        if is_timeout(&e) {
            BridgeError::Timeout
        } else {
            BridgeError::Io(e)
        }
    }
}

/// `host:port/policy_name`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub host: String,
    pub port: u16,
    pub policy: String,
}

impl FromStr for Endpoint {
    type Err = BridgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BridgeError::Endpoint(s.to_owned());
        let (addr, policy) = s.split_once('/').ok_or_else(bad)?;
        let (host, port) = addr.rsplit_once(':').ok_or_else(bad)?;
        if host.is_empty() || policy.is_empty() {
            return Err(bad());
        }
        Ok(Endpoint { host: host.to_owned(), port: port.parse().map_err(|_| bad())?, policy: policy.to_owned() })
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}/{}", self.host, self.port, self.policy)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestHeader {
    pub policy: String,
    pub agent_id: AgentId,
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub dtype: String,
}

impl RequestHeader {
    pub fn observation(policy: &str, agent_id: AgentId, n: usize) -> Self {
        RequestHeader {
            policy: policy.to_owned(),
            agent_id,
            n,
            h: OBS_SIZE,
            w: OBS_SIZE,
            c: OBS_CHANNELS,
            dtype: "u8".to_owned(),
        }
    }

    /// Tensor byte count, or `None` on overflow.
    pub fn tensor_len(&self) -> Option<usize> {
        self.n.checked_mul(self.h)?.checked_mul(self.w)?.checked_mul(self.c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Request {
    pub header: RequestHeader,
    pub tensor: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub x: f64,
    pub y: f64,
    pub sin_o: f64,
    pub cos_o: f64,
}

impl Action {
    pub fn to_waypoint(self, arena_side: f64) -> Waypoint {
        let (pos, o) = denormalize_action([self.x, self.y, self.sin_o, self.cos_o], arena_side);
        Waypoint { pos, heading: Some(o) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Action(Action),
    Error { error: String, kind: String },
}

/// Payload bytes (without the length prefix) of a request.
pub fn encode_payload(header: &RequestHeader, tensor: &[u8]) -> Result<Vec<u8>, BridgeError> {
    if header.dtype != "u8" {
        return Err(BridgeError::Shape(format!("dtype {:?}, only \"u8\" is supported", header.dtype)));
    }
    let expected = header.tensor_len().ok_or_else(|| BridgeError::Shape("tensor size overflows".into()))?;
    if tensor.len() != expected {
        return Err(BridgeError::Shape(format!("header says {expected} bytes, tensor has {}", tensor.len())));
    }
    let mut out = serde_json::to_vec(header).expect("header serializes");
    out.extend_from_slice(tensor);
    Ok(out)
}

/// Full request frame: length prefix plus payload.
pub fn encode_request(header: &RequestHeader, tensor: &[u8]) -> Result<Vec<u8>, BridgeError> {
    let payload = encode_payload(header, tensor)?;
    let mut out = Vec::with_capacity(8 + payload.len());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_payload(payload: &[u8]) -> Result<Request, BridgeError> {
    let mut stream = serde_json::Deserializer::from_slice(payload).into_iter::<RequestHeader>();
    let header = match stream.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(BridgeError::Malformed(format!("header: {e}"))),
        None => return Err(BridgeError::Malformed("empty payload".into())),
    };
    let start = stream.byte_offset();
    if header.dtype != "u8" {
        return Err(BridgeError::Shape(format!("dtype {:?}, only \"u8\" is supported", header.dtype)));
    }
    let expected = header.tensor_len().ok_or_else(|| BridgeError::Shape("tensor size overflows".into()))?;
    let got = payload.len() - start;
    if got != expected {
        return Err(BridgeError::Shape(format!(
            "header {}x{}x{}x{} needs {expected} bytes, frame carries {got}",
            header.n, header.h, header.w, header.c
        )));
    }
    Ok(Request { header, tensor: payload[start..].to_vec() })
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    w.write_all(&(payload.len() as u64).to_le_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

/// Read one length-prefixed frame. `Ok(None)` on a clean end of stream
/// before the prefix.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, BridgeError> {
    let mut len = [0u8; 8];
    let mut got = 0;
    while got < 8 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(BridgeError::Malformed("stream ended inside the length prefix".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(BridgeError::from_io(e)),
        }
    }
    let len = u64::from_le_bytes(len);
    if len > MAX_FRAME {
        return Err(BridgeError::Malformed(format!("frame of {len} bytes exceeds the {MAX_FRAME} byte limit")));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => BridgeError::Malformed(format!("stream ended inside a {len} byte frame")),
        _ => BridgeError::from_io(e),
    })?;
    Ok(Some(buf))
}

pub fn decode_response(payload: &[u8]) -> Result<Action, BridgeError> {
    match serde_json::from_slice::<Response>(payload) {
        Ok(Response::Action(a)) => {
            if [a.x, a.y, a.sin_o, a.cos_o].iter().all(|v| v.is_finite()) {
                Ok(a)
            } else {
                Err(BridgeError::Malformed("non-finite action".into()))
            }
        }
        Ok(Response::Error { error, kind }) => Err(BridgeError::Remote { kind, message: error }),
        Err(e) => Err(BridgeError::Malformed(format!("response: {e}"))),
    }
}

/// Blocking client for one endpoint; one request in flight at a time.
pub struct Client {
    endpoint: Endpoint,
    stream: Option<TcpStream>,
}

impl Client {
    pub fn new(endpoint: Endpoint) -> Self {
        Client { endpoint, stream: None }
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    fn connect(&mut self, deadline: Instant) -> Result<&mut TcpStream, BridgeError> {
        if self.stream.is_none() {
            let addr = (self.endpoint.host.as_str(), self.endpoint.port)
                .to_socket_addrs()?
                .next()
                .ok_or_else(|| BridgeError::Endpoint(self.endpoint.to_string()))?;
            let left = remaining(deadline)?;
            let s = TcpStream::connect_timeout(&addr, left).map_err(BridgeError::from_io)?;
            s.set_nodelay(true)?;
            self.stream = Some(s);
        }
        Ok(self.stream.as_mut().unwrap())
    }

    /// Send one request and wait for the answer until `deadline` has passed.
    /// Any error drops the connection; the next call reconnects.
    pub fn query(&mut self, header: &RequestHeader, tensor: &[u8], deadline: Duration) -> Result<Action, BridgeError> {
        let frame = encode_request(header, tensor)?;
        let until = Instant::now() + deadline;
        let r = self.exchange(&frame, until);
        if r.is_err() {
            self.stream = None;
        }
        r
    }

    fn exchange(&mut self, frame: &[u8], until: Instant) -> Result<Action, BridgeError> {
        let s = self.connect(until)?;
        s.set_write_timeout(Some(remaining(until)?))?;
        s.write_all(frame).map_err(BridgeError::from_io)?;
        s.set_read_timeout(Some(remaining(until)?))?;
        let payload = read_frame(s)?.ok_or_else(|| BridgeError::Malformed("connection closed before reply".into()))?;
        if Instant::now() > until {
            return Err(BridgeError::Timeout);
        }
        decode_response(&payload)
    }
}

fn remaining(until: Instant) -> Result<Duration, BridgeError> {
    let left = until.saturating_duration_since(Instant::now());
    if left.is_zero() {
        Err(BridgeError::Timeout)
    } else {
        Ok(left)
    }
}

/// Seeker driven by a remote policy. Errors are never papered over: they
/// abort the episode.
pub struct RemoteSeeker {
    client: Client,
    agent: AgentId,
    deadline: Duration,
    arena_side: f64,
    name: String,
}

impl RemoteSeeker {
    pub fn new(endpoint: Endpoint, agent: AgentId, deadline: Duration, config: &WorldConfig) -> Self {
        let name = endpoint.policy.clone();
        RemoteSeeker { client: Client::new(endpoint), agent, deadline, arena_side: config.arena_side, name }
    }

    fn policy_error(&self, e: BridgeError) -> PolicyError {
        let agent = self.agent;
        match e {
            BridgeError::Timeout => PolicyError::Timeout { agent, deadline_ms: self.deadline.as_millis() as u64 },
            BridgeError::Shape(detail) => PolicyError::Shape { agent, detail },
            BridgeError::Remote { kind, message } if kind == "shape" => PolicyError::Shape { agent, detail: message },
            BridgeError::Io(e) => PolicyError::Connection { agent, detail: e.to_string() },
            BridgeError::Endpoint(s) => PolicyError::Connection { agent, detail: format!("bad endpoint {s}") },
            other => PolicyError::Protocol { agent, detail: other.to_string() },
        }
    }
}

impl SeekerPolicy for RemoteSeeker {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Waypoint, PolicyError> {
        let stack = ctx.frames.ok_or_else(|| PolicyError::Shape { agent: self.agent, detail: "no frame stack".into() })?;
        let header = RequestHeader::observation(&self.name, self.agent, stack.depth());
        let tensor = stack.stacked();
        let action = self.client.query(&header, &tensor, self.deadline).map_err(|e| self.policy_error(e))?;
        let mut wp = action.to_waypoint(self.arena_side);
        // Out-of-range outputs are clamped onto the arena rather than failing
        // the step; the orientation is kept as sent.
        wp.pos = Vec2::new(wp.pos.x.clamp(0.0, self.arena_side), wp.pos.y.clamp(0.0, self.arena_side));
        Ok(wp)
    }

    fn needs_observation(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Server-side policy.
pub trait Handler: Send + Sync + 'static {
    /// `Err((kind, message))` is sent back as an error response.
    fn act(&self, req: &Request) -> Result<Action, (String, String)>;
}

impl<F> Handler for F
where
    F: Fn(&Request) -> Result<Action, (String, String)> + Send + Sync + 'static,
{
    fn act(&self, req: &Request) -> Result<Action, (String, String)> {
        self(req)
    }
}

/// Thread-per-connection policy server.
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Server {
    pub fn spawn(listener: TcpListener, handler: Arc<dyn Handler>) -> io::Result<Server> {
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let accept = thread::Builder::new().name("bridge-accept".into()).spawn(move || {
            for conn in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let handler = handler.clone();
                let _ = thread::Builder::new().name("bridge-conn".into()).spawn(move || serve_connection(conn, &*handler));
            }
        })?;
        Ok(Server { addr, stop, accept: Some(accept) })
    }

    pub fn bind(addr: &str, handler: Arc<dyn Handler>) -> io::Result<Server> {
        Self::spawn(TcpListener::bind(addr)?, handler)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn endpoint(&self, policy: &str) -> Endpoint {
        Endpoint { host: self.addr.ip().to_string(), port: self.addr.port(), policy: policy.to_owned() }
    }

    /// Block until the accept loop ends (it only ends on shutdown).
    pub fn join(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn error_frame(kind: &str, message: &str) -> Vec<u8> {
    serde_json::to_vec(&Response::Error { error: message.to_owned(), kind: kind.to_owned() }).expect("serializes")
}

fn serve_connection(mut conn: TcpStream, handler: &dyn Handler) {
    let _ = conn.set_nodelay(true);
    loop {
        let payload = match read_frame(&mut conn) {
            Ok(Some(p)) => p,
            Ok(None) => return,
            Err(e) => {
                let _ = write_frame(&mut conn, &error_frame("protocol", &e.to_string()));
                let _ = conn.shutdown(Shutdown::Both);
                return;
            }
        };
        let reply = match decode_payload(&payload) {
            Ok(req) => match handler.act(&req) {
                Ok(a) => serde_json::to_vec(&Response::Action(a)).expect("serializes"),
                Err((kind, msg)) => error_frame(&kind, &msg),
            },
            Err(e) => {
                let kind = if matches!(e, BridgeError::Shape(_)) { "shape" } else { "protocol" };
                let _ = write_frame(&mut conn, &error_frame(kind, &e.to_string()));
                let _ = conn.shutdown(Shutdown::Both);
                return;
            }
        };
        if write_frame(&mut conn, &reply).is_err() {
            return;
        }
    }
}

/// Test policies served by `hideseek bridge serve --mock`.
pub mod mock {
    use super::*;

    /// Arena center, facing +x.
    pub const ECHO: Action = Action { x: 0.0, y: 0.0, sin_o: 0.0, cos_o: 1.0 };

    pub fn echo() -> Arc<dyn Handler> {
        Arc::new(|_: &Request| Ok(ECHO))
    }

    /// Answers like `echo`, but only after `delay`.
    pub fn stall(delay: Duration) -> Arc<dyn Handler> {
        Arc::new(move |_: &Request| {
            thread::sleep(delay);
            Ok(ECHO)
        })
    }

    /// Rejects any stack depth other than `n`.
    pub fn expect_depth(n: usize, inner: Arc<dyn Handler>) -> Arc<dyn Handler> {
        Arc::new(move |req: &Request| {
            if req.header.n != n {
                return Err(("shape".to_owned(), format!("expected {n} frames, got {}", req.header.n)));
            }
            inner.act(req)
        })
    }

    /// Pure-vision clone of the chase rule: head for the visible hider disk
    /// nearest to the self mask, else stay put. Reads only the newest frame.
    pub fn chase(arena_side: f64) -> Arc<dyn Handler> {
        Arc::new(move |req: &Request| {
            let h = &req.header;
            if (h.h, h.w, h.c) != (OBS_SIZE, OBS_SIZE, OBS_CHANNELS) || h.n == 0 {
                return Err(("shape".to_owned(), format!("unsupported frame {}x{}x{}", h.h, h.w, h.c)));
            }
            let frame = &req.tensor[(h.n - 1) * OBS_SIZE * OBS_SIZE * OBS_CHANNELS..];
            let target = chase_target(frame, arena_side).ok_or_else(|| ("protocol".to_owned(), "no self mask".to_owned()))?;
            let half = arena_side / 2.0;
            Ok(Action { x: (target.x - half) / half, y: (target.y - half) / half, sin_o: 0.0, cos_o: 1.0 })
        })
    }

    fn px(frame: &[u8], r: usize, c: usize) -> &[u8] {
        let i = (r * OBS_SIZE + c) * OBS_CHANNELS;
        &frame[i..i + OBS_CHANNELS]
    }

    /// World point the chase clone steers to, from one frame.
    pub fn chase_target(frame: &[u8], arena_side: f64) -> Option<Vec2> {
        let mut mask = (0usize, 0usize, 0usize);
        for r in 0..OBS_SIZE {
            for c in 0..OBS_SIZE {
                if px(frame, r, c)[3] != 0 {
                    mask = (mask.0 + r, mask.1 + c, mask.2 + 1);
                }
            }
        }
        if mask.2 == 0 {
            return None;
        }
        let (mr, mc) = (mask.0 as f64 / mask.2 as f64, mask.1 as f64 / mask.2 as f64);
        let green = |r: usize, c: usize| px(frame, r, c)[..3] == hideseek_core::observation::HIDER;
        let mut best: Option<(f64, usize, usize)> = None;
        for r in 0..OBS_SIZE {
            for c in 0..OBS_SIZE {
                if green(r, c) {
                    let d = (r as f64 - mr).powi(2) + (c as f64 - mc).powi(2);
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, r, c));
                    }
                }
            }
        }
        let Some((_, r0, c0)) = best else {
            let (x, y) = pixel_center(mr.round() as usize, mc.round() as usize, arena_side);
            return Some(Vec2::new(x, y));
        };
        // Centroid of the green blob containing the nearest green pixel.
        let mut seen = vec![false; OBS_SIZE * OBS_SIZE];
        let mut todo = vec![(r0, c0)];
        seen[r0 * OBS_SIZE + c0] = true;
        let (mut sr, mut sc, mut n) = (0.0, 0.0, 0.0);
        while let Some((r, c)) = todo.pop() {
            sr += r as f64;
            sc += c as f64;
            n += 1.0;
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
                let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                if !(0..OBS_SIZE as i64).contains(&rr) || !(0..OBS_SIZE as i64).contains(&cc) {
                    continue;
                }
                let (rr, cc) = (rr as usize, cc as usize);
                if !seen[rr * OBS_SIZE + cc] && green(rr, cc) {
                    seen[rr * OBS_SIZE + cc] = true;
                    todo.push((rr, cc));
                }
            }
        }
        let s = arena_side / OBS_SIZE as f64;
        Some(Vec2::new((sc / n + 0.5) * s, arena_side - (sr / n + 0.5) * s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_parsing() {
        let e: Endpoint = "127.0.0.1:7000/il-long".parse().unwrap();
        assert_eq!((e.host.as_str(), e.port, e.policy.as_str()), ("127.0.0.1", 7000, "il-long"));
        assert_eq!(e.to_string(), "127.0.0.1:7000/il-long");
        for bad in ["127.0.0.1:7000", "host/pol", ":1/p", "h:99999/p", "h:1/"] {
            assert!(bad.parse::<Endpoint>().is_err(), "{bad}");
        }
    }

    #[test]
    fn stack_of_five_payload_length() {
        let header = RequestHeader::observation("pe-t", 0, 5);
        let tensor = vec![7u8; 5 * 156 * 156 * 4];
        assert_eq!(tensor.len(), 486_720);
        let frame = encode_request(&header, &tensor).unwrap();
        let header_len = serde_json::to_vec(&header).unwrap().len();
        let len = u64::from_le_bytes(frame[..8].try_into().unwrap());
        assert_eq!(len as usize, 486_720 + header_len);
        assert_eq!(decode_payload(&frame[8..]).unwrap(), Request { header, tensor });
    }

    #[test]
    fn echo_action_is_arena_center_facing_east() {
        let wp = mock::ECHO.to_waypoint(50.0);
        assert_eq!(wp.pos, Vec2::new(25.0, 25.0));
        assert_eq!(wp.heading, Some(0.0));
    }

    #[test]
    fn shape_errors() {
        let header = RequestHeader::observation("p", 0, 2);
        assert!(matches!(encode_request(&header, &[0u8; 10]), Err(BridgeError::Shape(_))));
        let mut payload = encode_payload(&header, &vec![0u8; 2 * 156 * 156 * 4]).unwrap();
        payload.pop();
        assert!(matches!(decode_payload(&payload), Err(BridgeError::Shape(_))));
        assert!(matches!(decode_payload(b"{\"policy\":"), Err(BridgeError::Malformed(_))));
    }
}

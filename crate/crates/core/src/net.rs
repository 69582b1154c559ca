//! Framed two-party transport with byte and round accounting.
//!
//! A frame is a 4-byte big-endian length followed by the payload; the first
//! payload byte is the [`MsgKind`]. There is no encryption on the channel.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

pub const MAX_FRAME: usize = (1 << 31) - 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgKind {
    Hello = 1,
    Query = 2,
    Packing = 3,
    OprfRequest = 4,
    OprfResponse = 5,
    OpprfHints = 6,
    SigmaSums = 7,
    PsiTags = 8,
    DhPsiA = 9,
    DhPsiB = 10,
    DhPsiAB = 11,
    CuckooParams = 12,
    ShareInput = 13,
    BeaverOpen = 14,
    Reveal = 15,
}

impl MsgKind {
    pub fn from_u8(b: u8) -> Option<MsgKind> {
        use MsgKind::*;
        Some(match b {
            1 => Hello,
            2 => Query,
            3 => Packing,
            4 => OprfRequest,
            5 => OprfResponse,
            6 => OpprfHints,
            7 => SigmaSums,
            8 => PsiTags,
            9 => DhPsiA,
            10 => DhPsiB,
            11 => DhPsiAB,
            12 => CuckooParams,
            13 => ShareInput,
            14 => BeaverOpen,
            15 => Reveal,
            _ => return None,
        })
    }

    /// Small metadata messages whose payload is kept for auditing.
    fn keep_payload(self) -> bool {
        matches!(
            self,
            MsgKind::Hello | MsgKind::Query | MsgKind::Packing | MsgKind::CuckooParams
        )
    }
}

trait Transport: Send {
    fn send(&mut self, frame: Vec<u8>) -> Result<()>;
    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>>;
}

struct Local {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl Transport for Local {
    fn send(&mut self, frame: Vec<u8>) -> Result<()> {
        self.tx.send(frame).map_err(|_| Error::Disconnected)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>> {
        match self.rx.recv_timeout(timeout) {
            Ok(f) => Ok(f),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Disconnected),
        }
    }
}

struct Tcp {
    stream: TcpStream,
}

impl Transport for Tcp {
    fn send(&mut self, frame: Vec<u8>) -> Result<()> {
        self.stream.write_all(&frame).map_err(io_err)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>> {
        self.stream.set_read_timeout(Some(timeout))?;
        let mut len = [0u8; 4];
        self.stream.read_exact(&mut len).map_err(io_err)?;
        let n = u32::from_be_bytes(len) as usize;
        if n > MAX_FRAME {
            return Err(Error::FrameTooLarge(n));
        }
        let mut frame = vec![0u8; 4 + n];
        frame[..4].copy_from_slice(&len);
        self.stream.read_exact(&mut frame[4..]).map_err(io_err)?;
        Ok(frame)
    }
}

fn io_err(e: std::io::Error) -> Error {
    use std::io::ErrorKind::*;
    match e.kind() {
        UnexpectedEof | ConnectionReset | ConnectionAborted | BrokenPipe => Error::Disconnected,
        WouldBlock | TimedOut => Error::Timeout,
        _ => Error::Io(e),
    }
}

/// Monotone counters, readable from other threads.
#[derive(Debug, Default)]
pub struct Counters {
    pub sent: AtomicU64,
    pub received: AtomicU64,
    pub rounds: AtomicU64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub phase: String,
    pub sent: u64,
    pub received: u64,
    pub rounds: u64,
    pub wall_nanos: u64,
}

/// Per-phase deltas, one entry per closed phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseRecord {
    pub phase: String,
    pub sent: u64,
    pub received: u64,
    pub rounds: u64,
    pub wall_nanos: u64,
}

pub const TRANSCRIPT_HEADER: [&str; 5] = ["phase", "dir", "bytes", "rounds", "wall_nanos"];

pub fn write_transcript<W: Write>(records: &[PhaseRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRANSCRIPT_HEADER)?;
    for r in records {
        for (dir, bytes) in [("sent", r.sent), ("received", r.received)] {
            out.write_record([
                r.phase.clone(),
                dir.to_string(),
                bytes.to_string(),
                r.rounds.to_string(),
                r.wall_nanos.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One party's end of a session.
pub struct Channel {
    transport: Box<dyn Transport>,
    counters: Arc<Counters>,
    timeout: Duration,
    last_was_recv: bool,
    started: Instant,
    mark: Snapshot,
    phases: Vec<PhaseRecord>,
    sent_log: Vec<(MsgKind, usize)>,
    recv_log: Vec<(MsgKind, usize, Vec<u8>)>,
}

impl Channel {
    fn new(transport: Box<dyn Transport>) -> Channel {
        Channel {
            transport,
            counters: Arc::default(),
            timeout: DEFAULT_TIMEOUT,
            last_was_recv: true,
            started: Instant::now(),
            mark: Snapshot {
                phase: String::new(),
                sent: 0,
                received: 0,
                rounds: 0,
                wall_nanos: 0,
            },
            phases: Vec::new(),
            sent_log: Vec::new(),
            recv_log: Vec::new(),
        }
    }

    /// Two connected in-process endpoints.
    pub fn pair() -> (Channel, Channel) {
        let (tx_a, rx_b) = mpsc::channel();
        let (tx_b, rx_a) = mpsc::channel();
        (
            Channel::new(Box::new(Local { tx: tx_a, rx: rx_a })),
            Channel::new(Box::new(Local { tx: tx_b, rx: rx_b })),
        )
    }

    /// Two endpoints connected over a loopback TCP socket.
    pub fn loopback_pair() -> Result<(Channel, Channel)> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let client = TcpStream::connect(listener.local_addr()?)?;
        let (server, _) = listener.accept()?;
        Ok((Self::from_stream(server)?, Self::from_stream(client)?))
    }

    /// Accepts a single peer connection.
    pub fn listen(addr: impl ToSocketAddrs) -> Result<Channel> {
        let listener = TcpListener::bind(addr)?;
        let (stream, _) = listener.accept()?;
        Self::from_stream(stream)
    }

    /// Connects to a listening peer, retrying until `timeout` elapses.
    pub fn connect(addr: impl ToSocketAddrs + Clone, timeout: Duration) -> Result<Channel> {
        let start = Instant::now();
        loop {
            match TcpStream::connect(addr.clone()) {
                Ok(s) => return Self::from_stream(s),
                Err(e) if start.elapsed() >= timeout => return Err(Error::Io(e)),
                Err(_) => std::thread::sleep(Duration::from_millis(50)),
            }
        }
    }

    fn from_stream(stream: TcpStream) -> Result<Channel> {
        stream.set_nodelay(true)?;
        Ok(Channel::new(Box::new(Tcp { stream })))
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    pub fn counters(&self) -> Arc<Counters> {
        Arc::clone(&self.counters)
    }

    pub fn bytes_sent(&self) -> u64 {
        self.counters.sent.load(Ordering::Relaxed)
    }

    pub fn bytes_received(&self) -> u64 {
        self.counters.received.load(Ordering::Relaxed)
    }

    pub fn rounds(&self) -> u64 {
        self.counters.rounds.load(Ordering::Relaxed)
    }

    pub fn send_frame(&mut self, payload: &[u8]) -> Result<()> {
        if payload.len() > MAX_FRAME {
            return Err(Error::FrameTooLarge(payload.len()));
        }
        let mut frame = Vec::with_capacity(4 + payload.len());
        frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        frame.extend_from_slice(payload);
        let n = frame.len() as u64;
        self.transport.send(frame)?;
        self.counters.sent.fetch_add(n, Ordering::Relaxed);
        if self.last_was_recv {
            self.counters.rounds.fetch_add(1, Ordering::Relaxed);
            self.last_was_recv = false;
        }
        Ok(())
    }

    pub fn recv_frame(&mut self) -> Result<Vec<u8>> {
        let mut frame = self.transport.recv(self.timeout)?;
        self.counters.received.fetch_add(frame.len() as u64, Ordering::Relaxed);
        self.last_was_recv = true;
        frame.drain(..4);
        Ok(frame)
    }

    pub fn send_msg(&mut self, kind: MsgKind, body: &[u8]) -> Result<()> {
        let mut payload = Vec::with_capacity(1 + body.len());
        payload.push(kind as u8);
        payload.extend_from_slice(body);
        self.send_frame(&payload)?;
        self.sent_log.push((kind, body.len()));
        Ok(())
    }

    /// Receives the next message, which must be of kind `expect`.
    pub fn recv_msg(&mut self, expect: MsgKind) -> Result<Vec<u8>> {
        let mut payload = self.recv_frame()?;
        let kind = payload
            .first()
            .and_then(|&b| MsgKind::from_u8(b))
            .ok_or_else(|| Error::Protocol("frame without a message kind".into()))?;
        payload.remove(0);
        let kept = if kind.keep_payload() {
            payload.clone()
        } else {
            Vec::new()
        };
        self.recv_log.push((kind, payload.len(), kept));
        if kind != expect {
            return Err(Error::Protocol(format!("expected {expect:?}, received {kind:?}")));
        }
        Ok(payload)
    }

    /// Kinds and sizes of every message received, with payloads of metadata
    /// messages.
    pub fn received_log(&self) -> &[(MsgKind, usize, Vec<u8>)] {
        &self.recv_log
    }

    pub fn sent_log(&self) -> &[(MsgKind, usize)] {
        &self.sent_log
    }

    /// Cumulative counters since the channel opened.
    pub fn snapshot(&self, phase: &str) -> Snapshot {
        Snapshot {
            phase: phase.to_string(),
            sent: self.bytes_sent(),
            received: self.bytes_received(),
            rounds: self.rounds(),
            wall_nanos: self.started.elapsed().as_nanos() as u64,
        }
    }

    /// Closes the current phase under `name` and records its deltas.
    pub fn close_phase(&mut self, name: &str) -> PhaseRecord {
        let now = self.snapshot(name);
        let rec = PhaseRecord {
            phase: name.to_string(),
            sent: now.sent - self.mark.sent,
            received: now.received - self.mark.received,
            rounds: now.rounds - self.mark.rounds,
            wall_nanos: now.wall_nanos - self.mark.wall_nanos,
        };
        self.mark = now;
        self.phases.push(rec.clone());
        rec
    }

    /// Closes the secure-computation phase, splitting off the time spent
    /// producing multiplication triples as a separate build phase.
    pub fn close_mpc_phase(&mut self, build_nanos: u64) {
        let mut eval = self.close_phase("mpc_eval");
        self.phases.pop();
        let build = build_nanos.min(eval.wall_nanos);
        eval.wall_nanos -= build;
        self.phases.push(PhaseRecord {
            phase: "mpc_build".into(),
            sent: 0,
            received: 0,
            rounds: 0,
            wall_nanos: build,
        });
        self.phases.push(eval);
    }

    pub fn phases(&self) -> &[PhaseRecord] {
        &self.phases
    }
}

/// Little helpers for fixed-width message bodies.
pub mod codec {
    use crate::error::{Error, Result};

    pub fn put_u64s(out: &mut Vec<u8>, vals: &[u64]) {
        out.reserve(vals.len() * 8);
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn u64s(body: &[u8]) -> Result<Vec<u64>> {
        if !body.len().is_multiple_of(8) {
            return Err(Error::Protocol("ragged u64 vector".into()));
        }
        Ok(body
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn put_u128s(out: &mut Vec<u8>, vals: &[u128]) {
        out.reserve(vals.len() * 16);
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn u128s(body: &[u8]) -> Result<Vec<u128>> {
        if !body.len().is_multiple_of(16) {
            return Err(Error::Protocol("ragged u128 vector".into()));
        }
        Ok(body
            .chunks_exact(16)
            .map(|c| u128::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    /// Cursor over a message body.
    pub struct Reader<'a> {
        buf: &'a [u8],
    }

    impl<'a> Reader<'a> {
        pub fn new(buf: &'a [u8]) -> Self {
            Reader { buf }
        }

        pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
            if self.buf.len() < n {
                return Err(Error::Protocol("truncated message".into()));
            }
            let (head, tail) = self.buf.split_at(n);
            self.buf = tail;
            Ok(head)
        }

        pub fn u8(&mut self) -> Result<u8> {
            Ok(self.take(1)?[0])
        }

        pub fn u16(&mut self) -> Result<u16> {
            Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
        }

        pub fn u32(&mut self) -> Result<u32> {
            Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
        }

        pub fn u64(&mut self) -> Result<u64> {
            Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
        }

        pub fn f64(&mut self) -> Result<f64> {
            Ok(f64::from_bits(self.u64()?))
        }

        pub fn rest(&mut self) -> &'a [u8] {
            std::mem::take(&mut self.buf)
        }

        pub fn finish(&self) -> Result<()> {
            if self.buf.is_empty() {
                Ok(())
            } else {
                Err(Error::Protocol("trailing bytes in message".into()))
            }
        }
    }
}

//! Attack harness: transports with a wire tap in the middle.
//!
//! Every session run through the harness has the shape
//!
//! ```text
//! client ──╮                        ╭── server thread
//!          ├── tap (two pumps) ──┤
//!   drive ─╯    Interceptor         ╰── serve_connection
//! ```
//!
//! The tap records every frame into a [`Transcript`] and hands it to an
//! [`Interceptor`], which may pass, modify, drop, or inject. Honest runs
//! use [`Passthrough`]; attacks are interceptor programs (or scripted
//! peers) over the real client and server code — never re-derivations of
//! the protocol.
//!
//! Two interchangeable backends exist: an in-process pipe pair and real
//! TCP over loopback. Under a fixed seed both must produce byte-identical
//! transcripts — transcript equality deliberately ignores timestamps.

pub mod scenarios;

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::server::Server;
use crate::wire;

// ---------------------------------------------------------------------------
// Transcripts
// ---------------------------------------------------------------------------

/// Which way a frame was travelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::ClientToServer => write!(f, "client→server"),
            Direction::ServerToClient => write!(f, "server→client"),
        }
    }
}

/// One captured frame. Equality ignores the timestamp so that transcripts
/// can be compared across runs and backends.
#[derive(Debug, Clone, Eq)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub bytes: Vec<u8>,
    /// Capture time relative to the start of the session run.
    pub at: Duration,
}

impl PartialEq for TranscriptEntry {
    fn eq(&self, other: &TranscriptEntry) -> bool {
        self.direction == other.direction && self.bytes == other.bytes
    }
}

/// The ordered capture of one connection, as seen by the wire tap
/// (frames are recorded as sent, before any interceptor tampering).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Raw frames that travelled in one direction, in order.
    pub fn frames(&self, direction: Direction) -> Vec<&[u8]> {
        self.entries
            .iter()
            .filter(|e| e.direction == direction)
            .map(|e| e.bytes.as_slice())
            .collect()
    }

    /// Decoded messages that travelled in one direction, in order.
    /// Frames that do not decode (an attacker may have injected garbage)
    /// are skipped.
    pub fn messages(&self, direction: Direction) -> Vec<wire::Message> {
        self.frames(direction)
            .into_iter()
            .filter_map(|f| wire::Message::decode(f).ok())
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Interceptors
// ---------------------------------------------------------------------------

/// What to do with one intercepted frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Forward unchanged.
    Pass,
    /// Forward these bytes instead.
    Modify(Vec<u8>),
    /// Swallow the frame; the receiver never sees it.
    Drop,
    /// Forward the frame unchanged, then also send these bytes.
    Inject(Vec<u8>),
}

/// A hook invoked on every frame in each direction.
pub trait Interceptor: Send {
    fn intercept(&mut self, direction: Direction, frame: &[u8]) -> Action;
}

/// Closures are interceptors.
impl<F> Interceptor for F
where
    F: FnMut(Direction, &[u8]) -> Action + Send,
{
    fn intercept(&mut self, direction: Direction, frame: &[u8]) -> Action {
        self(direction, frame)
    }
}

/// The identity interceptor: honest runs.
pub struct Passthrough;

impl Interceptor for Passthrough {
    fn intercept(&mut self, _direction: Direction, _frame: &[u8]) -> Action {
        Action::Pass
    }
}

// ---------------------------------------------------------------------------
// In-process byte pipes
// ---------------------------------------------------------------------------

/// One end of an in-process duplex byte channel. Dropping an end gives
/// the peer a clean end-of-stream, like a closed socket.
pub struct PipeStream {
    reader: PipeReader,
    writer: PipeWriter,
}

pub struct PipeReader {
    rx: Receiver<Vec<u8>>,
    buffer: VecDeque<u8>,
}

pub struct PipeWriter {
    tx: Option<Sender<Vec<u8>>>,
}

/// A connected pair of in-process duplex streams.
pub fn inproc_pair() -> (PipeStream, PipeStream) {
    let (tx_a, rx_a) = channel();
    let (tx_b, rx_b) = channel();
    let a = PipeStream {
        reader: PipeReader { rx: rx_a, buffer: VecDeque::new() },
        writer: PipeWriter { tx: Some(tx_b) },
    };
    let b = PipeStream {
        reader: PipeReader { rx: rx_b, buffer: VecDeque::new() },
        writer: PipeWriter { tx: Some(tx_a) },
    };
    (a, b)
}

impl PipeStream {
    /// Split into independently owned halves (for the two tap pumps).
    fn split(self) -> (PipeReader, PipeWriter) {
        (self.reader, self.writer)
    }
}

impl Read for PipeStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.reader.read(buf)
    }
}

impl Write for PipeStream {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.writer.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Read for PipeReader {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.buffer.is_empty() {
            match self.rx.recv() {
                Ok(chunk) => self.buffer.extend(chunk),
                // All senders gone: clean end-of-stream.
                Err(_) => return Ok(0),
            }
        }
        let n = buf.len().min(self.buffer.len());
        for slot in buf.iter_mut().take(n) {
            *slot = self.buffer.pop_front().expect("checked non-empty");
        }
        Ok(n)
    }
}

impl Write for PipeWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let Some(tx) = &self.tx else {
            return Err(io::Error::new(io::ErrorKind::BrokenPipe, "pipe closed"));
        };
        tx.send(buf.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer dropped"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl PipeWriter {
    /// Half-close: the peer reads end-of-stream after consuming what was
    /// already sent.
    fn close(&mut self) {
        self.tx = None;
    }
}

// ---------------------------------------------------------------------------
// Backends and connections
// ---------------------------------------------------------------------------

/// Which transport carries the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    InProcess,
    Tcp,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::InProcess => write!(f, "in-process"),
            Backend::Tcp => write!(f, "tcp"),
        }
    }
}

/// A concrete bidirectional connection, whichever backend produced it.
pub enum Conn {
    Pipe(PipeStream),
    Tcp(TcpStream),
}

impl Read for Conn {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        match self {
            Conn::Pipe(p) => p.read(buf),
            Conn::Tcp(t) => t.read(buf),
        }
    }
}

impl Write for Conn {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Conn::Pipe(p) => p.write(buf),
            Conn::Tcp(t) => t.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Conn::Pipe(_) => Ok(()),
            Conn::Tcp(t) => t.flush(),
        }
    }
}

/// A freshly connected loopback TCP pair.
fn tcp_pair() -> io::Result<(TcpStream, TcpStream)> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let connecting = TcpStream::connect(addr)?;
    let (accepted, _) = listener.accept()?;
    connecting.set_nodelay(true)?;
    accepted.set_nodelay(true)?;
    Ok((connecting, accepted))
}

enum ReadHalf {
    Pipe(PipeReader),
    Tcp(TcpStream),
}

impl Read for ReadHalf {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        match self {
            ReadHalf::Pipe(p) => p.read(buf),
            ReadHalf::Tcp(t) => t.read(buf),
        }
    }
}

enum WriteHalf {
    Pipe(PipeWriter),
    Tcp(TcpStream),
}

impl Write for WriteHalf {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            WriteHalf::Pipe(p) => p.write(buf),
            WriteHalf::Tcp(t) => t.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            WriteHalf::Pipe(_) => Ok(()),
            WriteHalf::Tcp(t) => t.flush(),
        }
    }
}

impl WriteHalf {
    /// Propagate end-of-stream to the receiving peer without disturbing
    /// the opposite direction.
    fn close(&mut self) {
        match self {
            WriteHalf::Pipe(p) => p.close(),
            WriteHalf::Tcp(t) => {
                let _ = t.shutdown(std::net::Shutdown::Write);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// The tap
// ---------------------------------------------------------------------------

/// Run one tapped connection against `server`: spawn the server and the
/// two tap pumps, hand the client end to `drive`, and return its result
/// together with the captured transcript.
///
/// The drive closure owns the client side of the conversation; dropping
/// the connection (which happens when it returns) closes the session.
///
/// Panics if the server thread reports a transport or persistence error —
/// protocol-level rejections are *not* errors (the server answers them
/// with reject frames and `Ok`).
pub fn run_session<T>(
    server: &Arc<Server>,
    backend: Backend,
    interceptor: impl Interceptor + 'static,
    drive: impl FnOnce(&mut Conn) -> T,
) -> (T, Transcript) {
    let (mut client_conn, to_client, from_client, to_server, from_server, server_conn) =
        match backend {
            Backend::InProcess => {
                let (client_end, tap_client_side) = inproc_pair();
                let (tap_server_side, server_end) = inproc_pair();
                let (from_client, to_client) = tap_client_side.split();
                let (from_server, to_server) = tap_server_side.split();
                (
                    Conn::Pipe(client_end),
                    WriteHalf::Pipe(to_client),
                    ReadHalf::Pipe(from_client),
                    WriteHalf::Pipe(to_server),
                    ReadHalf::Pipe(from_server),
                    Conn::Pipe(server_end),
                )
            }
            Backend::Tcp => {
                let (client_end, tap_client_side) = tcp_pair().expect("loopback tcp");
                let (tap_server_side, server_end) = tcp_pair().expect("loopback tcp");
                let from_client = tap_client_side.try_clone().expect("socket clone");
                let from_server = tap_server_side.try_clone().expect("socket clone");
                (
                    Conn::Tcp(client_end),
                    WriteHalf::Tcp(tap_client_side),
                    ReadHalf::Tcp(from_client),
                    WriteHalf::Tcp(tap_server_side),
                    ReadHalf::Tcp(from_server),
                    Conn::Tcp(server_end),
                )
            }
        };

    let interceptor: Arc<Mutex<dyn Interceptor>> = Arc::new(Mutex::new(interceptor));
    let transcript = Arc::new(Mutex::new(Transcript::default()));
    let start = Instant::now();

    let server = Arc::clone(server);
    let server_thread = std::thread::spawn(move || server.serve_connection(server_conn));
    let c2s = spawn_pump(
        from_client,
        to_server,
        Direction::ClientToServer,
        Arc::clone(&interceptor),
        Arc::clone(&transcript),
        start,
    );
    let s2c = spawn_pump(
        from_server,
        to_client,
        Direction::ServerToClient,
        Arc::clone(&interceptor),
        Arc::clone(&transcript),
        start,
    );

    let result = drive(&mut client_conn);
    drop(client_conn);

    c2s.join().expect("client→server pump");
    s2c.join().expect("server→client pump");
    server_thread
        .join()
        .expect("server thread")
        .expect("server transport failure during a harness run");

    let transcript = Arc::try_unwrap(transcript)
        .expect("all transcript holders joined")
        .into_inner()
        .unwrap();
    (result, transcript)
}

fn spawn_pump(
    mut from: ReadHalf,
    mut to: WriteHalf,
    direction: Direction,
    interceptor: Arc<Mutex<dyn Interceptor>>,
    transcript: Arc<Mutex<Transcript>>,
    start: Instant,
) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || {
        // A clean close (`Ok(None)`) or a torn connection (`Err`) both end
        // this direction of the pump.
        while let Ok(Some(frame)) = wire::read_frame_bytes(&mut from) {
            transcript.lock().unwrap().entries.push(TranscriptEntry {
                direction,
                bytes: frame.clone(),
                at: start.elapsed(),
            });
            let action = interceptor.lock().unwrap().intercept(direction, &frame);
            let outcome = match action {
                Action::Pass => to.write_all(&frame),
                Action::Modify(bytes) => to.write_all(&bytes),
                Action::Drop => continue,
                Action::Inject(extra) => to.write_all(&frame).and_then(|()| to.write_all(&extra)),
            };
            if outcome.is_err() {
                break;
            }
        }
        to.close();
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::server::{RegistrationDb, ServerIdentity};
    use crate::wire::{Message, RejectCode, RegisterRequest};
    use crate::Rng;

    fn test_server(seed: [u8; 32]) -> Arc<Server> {
        let mut rng = Rng::seeded_for(seed, "server-identity");
        let ident = ServerIdentity::issue("example.com", &mut rng).unwrap();
        Arc::new(Server::new(ident, RegistrationDb::in_memory(), Rng::seeded_for(seed, "server")))
    }

    fn sealed_registration(server: &Arc<Server>, id: &str, rng: &mut Rng) -> Message {
        let spk = *server.identity().keypair().public_bytes();
        let frame = Message::RegisterRequest(RegisterRequest { id: id.into(), upk: rng.array() })
            .encode();
        Message::SessionInit { sealed: crate::suite::key_transport_seal(&spk, &frame, rng) }
    }

    #[test]
    fn pipes_carry_bytes_and_close_cleanly() {
        let (mut a, mut b) = inproc_pair();
        a.write_all(b"hello").unwrap();
        a.write_all(b" world").unwrap();
        let mut buf = [0u8; 11];
        b.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, b"hello world");

        drop(a);
        assert_eq!(b.read(&mut buf).unwrap(), 0, "dropped peer reads as end-of-stream");
        assert_eq!(
            b.write(b"x").unwrap_err().kind(),
            io::ErrorKind::BrokenPipe,
            "writing to a dropped peer fails"
        );
    }

    #[test]
    fn passthrough_session_registers_and_records_both_directions() {
        for backend in [Backend::InProcess, Backend::Tcp] {
            let server = test_server([9; 32]);
            let mut rng = Rng::seeded_for([9; 32], "client");
            let init = sealed_registration(&server, "alice", &mut rng);
            let ((), transcript) = run_session(&server, backend, Passthrough, |conn| {
                wire::write_frame(conn, &init).unwrap();
                assert!(matches!(wire::read_frame(conn).unwrap(), Message::RegisterAck));
            });
            assert_eq!(transcript.len(), 2);
            assert_eq!(transcript.entries[0].direction, Direction::ClientToServer);
            assert_eq!(transcript.entries[1].direction, Direction::ServerToClient);
            assert_eq!(transcript.entries[1].bytes, Message::RegisterAck.encode());
            assert_eq!(server.database().len(), 1, "backend {backend}");
        }
    }

    #[test]
    fn transcript_equality_ignores_timestamps() {
        let entry = |at| TranscriptEntry {
            direction: Direction::ClientToServer,
            bytes: vec![1, 2, 3],
            at,
        };
        let a = Transcript { entries: vec![entry(Duration::from_millis(1))] };
        let b = Transcript { entries: vec![entry(Duration::from_millis(999))] };
        assert_eq!(a, b);
        let c = Transcript {
            entries: vec![TranscriptEntry {
                direction: Direction::ServerToClient,
                bytes: vec![1, 2, 3],
                at: Duration::from_millis(1),
            }],
        };
        assert_ne!(a, c);
    }

    #[test]
    fn modify_action_rewrites_the_frame_in_flight() {
        let server = test_server([10; 32]);
        let mut rng = Rng::seeded_for([10; 32], "client");
        let init = sealed_registration(&server, "alice", &mut rng);
        // Corrupt one sealed byte on the way through: the envelope must
        // refuse to open and the server must call it malformed.
        let tamper = |direction: Direction, frame: &[u8]| {
            if direction == Direction::ClientToServer {
                let mut bytes = frame.to_vec();
                *bytes.last_mut().unwrap() ^= 0x01;
                Action::Modify(bytes)
            } else {
                Action::Pass
            }
        };
        let ((), transcript) = run_session(&server, Backend::InProcess, tamper, |conn| {
            wire::write_frame(conn, &init).unwrap();
            assert!(matches!(
                wire::read_frame(conn).unwrap(),
                Message::Reject { code: RejectCode::Malformed }
            ));
        });
        // The transcript records what the sender sent, pre-tamper.
        assert_eq!(transcript.entries[0].bytes, init.encode());
        assert_eq!(server.database().len(), 0);
    }

    #[test]
    fn drop_action_swallows_a_frame_without_killing_the_connection() {
        let server = test_server([11; 32]);
        let mut rng = Rng::seeded_for([11; 32], "client");
        let first = sealed_registration(&server, "alice", &mut rng);
        let second = sealed_registration(&server, "bob", &mut rng);
        // Drop the first client frame; the second must still go through,
        // proving the tap (not the server) ate the first.
        let mut dropped = false;
        let net = move |direction: Direction, _frame: &[u8]| {
            if direction == Direction::ClientToServer && !dropped {
                dropped = true;
                Action::Drop
            } else {
                Action::Pass
            }
        };
        let ((), _) = run_session(&server, Backend::InProcess, net, |conn| {
            wire::write_frame(conn, &first).unwrap();
            wire::write_frame(conn, &second).unwrap();
            assert!(matches!(wire::read_frame(conn).unwrap(), Message::RegisterAck));
        });
        let db = server.database();
        assert_eq!(db.len(), 1, "only the undropped registration landed");
        let b = crate::protocol::id_digest("bob", "example.com").unwrap();
        assert!(db.contains(&b));
    }

    #[test]
    fn inject_action_appends_extra_bytes_after_the_frame() {
        let server = test_server([12; 32]);
        let mut rng = Rng::seeded_for([12; 32], "client");
        let init = sealed_registration(&server, "alice", &mut rng);
        // Inject a client-bound message type right after the honest
        // registration: the server acks the real frame, then rejects the
        // injected one as out of place.
        let mut injected = false;
        let net = move |direction: Direction, _frame: &[u8]| {
            if direction == Direction::ClientToServer && !injected {
                injected = true;
                Action::Inject(Message::RegisterAck.encode())
            } else {
                Action::Pass
            }
        };
        let ((), _) = run_session(&server, Backend::InProcess, net, |conn| {
            wire::write_frame(conn, &init).unwrap();
            assert!(matches!(wire::read_frame(conn).unwrap(), Message::RegisterAck));
            assert!(matches!(
                wire::read_frame(conn).unwrap(),
                Message::Reject { code: RejectCode::BadState }
            ));
        });
        assert_eq!(server.database().len(), 1);
    }

    #[test]
    fn backends_produce_identical_transcripts_under_one_seed() {
        let run = |backend| {
            let server = test_server([13; 32]);
            let mut rng = Rng::seeded_for([13; 32], "client");
            let init = sealed_registration(&server, "alice", &mut rng);
            let ((), transcript) = run_session(&server, backend, Passthrough, |conn| {
                wire::write_frame(conn, &init).unwrap();
                wire::read_frame(conn).unwrap();
            });
            transcript
        };
        assert_eq!(run(Backend::InProcess), run(Backend::Tcp));
    }
}

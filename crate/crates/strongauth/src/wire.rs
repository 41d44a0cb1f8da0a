//! Bit-exact binary framing and message codec.
//!
//! Every message travels as one frame:
//!
//! ```text
//! length: u32 big-endian   (= 1 + payload length, at most 65536)
//! type:   u8
//! payload
//! ```
//!
//! Encodings are canonical — no optional fields, no padding freedom — and
//! [`Message::decode`] is strict: unknown type bytes, length mismatches,
//! trailing bytes and non-canonical payloads are all [`WireError::Malformed`].
//! Decoding never panics on arbitrary input; that property is fuzzed.
//!
//! Type byte map: `0x01` register request, `0x02` register ack, `0x10`
//! session init (a key-transport-sealed payload), `0x11` session ack,
//! `0x12` login prove, `0x13` login challenge, `0x14` reject, `0x20` renew
//! request, `0x21` renew ack.

use std::io::{Read, Write};

use thiserror::Error;

/// Bytes of the frame length prefix.
pub const FRAME_HEADER_LEN: usize = 4;
/// Cap on the frame length field (type byte + payload).
pub const MAX_FRAME_LEN: u32 = 65536;

/// Payload size of a [`LoginProve`] frame: `d ‖ f ‖ e`.
pub const LOGIN_PROVE_PAYLOAD_LEN: usize = 32 + 32 + 64;
/// Payload size of a [`LoginChallenge`] frame: `g ‖ m`.
pub const LOGIN_CHALLENGE_PAYLOAD_LEN: usize = 32 + 32;
/// Payload size of a [`RenewRequest`] frame: `x ‖ y`.
pub const RENEW_REQUEST_PAYLOAD_LEN: usize = 32 + 32;

/// Wire-level failures.
#[derive(Debug, Error)]
pub enum WireError {
    /// The bytes do not form a canonical frame. The connection carrying
    /// them should be dropped.
    #[error("malformed frame: {0}")]
    Malformed(&'static str),
    /// The underlying stream failed or closed mid-frame.
    #[error("connection error: {0}")]
    Connection(#[from] std::io::Error),
}

/// Reject reason carried by [`Message::Reject`].
///
/// Unknown identities and bad proofs share one code on purpose: distinct
/// codes would hand an attacker a user-enumeration oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum RejectCode {
    /// Unknown identity or failed proof (deliberately merged).
    BadCredentials = 0x01,
    /// Message arrived in a protocol state that does not expect it.
    BadState = 0x02,
    /// Payload failed structural validation.
    Malformed = 0x03,
}

impl RejectCode {
    fn from_byte(b: u8) -> Option<RejectCode> {
        match b {
            0x01 => Some(RejectCode::BadCredentials),
            0x02 => Some(RejectCode::BadState),
            0x03 => Some(RejectCode::Malformed),
            _ => None,
        }
    }
}

/// Registration payload: identifier and user public key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterRequest {
    pub id: String,
    pub upk: [u8; 32],
}

/// Client login proof: masked identity `d`, masked challenge `f`,
/// signature `e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginProve {
    pub d: [u8; 32],
    pub f: [u8; 32],
    pub e: [u8; 64],
}

/// Server response: masked session blinding `g` and proof digest `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoginChallenge {
    pub g: [u8; 32],
    pub m: [u8; 32],
}

/// Key renewal payload: masked new public key `x` and binding digest `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenewRequest {
    pub x: [u8; 32],
    pub y: [u8; 32],
}

/// Every protocol message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    /// `0x01` — enrollment data. On the wire this only ever travels
    /// *inside* a sealed [`Message::SessionInit`] envelope (the secured
    /// registration channel); the plaintext form exists so the envelope has
    /// a canonical byte encoding to seal.
    RegisterRequest(RegisterRequest),
    /// `0x02` — enrollment stored.
    RegisterAck,
    /// `0x10` — a key-transport-sealed payload for the server: either a
    /// 32-byte session secret (opens a login session) or an encoded
    /// [`Message::RegisterRequest`] frame (enrollment).
    SessionInit { sealed: Vec<u8> },
    /// `0x11` — login session opened.
    SessionAck { session_id: [u8; 16] },
    /// `0x12` — client's possession proof.
    LoginProve(LoginProve),
    /// `0x13` — server's counter-proof.
    LoginChallenge(LoginChallenge),
    /// `0x14` — refusal, with a coarse reason code.
    Reject { code: RejectCode },
    /// `0x20` — authenticated key rotation request.
    RenewRequest(RenewRequest),
    /// `0x21` — rotation stored.
    RenewAck,
}

const TYPE_REGISTER_REQUEST: u8 = 0x01;
const TYPE_REGISTER_ACK: u8 = 0x02;
const TYPE_SESSION_INIT: u8 = 0x10;
const TYPE_SESSION_ACK: u8 = 0x11;
const TYPE_LOGIN_PROVE: u8 = 0x12;
const TYPE_LOGIN_CHALLENGE: u8 = 0x13;
const TYPE_REJECT: u8 = 0x14;
const TYPE_RENEW_REQUEST: u8 = 0x20;
const TYPE_RENEW_ACK: u8 = 0x21;

impl Message {
    /// Encode as a complete frame (length prefix included).
    ///
    /// Field invariants (identifier 1–31 bytes, sealed payload within the
    /// frame cap) are the caller's responsibility; violating them is a
    /// usage error and panics.
    pub fn encode(&self) -> Vec<u8> {
        let (msg_type, payload): (u8, Vec<u8>) = match self {
            Message::RegisterRequest(req) => {
                let id = req.id.as_bytes();
                assert!(
                    !id.is_empty() && id.len() <= crate::protocol::MAX_ID_LEN,
                    "register request identifier must be 1..=31 bytes"
                );
                let mut p = Vec::with_capacity(1 + id.len() + 32);
                p.push(id.len() as u8);
                p.extend_from_slice(id);
                p.extend_from_slice(&req.upk);
                (TYPE_REGISTER_REQUEST, p)
            }
            Message::RegisterAck => (TYPE_REGISTER_ACK, Vec::new()),
            Message::SessionInit { sealed } => {
                assert!(
                    sealed.len() <= (MAX_FRAME_LEN as usize) - 3,
                    "sealed payload exceeds the frame cap"
                );
                let mut p = Vec::with_capacity(2 + sealed.len());
                p.extend_from_slice(&(sealed.len() as u16).to_be_bytes());
                p.extend_from_slice(sealed);
                (TYPE_SESSION_INIT, p)
            }
            Message::SessionAck { session_id } => (TYPE_SESSION_ACK, session_id.to_vec()),
            Message::LoginProve(m) => {
                let mut p = Vec::with_capacity(128);
                p.extend_from_slice(&m.d);
                p.extend_from_slice(&m.f);
                p.extend_from_slice(&m.e);
                (TYPE_LOGIN_PROVE, p)
            }
            Message::LoginChallenge(m) => {
                let mut p = Vec::with_capacity(64);
                p.extend_from_slice(&m.g);
                p.extend_from_slice(&m.m);
                (TYPE_LOGIN_CHALLENGE, p)
            }
            Message::Reject { code } => (TYPE_REJECT, vec![*code as u8]),
            Message::RenewRequest(m) => {
                let mut p = Vec::with_capacity(64);
                p.extend_from_slice(&m.x);
                p.extend_from_slice(&m.y);
                (TYPE_RENEW_REQUEST, p)
            }
            Message::RenewAck => (TYPE_RENEW_ACK, Vec::new()),
        };
        let length = 1 + payload.len() as u32;
        let mut frame = Vec::with_capacity(FRAME_HEADER_LEN + length as usize);
        frame.extend_from_slice(&length.to_be_bytes());
        frame.push(msg_type);
        frame.extend_from_slice(&payload);
        frame
    }

    /// Strictly decode one complete frame. The input must be exactly one
    /// frame: a wrong length field, trailing bytes, an unknown type byte or
    /// a non-canonical payload all yield [`WireError::Malformed`].
    pub fn decode(bytes: &[u8]) -> Result<Message, WireError> {
        if bytes.len() < FRAME_HEADER_LEN + 1 {
            return Err(WireError::Malformed("frame shorter than header plus type byte"));
        }
        let length = u32::from_be_bytes(bytes[..4].try_into().unwrap());
        if length == 0 || length > MAX_FRAME_LEN {
            return Err(WireError::Malformed("length field out of range"));
        }
        if bytes.len() != FRAME_HEADER_LEN + length as usize {
            return Err(WireError::Malformed("length field disagrees with frame size"));
        }
        let msg_type = bytes[4];
        let payload = &bytes[5..];
        match msg_type {
            TYPE_REGISTER_REQUEST => {
                if payload.is_empty() {
                    return Err(WireError::Malformed("register request missing id length"));
                }
                let id_len = payload[0] as usize;
                if id_len == 0 || id_len > crate::protocol::MAX_ID_LEN {
                    return Err(WireError::Malformed("register request id length out of range"));
                }
                if payload.len() != 1 + id_len + 32 {
                    return Err(WireError::Malformed("register request payload size mismatch"));
                }
                let id = std::str::from_utf8(&payload[1..1 + id_len])
                    .map_err(|_| WireError::Malformed("register request id is not UTF-8"))?
                    .to_string();
                let upk: [u8; 32] = payload[1 + id_len..].try_into().unwrap();
                Ok(Message::RegisterRequest(RegisterRequest { id, upk }))
            }
            TYPE_REGISTER_ACK => {
                expect_len(payload, 0, "register ack")?;
                Ok(Message::RegisterAck)
            }
            TYPE_SESSION_INIT => {
                if payload.len() < 2 {
                    return Err(WireError::Malformed("session init missing sealed length"));
                }
                let sealed_len = u16::from_be_bytes(payload[..2].try_into().unwrap()) as usize;
                if payload.len() != 2 + sealed_len {
                    return Err(WireError::Malformed("session init sealed length mismatch"));
                }
                Ok(Message::SessionInit { sealed: payload[2..].to_vec() })
            }
            TYPE_SESSION_ACK => {
                expect_len(payload, 16, "session ack")?;
                Ok(Message::SessionAck { session_id: payload.try_into().unwrap() })
            }
            TYPE_LOGIN_PROVE => {
                expect_len(payload, 128, "login prove")?;
                Ok(Message::LoginProve(LoginProve {
                    d: payload[..32].try_into().unwrap(),
                    f: payload[32..64].try_into().unwrap(),
                    e: payload[64..].try_into().unwrap(),
                }))
            }
            TYPE_LOGIN_CHALLENGE => {
                expect_len(payload, 64, "login challenge")?;
                Ok(Message::LoginChallenge(LoginChallenge {
                    g: payload[..32].try_into().unwrap(),
                    m: payload[32..].try_into().unwrap(),
                }))
            }
            TYPE_REJECT => {
                expect_len(payload, 1, "reject")?;
                let code = RejectCode::from_byte(payload[0])
                    .ok_or(WireError::Malformed("unknown reject code"))?;
                Ok(Message::Reject { code })
            }
            TYPE_RENEW_REQUEST => {
                expect_len(payload, 64, "renew request")?;
                Ok(Message::RenewRequest(RenewRequest {
                    x: payload[..32].try_into().unwrap(),
                    y: payload[32..].try_into().unwrap(),
                }))
            }
            TYPE_RENEW_ACK => {
                expect_len(payload, 0, "renew ack")?;
                Ok(Message::RenewAck)
            }
            _ => Err(WireError::Malformed("unknown message type")),
        }
    }
}

fn expect_len(payload: &[u8], want: usize, _what: &'static str) -> Result<(), WireError> {
    if payload.len() != want {
        return Err(WireError::Malformed("payload size does not match message type"));
    }
    Ok(())
}

/// Read one complete frame, returning its full bytes (header included).
///
/// `Ok(None)` means the peer closed the stream cleanly before a new frame
/// started; closing mid-frame is a [`WireError::Connection`]. An oversize
/// length field is [`WireError::Malformed`] — the caller must drop the
/// connection, since the stream position is no longer trustworthy.
pub fn read_frame_bytes(stream: &mut impl Read) -> Result<Option<Vec<u8>>, WireError> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    let mut got = 0;
    while got < header.len() {
        match stream.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => {
                return Err(WireError::Connection(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "stream closed inside a frame header",
                )))
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(WireError::Connection(e)),
        }
    }
    let length = u32::from_be_bytes(header);
    if length == 0 || length > MAX_FRAME_LEN {
        return Err(WireError::Malformed("length field out of range"));
    }
    let mut frame = Vec::with_capacity(FRAME_HEADER_LEN + length as usize);
    frame.extend_from_slice(&header);
    frame.resize(FRAME_HEADER_LEN + length as usize, 0);
    stream
        .read_exact(&mut frame[FRAME_HEADER_LEN..])
        .map_err(WireError::Connection)?;
    Ok(Some(frame))
}

/// Read and decode one message; a clean close before a frame is a
/// [`WireError::Connection`].
pub fn read_frame(stream: &mut impl Read) -> Result<Message, WireError> {
    match read_frame_bytes(stream)? {
        Some(frame) => Message::decode(&frame),
        None => Err(WireError::Connection(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            "stream closed before a frame",
        ))),
    }
}

/// Encode and write one message, flushing the stream.
pub fn write_frame(stream: &mut impl Write, message: &Message) -> Result<(), WireError> {
    stream.write_all(&message.encode())?;
    stream.flush()?;
    Ok(())
}

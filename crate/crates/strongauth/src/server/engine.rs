//! Connection dispatch: frames in, verdicts out.
//!
//! [`Server`] owns the registration database and all live login sessions
//! behind locks, so any number of threads can run [`Server::serve_connection`]
//! concurrently over any byte stream. The dispatch rules are strict:
//!
//! * Malformed frames, unopened envelopes: `Reject{Malformed}`, close.
//! * Messages that the current state does not allow (a proof with no
//!   session, a plaintext registration, a reused session secret, a
//!   duplicate registration): `Reject{BadState}`, close.
//! * Failed proofs and failed renewals: `Reject{BadCredentials}` — one
//!   merged code whether the identity was unknown or the signature bad,
//!   so rejections cannot be used to enumerate registered users.
//!
//! A rejected renewal keeps the connection and session alive (the session
//! key is still good); every other rejection tears the connection down.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::sync::{Mutex, MutexGuard};

use crate::suite::{self, SymKey32, KEY_LEN};
use crate::wire::{self, Message, RejectCode, WireError};
use crate::Rng;

use super::{
    challenge_response, handle_register, handle_renewal, open_envelope, Envelope, LoginVerdict,
    RegistrationDb, RenewalVerdict, ServerError, ServerIdentity, ServerLoginSession,
};

/// A shareable server instance: identity, database, live sessions, and the
/// set of session-secret digests already seen (replayed transcripts die at
/// the first frame).
pub struct Server {
    ident: ServerIdentity,
    db: Mutex<RegistrationDb>,
    sessions: Mutex<HashMap<[u8; 16], ServerLoginSession>>,
    seen_secrets: Mutex<HashSet<[u8; KEY_LEN]>>,
    rng: Mutex<Rng>,
}

/// What the dispatcher decides to do after one message.
enum Step {
    Reply(Message),
    ReplyAndClose(Message),
}

impl Server {
    pub fn new(ident: ServerIdentity, db: RegistrationDb, rng: Rng) -> Server {
        Server {
            ident,
            db: Mutex::new(db),
            sessions: Mutex::new(HashMap::new()),
            seen_secrets: Mutex::new(HashSet::new()),
            rng: Mutex::new(rng),
        }
    }

    pub fn identity(&self) -> &ServerIdentity {
        &self.ident
    }

    /// Direct database access, mainly for inspection in tests and attack
    /// scenarios ("steal the server database" is one move).
    pub fn database(&self) -> MutexGuard<'_, RegistrationDb> {
        self.db.lock().unwrap()
    }

    /// The session key of an established session, if any.
    pub fn session_key(&self, session_id: &[u8; 16]) -> Option<SymKey32> {
        self.sessions
            .lock()
            .unwrap()
            .get(session_id)
            .and_then(|s| s.session_key().cloned())
    }

    /// The identifier proven by an established session, if any.
    pub fn session_identifier(&self, session_id: &[u8; 16]) -> Option<String> {
        self.sessions.lock().unwrap().get(session_id).and_then(|s| s.identifier())
    }

    /// Serve one connection to completion: read frames, dispatch, reply,
    /// until the peer closes or a rejection closes from this side.
    ///
    /// Returns `Ok` both on clean completion and on protocol-level
    /// rejection (the reject frame *is* the answer); `Err` is reserved for
    /// transport and persistence failures.
    pub fn serve_connection<S: Read + Write>(&self, mut stream: S) -> Result<(), ServerError> {
        // The session this connection is driving, if a login has started.
        let mut current: Option<[u8; 16]> = None;
        loop {
            let frame = match wire::read_frame_bytes(&mut stream) {
                Ok(Some(frame)) => frame,
                Ok(None) => return Ok(()),
                Err(WireError::Malformed(_)) => {
                    let _ = wire::write_frame(&mut stream, &Message::Reject {
                        code: RejectCode::Malformed,
                    });
                    return Ok(());
                }
                Err(WireError::Connection(e)) => return Err(e.into()),
            };
            let msg = match Message::decode(&frame) {
                Ok(msg) => msg,
                Err(_) => {
                    let _ = wire::write_frame(&mut stream, &Message::Reject {
                        code: RejectCode::Malformed,
                    });
                    return Ok(());
                }
            };
            match self.dispatch(&mut current, msg)? {
                Step::Reply(reply) => wire::write_frame(&mut stream, &reply)
                    .map_err(|e| ServerError::Io(wire_io(e)))?,
                Step::ReplyAndClose(reply) => {
                    let _ = wire::write_frame(&mut stream, &reply);
                    return Ok(());
                }
            }
        }
    }

    fn dispatch(
        &self,
        current: &mut Option<[u8; 16]>,
        msg: Message,
    ) -> Result<Step, ServerError> {
        match msg {
            Message::SessionInit { sealed } => self.on_session_init(current, &sealed),
            Message::LoginProve(prove) => {
                let Some(session_id) = *current else {
                    return Ok(Step::ReplyAndClose(reject(RejectCode::BadState)));
                };
                let mut sessions = self.sessions.lock().unwrap();
                let session = sessions.get_mut(&session_id).expect("live session");
                let db = self.db.lock().unwrap();
                match super::verify_login(session, &prove, &db, &self.ident) {
                    Ok(LoginVerdict::Accepted) => {
                        drop(db);
                        let mut rng = self.rng.lock().unwrap();
                        let challenge = challenge_response(session, &self.ident, &mut rng)?;
                        Ok(Step::Reply(Message::LoginChallenge(challenge)))
                    }
                    Ok(LoginVerdict::Rejected(_)) => {
                        Ok(Step::ReplyAndClose(reject(RejectCode::BadCredentials)))
                    }
                    Err(ServerError::State) => {
                        Ok(Step::ReplyAndClose(reject(RejectCode::BadState)))
                    }
                    Err(e) => Err(e),
                }
            }
            Message::RenewRequest(request) => {
                let Some(session_id) = *current else {
                    return Ok(Step::ReplyAndClose(reject(RejectCode::BadState)));
                };
                let mut sessions = self.sessions.lock().unwrap();
                let session = sessions.get_mut(&session_id).expect("live session");
                let mut db = self.db.lock().unwrap();
                let mut rng = self.rng.lock().unwrap();
                match handle_renewal(session, &request, &mut db, &self.ident, &mut rng) {
                    Ok(RenewalVerdict::Accepted) => {
                        db.save()?;
                        Ok(Step::Reply(Message::RenewAck))
                    }
                    // The session key is still good; only the rotation is
                    // refused, so the session and connection stay up.
                    Ok(RenewalVerdict::Rejected) => {
                        Ok(Step::Reply(reject(RejectCode::BadCredentials)))
                    }
                    Err(ServerError::State) => {
                        Ok(Step::ReplyAndClose(reject(RejectCode::BadState)))
                    }
                    Err(e) => Err(e),
                }
            }
            // Everything else is either client-bound or (for a plaintext
            // RegisterRequest) only valid inside a sealed envelope.
            Message::RegisterRequest(_)
            | Message::RegisterAck
            | Message::SessionAck { .. }
            | Message::LoginChallenge(_)
            | Message::Reject { .. }
            | Message::RenewAck => Ok(Step::ReplyAndClose(reject(RejectCode::BadState))),
        }
    }

    fn on_session_init(
        &self,
        current: &mut Option<[u8; 16]>,
        sealed: &[u8],
    ) -> Result<Step, ServerError> {
        let envelope = match open_envelope(sealed, &self.ident) {
            Ok(envelope) => envelope,
            Err(ServerError::Refused(_)) => {
                return Ok(Step::ReplyAndClose(reject(RejectCode::Malformed)));
            }
            Err(e) => return Err(e),
        };
        match envelope {
            Envelope::Registration(request) => {
                let mut db = self.db.lock().unwrap();
                let mut rng = self.rng.lock().unwrap();
                match handle_register(&request, &mut db, &self.ident, &mut rng) {
                    Ok(()) => {
                        db.save()?;
                        Ok(Step::Reply(Message::RegisterAck))
                    }
                    Err(ServerError::AlreadyRegistered) => {
                        Ok(Step::ReplyAndClose(reject(RejectCode::BadState)))
                    }
                    Err(ServerError::Refused(_)) => {
                        Ok(Step::ReplyAndClose(reject(RejectCode::Malformed)))
                    }
                    Err(e) => Err(e),
                }
            }
            Envelope::SessionSecret(ss) => {
                if current.is_some() {
                    // One login per connection; a second init is an
                    // insertion, not a client.
                    return Ok(Step::ReplyAndClose(reject(RejectCode::BadState)));
                }
                // Freshness: a session secret digest seen before means a
                // replayed transcript. Refuse at the door.
                let digest = *suite::hash(ss.as_bytes()).as_bytes();
                if !self.seen_secrets.lock().unwrap().insert(digest) {
                    return Ok(Step::ReplyAndClose(reject(RejectCode::BadState)));
                }
                // Scoped so the rng guard is released before the sessions
                // lock: every path acquires sessions → db → rng.
                let session = {
                    let mut rng = self.rng.lock().unwrap();
                    ServerLoginSession::new(ss, &mut rng)
                };
                let session_id = *session.session_id();
                self.sessions.lock().unwrap().insert(session_id, session);
                *current = Some(session_id);
                Ok(Step::Reply(Message::SessionAck { session_id }))
            }
        }
    }
}

fn reject(code: RejectCode) -> Message {
    Message::Reject { code }
}

fn wire_io(e: WireError) -> std::io::Error {
    match e {
        WireError::Connection(e) => e,
        WireError::Malformed(m) => std::io::Error::new(std::io::ErrorKind::InvalidData, m),
    }
}
